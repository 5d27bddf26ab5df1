"""Adaptive integration on half-lines, built on QUADPACK via scipy."""

from __future__ import annotations

import math
import warnings

from scipy import integrate


def integrate_interval(f, a: float, b: float, rel_tol: float = 1e-11, abs_tol: float = 1e-14) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, _ = integrate.quad(f, a, b, epsabs=abs_tol, epsrel=rel_tol, limit=400)
    return value


def integrate_to_infinity(
    f,
    a: float,
    scale: float,
    rel_tol: float = 1e-11,
    abs_tol: float = 1e-14,
    max_pieces: int = 80,
) -> float:
    """Integrate ``f`` over ``[a, inf)`` for integrands that decay eventually.

    The half-line is cut into pieces of doubling width starting at ``scale``;
    summation stops once two consecutive pieces each add less than
    ``abs_tol + rel_tol * |total|``.
    """
    if scale <= 0 or not math.isfinite(scale):
        raise ValueError("scale must be positive and finite")
    total = 0.0
    lo, width = a, scale
    quiet = 0
    for _ in range(max_pieces):
        hi = lo + width
        piece = integrate_interval(f, lo, hi, rel_tol=rel_tol, abs_tol=abs_tol)
        total += piece
        if abs(piece) <= abs_tol + rel_tol * abs(total):
            quiet += 1
            if quiet >= 2:
                return total
        else:
            quiet = 0
        lo, width = hi, 2.0 * width
    raise RuntimeError("integral over the half-line did not settle")
