"""Command-line front end.

Every command writes a delimited table (CSV by default) to stdout or
``--out``. Settings come from built-in defaults, then an optional
``key=value`` config file, then command-line flags.

Exit codes: 0 success, 2 configuration error, 3 domain error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import math
import os
import sys
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal

from . import analytics, exact, simulate
from .errors import DomainError, InvalidParameterError, RegionError
from .lundberg import solve_alpha, solve_beta
from .model import (
    CheckedModel,
    ConstantDelay,
    DeterministicProfit,
    ErlangProfit,
    ExponentialDelay,
    ExponentialProfit,
    GaussianTailDelay,
    PowerTailDelay,
    QueryPoint,
    UniformDelay,
    ZeroDelay,
    make_model,
)

COMMANDS = (
    "alpha", "beta", "bounds", "laplace", "density", "mean-ruin",
    "exact", "simulate", "table1", "table2", "heatmap",
)
SEED_ENV = "RUINLAB_SEED"

TABLE1 = dict(rho=1.0, lam=0.02, profit="exp:0.01", delay="const:2",
              x=(0.5, 1.5, 2.5, 3.5, 4.5), t=(0.5, 1.5, 2.5, 3.5, 4.5))
TABLE2 = dict(rho=1.0, lam=2.0, profit="exp:1", delay="unif:1",
              x=(0.2, 0.4, 0.6, 0.8, 1.0), t=(0.25, 0.5, 0.75, 1.0))


class ConfigError(InvalidParameterError):
    pass


# ---------------------------------------------------------------------------
# Distribution syntax
# ---------------------------------------------------------------------------


def _numbers(spec: str, parts: list[str], count: int) -> list[float]:
    if len(parts) != count:
        raise ConfigError(f"malformed distribution {spec!r}")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"malformed distribution {spec!r}") from None


def parse_profit(spec: str):
    """``exp:<nu>``, ``erlang:<k>:<nu>`` or ``det:<y0>``."""
    name, *parts = spec.strip().split(":")
    if name == "exp":
        return ExponentialProfit(*_numbers(spec, parts, 1))
    if name == "erlang":
        k, nu = _numbers(spec, parts, 2)
        if k != int(k):
            raise ConfigError(f"Erlang shape must be an integer in {spec!r}")
        return ErlangProfit(int(k), nu)
    if name == "det":
        return DeterministicProfit(*_numbers(spec, parts, 1))
    raise ConfigError(f"unknown profit distribution {spec!r}")


_DELAYS = {
    "const": ConstantDelay,
    "unif": UniformDelay,
    "exp": ExponentialDelay,
    "power": PowerTailDelay,
    "gauss": GaussianTailDelay,
}


def parse_delay(spec: str):
    """``zero``, ``const:<ell>``, ``unif:<ell>``, ``exp:<g>``, ``power:<g>`` or ``gauss:<g>``."""
    name, *parts = spec.strip().split(":")
    if name == "zero" and not parts:
        return ZeroDelay()
    if name in _DELAYS:
        return _DELAYS[name](*_numbers(spec, parts, 1))
    raise ConfigError(f"unknown delay distribution {spec!r}")


def parse_grid(text: str) -> tuple[float, ...]:
    """Comma-separated values; ``a:b:step`` expands to an inclusive range."""
    values: list[float] = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        try:
            if ":" in item:
                a, b, step = (float(v) for v in item.split(":"))
                if step <= 0:
                    raise ConfigError(f"range step must be positive in {item!r}")
                n = int(math.floor((b - a) / step + 1e-9))
                values.extend(round(a + i * step, 12) for i in range(n + 1))
            else:
                values.append(float(item))
        except ValueError:
            raise ConfigError(f"malformed grid entry {item!r}") from None
    if any(v < 0 or not math.isfinite(v) for v in values):
        raise ConfigError(f"grid values must be finite and nonnegative: {text!r}")
    return tuple(values)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    command: str = ""
    rho: float | None = None
    lam: float | None = None
    profit: str | None = None
    delay: str = "zero"
    x: tuple[float, ...] = ()
    t: tuple[float, ...] = (0.0,)
    theta: tuple[float, ...] = ()
    times: tuple[float, ...] = ()
    epsilon: float | None = None
    quantity: str = "auto"
    n_paths: int = 100_000
    seed: int = 0
    horizon: float | None = None
    workers: int | None = None
    digits: int = 6
    format: str = "csv"
    raw: bool = False
    out: str | None = None

    # keys left out of CSV provenance headers: they never change the numbers
    NON_NUMERIC = ("workers", "out", "format")

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.n_paths < 1:
            raise ConfigError("n_paths must be at least 1")
        if self.digits < 1:
            raise ConfigError("digits must be at least 1")
        if self.format not in ("csv", "tsv"):
            raise ConfigError("format must be csv or tsv")
        if self.quantity not in ("auto", "probability", "mean"):
            raise ConfigError("quantity must be auto, probability or mean")
        if self.workers is not None and self.workers < 1:
            raise ConfigError("workers must be at least 1")
        return self

    def to_text(self, skip: tuple[str, ...] = ()) -> str:
        lines = []
        for f in dataclasses.fields(self):
            if f.name in skip:
                continue
            value = getattr(self, f.name)
            if value is None or (value == () and f.default == ()):
                continue
            if isinstance(value, tuple):
                text = ",".join(repr(v) for v in value)
            elif isinstance(value, bool):
                text = "true" if value else "false"
            else:
                text = repr(value) if isinstance(value, float) else str(value)
            lines.append(f"{_KEY_ALIASES.get(f.name, f.name)}={text}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, base: "RunConfig | None" = None) -> "RunConfig":
        cfg = dataclasses.replace(base) if base is not None else cls()
        for number, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"config line {number}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            cfg.set(key, value)
        return cfg

    @classmethod
    def from_header(cls, csv_text: str) -> "RunConfig":
        """Rebuild the config embedded in the ``# key=value`` lines of a ``simulate`` CSV."""
        lines = []
        for line in csv_text.splitlines():
            if not line.startswith("# "):
                break
            lines.append(line[2:])
        return cls.from_text("\n".join(lines))

    def set(self, key: str, value: str):
        name = _FIELD_NAMES.get(key)
        if name is None:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(self, name, _convert(name, value))


_KEY_ALIASES = {"lam": "lambda"}
_FIELD_NAMES = {_KEY_ALIASES.get(f.name, f.name): f.name for f in dataclasses.fields(RunConfig)}
_FLOATS = {"rho", "lam", "epsilon", "horizon"}
_INTS = {"n_paths", "seed", "workers", "digits"}
_GRIDS = {"x", "t", "theta", "times"}


def _convert(name: str, value: str):
    try:
        if name in _FLOATS:
            return float(value)
        if name in _INTS:
            return int(value)
        if name in _GRIDS:
            return parse_grid(value)
        if name == "raw":
            if value.lower() not in ("true", "false"):
                raise ValueError
            return value.lower() == "true"
    except ValueError:
        raise ConfigError(f"bad value {value!r} for {name}") from None
    return value


def _default_seed() -> int:
    text = os.environ.get(SEED_ENV)
    if text is None or text == "":
        return 0
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ruinlab", description="Ruin analytics for the dual risk model with delayed profits.")
    p.add_argument("command", help="one of: " + ", ".join(COMMANDS))
    p.add_argument("--config", help="key=value file; flags override it")
    p.add_argument("--rho", help="expense rate")
    p.add_argument("--lambda", dest="lambda_", help="innovation arrival rate")
    p.add_argument("--profit", help="exp:<nu> | erlang:<k>:<nu> | det:<y0>")
    p.add_argument("--delay", help="zero | const:<ell> | unif:<ell> | exp:<g> | power:<g> | gauss:<g>")
    p.add_argument("--x", help="surplus grid, e.g. 0.5,1.5 or 0.5:4.5:1")
    p.add_argument("--t", help="present-time grid")
    p.add_argument("--theta", help="Laplace arguments")
    p.add_argument("--times", help="ruin times at which to evaluate densities")
    p.add_argument("--epsilon", help="truncation level for unbounded delays (exact)")
    p.add_argument("--quantity", help="simulate: auto | probability | mean")
    p.add_argument("--n-paths", dest="n_paths")
    p.add_argument("--seed", help=f"default from ${SEED_ENV}, else 0")
    p.add_argument("--horizon", help="simulation horizon (absolute time)")
    p.add_argument("--workers", help="simulation threads (results do not depend on it)")
    p.add_argument("--digits", help="significant digits (default 6)")
    p.add_argument("--format", help="csv | tsv")
    p.add_argument("--raw", action="store_true", default=None, help="table1/table2: skip rounding")
    p.add_argument("--out", help="output file (default stdout)")
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(seed=_default_seed())
    if ns.config:
        try:
            with open(ns.config, encoding="utf-8") as fh:
                cfg = RunConfig.from_text(fh.read(), cfg)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    cfg.command = ns.command
    for key, value in vars(ns).items():
        if key in ("command", "config") or value is None:
            continue
        if key == "raw":
            cfg.raw = bool(value)
            continue
        cfg.set("lambda" if key == "lambda_" else key, value)
    return cfg.validate()


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def format_number(value, digits: int) -> str:
    if value is None:
        return "NA"
    if isinstance(value, str):
        return value
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return str(value)
    v = float(value)
    if math.isnan(v):
        return "NA"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    text = f"{v:.{digits}g}"
    if text.lstrip("-").isdigit():
        text += ".0"
    return text


def round_half_even(value: float, places: int = 3) -> str:
    return str(Decimal(repr(value)).quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_EVEN))


class Table:
    def __init__(self, header: list[str]):
        self.header = header
        self.rows: list[list] = []
        self.comments: list[str] = []

    def add(self, *row):
        self.rows.append(list(row))

    def render(self, cfg: RunConfig, formatter=None) -> str:
        fmt = formatter or (lambda v: format_number(v, cfg.digits))
        buf = io.StringIO()
        for line in self.comments:
            buf.write(f"# {line}\n")
        writer = csv.writer(buf, delimiter="\t" if cfg.format == "tsv" else ",", lineterminator="\n")
        writer.writerow(self.header)
        for row in self.rows:
            writer.writerow([fmt(v) for v in row])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _model(cfg: RunConfig) -> CheckedModel:
    missing = [k for k in ("rho", "lam", "profit") if getattr(cfg, k) is None]
    if missing:
        raise ConfigError("missing model settings: " + ", ".join(_KEY_ALIASES.get(k, k) for k in missing))
    return make_model(cfg.rho, cfg.lam, parse_profit(cfg.profit), parse_delay(cfg.delay))


def _grid(cfg: RunConfig, *names: str):
    for name in names:
        if not getattr(cfg, name):
            raise ConfigError(f"--{name} grid is required for {cfg.command}")
    return [getattr(cfg, n) for n in names]


def _points(cfg: RunConfig):
    xs, ts = _grid(cfg, "x", "t")
    return [QueryPoint(x, t) for t in ts for x in xs]


def cmd_alpha(cfg):
    model = _model(cfg)
    table = Table(["alpha"])
    table.add(solve_alpha(model.params, model.profit).value)
    return table


def cmd_beta(cfg):
    model = _model(cfg)
    (thetas,) = _grid(cfg, "theta")
    table = Table(["theta", "beta"])
    for theta in thetas:
        table.add(theta, solve_beta(model.params, model.profit, theta).value)
    return table


def cmd_bounds(cfg):
    model = _model(cfg)
    table = Table(["x", "t", "lower", "upper", "asymptotic"])
    for q in _points(cfg):
        b = analytics.ruin_prob_bounds(q, model)
        table.add(q.x, q.t, b.lower, b.upper, b.asymptotic)
    return table


def cmd_laplace(cfg):
    model = _model(cfg)
    (thetas,) = _grid(cfg, "theta")
    table = Table(["x", "t", "theta", "lower", "upper", "asymptotic"])
    for q in _points(cfg):
        for theta in thetas:
            b = analytics.ruin_laplace_asymptotic(q, theta, model)
            table.add(q.x, q.t, theta, b.lower, b.upper, b.asymptotic)
    return table


def _law(q: QueryPoint, model: CheckedModel):
    """Closed-form law where one exists, else the large-surplus asymptotic."""
    ell = model.delay.support_bound()
    if isinstance(model.delay, ConstantDelay):
        return "exact", exact.ruin_density_constant_delay(q, model)
    if ell is not None and ell > 0.0:
        region = exact.classify_region(q.x, q.t, ell, model.rho)
        if region is exact.RegionTag.PRE_DELAY_HIGH:
            return "exact", exact.ruin_density_bounded_delay(q, model)
        if region is exact.RegionTag.POST_DELAY:
            return "exact", analytics.first_passage_law(q.x, q.t, model)
        raise RegionError("no closed form")
    return "asymptotic", analytics.ruin_time_law_asymptotic(q, model)


def cmd_density(cfg):
    model = _model(cfg)
    (times,) = _grid(cfg, "times")
    table = Table(["x", "t", "T", "density", "atom_location", "atom_mass", "method"])
    for q in _points(cfg):
        try:
            method, law = _law(q, model)
        except RegionError:
            for T in times:
                table.add(q.x, q.t, T, None, None, None, "NA")
            continue
        for T in times:
            table.add(q.x, q.t, T, law.density(T), law.atom_location, law.atom_mass, method)
    return table


def cmd_mean_ruin(cfg):
    model = _model(cfg)
    table = Table(["x", "t", "lower", "upper"])
    for q in _points(cfg):
        b = analytics.mean_ruin_time_bounds(q, model)
        table.add(q.x, q.t, b.lower, b.upper)
    return table


def cmd_exact(cfg):
    model = _model(cfg)
    ell = model.delay.support_bound()
    if ell is None:
        if cfg.epsilon is None:
            raise DomainError(f"delay {model.delay.token()} is unbounded; pass --epsilon for truncation bounds")
        table = Table(["x", "t", "ell", "lower", "upper"])
        for q in _points(cfg):
            try:
                b = exact.ruin_prob_epsilon_bounds(q, cfg.epsilon, model)
                table.add(q.x, q.t, b.ell, b.lower, b.upper)
            except RegionError:
                table.add(q.x, q.t, None, None, None)
        return table
    table = Table(["x", "t", "region", "psi"])
    constant = isinstance(model.delay, ConstantDelay)
    for q in _points(cfg):
        region = exact.classify_region(q.x, q.t, ell, model.rho)
        if constant:
            table.add(q.x, q.t, region.value, exact.ruin_prob_constant_delay(q, model))
        elif region is exact.RegionTag.PRE_DELAY_LOW:
            # no closed form here; simulate covers it
            table.add(q.x, q.t, region.value, None)
        else:
            table.add(q.x, q.t, region.value, exact.ruin_prob_bounded_delay(q, model))
    return table


def cmd_simulate(cfg):
    model = _model(cfg)
    quantity = cfg.quantity
    if quantity == "auto":
        quantity = "probability" if model.net_margin > 0 else "mean"
    table = Table(["x", "t", "quantity", "point", "std_error", "lower", "upper", "n_paths", "seed", "n_flagged"])
    table.comments = cfg.to_text(skip=RunConfig.NON_NUMERIC).splitlines()
    for q in _points(cfg):
        if quantity == "probability":
            est = simulate.estimate_ruin_probability(q, model, cfg.n_paths, cfg.horizon, cfg.seed, cfg.workers)
        else:
            est = simulate.estimate_ruin_time_mean(q, model, cfg.n_paths, cfg.horizon, cfg.seed, cfg.workers)
        table.add(q.x, q.t, quantity, est.point, est.std_error, est.lower, est.upper, est.n_paths, est.seed, est.n_flagged)
    return table


def _wide_table(cfg, spec, value):
    model = make_model(spec["rho"], spec["lam"], parse_profit(spec["profit"]), parse_delay(spec["delay"]))
    table = Table(["t"] + [f"x={format_number(x, cfg.digits)}" for x in spec["x"]])
    for t in spec["t"]:
        table.add(format_number(t, cfg.digits), *(value(QueryPoint(x, t), model) for x in spec["x"]))
    return table


def _table_formatter(cfg):
    if cfg.raw:
        return None

    def fmt(v):
        if v is None or isinstance(v, str):
            return format_number(v, cfg.digits)
        return round_half_even(v, 3)

    return fmt


def table1_values(cfg=None) -> Table:
    return _wide_table(cfg or RunConfig(command="table1"), TABLE1, exact.ruin_prob_constant_delay)


def table2_values(cfg=None) -> Table:
    def value(q, model):
        try:
            return exact.ruin_prob_bounded_delay(q, model)
        except RegionError:
            return None

    return _wide_table(cfg or RunConfig(command="table2"), TABLE2, value)


def emit_heatmap(cfg: RunConfig) -> Table:
    """``(x, t, psi)`` rows for a constant delay, ready for external plotting."""
    model = _model(cfg)
    if not isinstance(model.delay, ConstantDelay):
        raise DomainError(f"heatmap needs a constant delay, got {model.delay.token()}")
    table = Table(["x", "t", "psi"])
    for q in _points(cfg):
        table.add(q.x, q.t, exact.ruin_prob_constant_delay(q, model))
    return table


_DISPATCH = {
    "alpha": cmd_alpha,
    "beta": cmd_beta,
    "bounds": cmd_bounds,
    "laplace": cmd_laplace,
    "density": cmd_density,
    "mean-ruin": cmd_mean_ruin,
    "exact": cmd_exact,
    "simulate": cmd_simulate,
    "table1": table1_values,
    "table2": table2_values,
    "heatmap": emit_heatmap,
}


def execute(cfg: RunConfig) -> str:
    table = _DISPATCH[cfg.command](cfg)
    formatter = _table_formatter(cfg) if cfg.command in ("table1", "table2") else None
    return table.render(cfg, formatter)


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        cfg = config_from_args(ns)
        text = execute(cfg)
    except InvalidParameterError as exc:
        if isinstance(exc, ConfigError) and "unknown command" in str(exc):
            parser.print_usage(stderr)
        print(f"ruinlab: config error: {exc}", file=stderr)
        return 2
    except DomainError as exc:
        print(f"ruinlab: domain error: {exc}", file=stderr)
        return 3
    if cfg.out:
        try:
            with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"ruinlab: cannot write output: {exc}", file=stderr)
            return 2
    else:
        stdout.write(text)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
