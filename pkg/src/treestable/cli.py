"""Batch experiment runner with file-based, reproducible outputs.

Each invocation runs one experiment and writes one artifact file (CSV or
JSON) whose header echoes the full configuration and the library version,
so any table can be traced back to the exact inputs that produced it.
Configuration comes from an optional flat ``key = value`` file; command
line flags override file values. Grids accept comma lists whose entries
may be ``start:stop:step`` ranges.

Exit codes: 0 success, 1 check failure, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass, fields, replace

from threadpoolctl import threadpool_limits

from . import __version__

__all__ = ["ExperimentConfig", "main", "run"]

_EXPERIMENTS = (
    "kernel-table",
    "envelope",
    "repartition",
    "exit-time",
    "poisson",
    "selftest",
)
_FORMATS = ("csv", "json")
_OUTPUT_DIR_VAR = "TREESTABLE_OUTPUT_DIR"


class ConfigError(ValueError):
    """Invalid configuration key or value; the message names the field."""


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    q: int = 2
    alpha: float = 1.0
    t: tuple = (0.5, 1.0, 2.0, 5.0)
    n: tuple = tuple(range(16))
    r: tuple = (2, 4)
    a1: float = 0.5
    a2: float = 2.0
    beta_exponent: float | None = None
    n_samples: int = 20000
    seed: int = 1
    truncation: int = 400
    output: str = ""
    format: str = "csv"
    threads: int = 0


_FIELD_NAMES = tuple(f.name for f in fields(ExperimentConfig))


def _parse_scalar(key: str, text: str, conv):
    try:
        return conv(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r}") from None


def parse_grid(key: str, text: str, integer: bool) -> tuple:
    """Parse a comma list whose entries may be start:stop:step ranges."""
    conv = int if integer else float
    values = []
    for token in str(text).split(","):
        token = token.strip()
        if not token:
            raise ConfigError(f"{key}: empty grid entry")
        if ":" in token:
            parts = token.split(":")
            if len(parts) != 3:
                raise ConfigError(f"{key}: ranges use start:stop:step")
            start, stop, step = (_parse_scalar(key, p, conv) for p in parts)
            if step <= 0:
                raise ConfigError(f"{key}: step must be positive")
            if stop < start:
                raise ConfigError(f"{key}: empty range {token!r}")
            if integer:
                values.extend(range(start, stop + 1, step))
            else:
                count = int((stop - start) / step + 1e-9)
                values.extend(start + i * step for i in range(count + 1))
        else:
            values.append(_parse_scalar(key, token, conv))
    return tuple(values)


def _coerce(key: str, raw: str):
    if key in ("q", "n_samples", "seed", "truncation", "threads"):
        return _parse_scalar(key, raw, int)
    if key in ("alpha", "a1", "a2"):
        return _parse_scalar(key, raw, float)
    if key == "beta_exponent":
        return None if raw.lower() in ("", "none") else _parse_scalar(key, raw, float)
    if key == "t":
        return parse_grid(key, raw, integer=False)
    if key in ("n", "r"):
        return parse_grid(key, raw, integer=True)
    return raw


def read_config_file(path: str) -> dict:
    """Flat key = value file; blank lines and # comments skipped."""
    mapping: dict = {}
    try:
        lines = open(path, encoding="utf-8").read().splitlines()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path!r} ({exc})") from None
    for number, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"config line {number}: expected key = value")
        key = key.strip().lower().replace("-", "_")
        if key != "experiment" and key not in _FIELD_NAMES:
            raise ConfigError(f"config line {number}: unknown key {key!r}")
        if key in mapping:
            raise ConfigError(f"config line {number}: duplicate key {key!r}")
        mapping[key] = value.strip()
    return mapping


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.experiment not in _EXPERIMENTS:
        raise ConfigError(f"experiment: unknown {cfg.experiment!r}")
    if cfg.q < 2:
        raise ConfigError("q: branching factor must be >= 2")
    if not 0.0 < cfg.alpha < 2.0:
        raise ConfigError("alpha: must lie in (0, 2)")
    if not cfg.t or any(t <= 0 for t in cfg.t):
        raise ConfigError("t: times must be positive")
    if not cfg.n or any(n < 0 for n in cfg.n):
        raise ConfigError("n: distances must be >= 0")
    if not cfg.r or any(r < 1 for r in cfg.r):
        raise ConfigError("r: radii must be >= 1")
    if cfg.a1 <= 0 or cfg.a2 <= cfg.a1:
        raise ConfigError("a1/a2: need 0 < A1 < A2")
    if cfg.beta_exponent is not None and cfg.beta_exponent <= 0:
        raise ConfigError("beta_exponent: must be positive")
    if cfg.n_samples < 1:
        raise ConfigError("n_samples: must be >= 1")
    if cfg.seed < 0:
        raise ConfigError("seed: must be >= 0")
    if not 50 <= cfg.truncation <= 4000:
        raise ConfigError("truncation: must lie in [50, 4000]")
    if cfg.threads < 0:
        raise ConfigError("threads: must be >= 0")
    if cfg.format not in _FORMATS:
        raise ConfigError(f"format: unknown {cfg.format!r}")


def _run_kernel_table(cfg: ExperimentConfig):
    from .stable import kernel_spectral, kernel_subordination
    from .subordinator import StableParams
    from .tree import TreeParams

    tree, st = TreeParams(cfg.q), StableParams(cfg.alpha)
    n_max = max(cfg.n)
    rows = []
    for t in cfg.t:
        sub = kernel_subordination(tree, st, t, n_max)
        spe = kernel_spectral(tree, st, t, n_max, size=cfg.truncation)
        for n in cfg.n:
            x, y = float(sub.values[n]), float(spe.values[n])
            ref = max(abs(x), abs(y))
            rows.append((cfg.alpha, t, n, x, y, abs(x - y) / ref if ref > 0 else 0.0))
    return ("alpha", "t", "n", "subordination", "spectral", "rel_diff"), rows, []


def _run_envelope(cfg: ExperimentConfig):
    from . import bessel, heat, stable
    from .subordinator import StableParams, check_density_envelopes
    from .tree import TreeParams

    bands = list(bessel.check_envelopes())
    bands += check_density_envelopes(StableParams(cfg.alpha))
    bands.append(heat.check_kernel_envelope(TreeParams(cfg.q)))
    bands += stable.check_kernel_envelopes(TreeParams(cfg.q), StableParams(cfg.alpha))
    rows = [
        (b.name, b.observed_min, b.observed_max, b.lower, b.upper,
         "pass" if b.passed else "fail")
        for b in bands
    ]
    failures = [b.name for b in bands if not b.passed]
    columns = ("check", "observed_min", "observed_max", "lower", "upper", "status")
    return columns, rows, failures


def _run_repartition(cfg: ExperimentConfig):
    from .stable import mass_repartition
    from .subordinator import StableParams
    from .tree import TreeParams

    tree, st = TreeParams(cfg.q), StableParams(cfg.alpha)
    rows = []
    for t in cfg.t:
        rep = mass_repartition(tree, st, t, cfg.a1, cfg.a2,
                               beta_exponent=cfg.beta_exponent)
        rows.append((t, rep.radius_lo, rep.radius_hi, rep.mass, rep.method,
                     rep.error_bound))
    columns = ("t", "radius_lo", "radius_hi", "mass", "method", "error_bound")
    return columns, rows, []


def _run_exit_time(cfg: ExperimentConfig):
    from .potential import radial_exit_times
    from .simulate import build_jump_law, sample_exits
    from .subordinator import StableParams
    from .tree import TreeParams

    tree, st = TreeParams(cfg.q), StableParams(cfg.alpha)
    law = build_jump_law(tree, st)
    rows, failures = [], []
    for i, r in enumerate(cfg.r):
        exact = float(radial_exit_times(tree, st, r)[0])
        sample = sample_exits(tree, law, r, cfg.n_samples, seed=cfg.seed + i)
        z = (sample.mean_time - exact) / sample.time_se
        rows.append((r, exact, sample.mean_time, sample.time_se, z))
        if abs(z) > 5.0:
            failures.append(f"exit-time consistency r={r}")
    return ("r", "exact", "mc_mean", "mc_se", "z_score"), rows, failures


def _run_poisson(cfg: ExperimentConfig):
    from .potential import check_poisson_bounds
    from .subordinator import StableParams
    from .tree import TreeParams

    tree, st = TreeParams(cfg.q), StableParams(cfg.alpha)
    rows, failures = [], []
    for r in cfg.r:
        band = check_poisson_bounds(tree, st, r)
        rows.append((r, band.observed_min, band.observed_max, band.lower,
                     band.upper, "pass" if band.passed else "fail"))
        if not band.passed:
            failures.append(f"poisson kernel ratio r={r}")
    columns = ("r", "observed_min", "observed_max", "lower", "upper", "status")
    return columns, rows, failures


def _run_selftest(cfg: ExperimentConfig):
    from math import expm1

    import numpy as np

    from .potential import exit_distribution, green_function, killed_generator
    from .stable import kernel_spectral, kernel_subordination
    from .subordinator import StableParams, density, laplace_transform_residual
    from .tree import TreeParams

    tree, st = TreeParams(cfg.q), StableParams(cfg.alpha)
    checks = []

    one = StableParams(1.0)
    worst = 0.0
    for t in (0.5, 1.0, 5.0):
        for u in np.geomspace(1e-2, 1e3, 25):
            auto = density(one, t, float(u))
            closed = density(one, t, float(u), method="closed_form")
            worst = max(worst, abs(expm1(auto.log_value - closed.log_value)))
    checks.append(("closed form density, alpha = 1", worst, 1e-6))

    worst = max(laplace_transform_residual(st, 1.0, lam) for lam in (0.3, 1.0, 4.0))
    checks.append(("laplace transform round trip", worst, 1e-6))

    worst = 0.0
    for t in cfg.t:
        sub = kernel_subordination(tree, st, float(t), 15)
        spe = kernel_spectral(tree, st, float(t), 15, size=cfg.truncation)
        worst = max(worst, float(np.max(np.abs(sub.values / spe.values - 1.0))))
    checks.append(("kernel dual route agreement", worst, 1e-6))

    kg = killed_generator(tree, st, min(cfg.r))
    law = exit_distribution(tree, st, kg, green_function(kg))
    checks.append(("exit law mass conservation", abs(law.total_mass() - 1.0), 1e-6))

    rows, failures = [], []
    for name, value, tol in checks:
        ok = value <= tol
        rows.append((name, value, tol, "pass" if ok else "fail"))
        if not ok:
            failures.append(name)
    return ("check", "worst", "tolerance", "status"), rows, failures


_BUILDERS = {
    "kernel-table": _run_kernel_table,
    "envelope": _run_envelope,
    "repartition": _run_repartition,
    "exit-time": _run_exit_time,
    "poisson": _run_poisson,
    "selftest": _run_selftest,
}


def _config_items(cfg: ExperimentConfig):
    for f in fields(ExperimentConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        elif value is None:
            value = "none"
        yield f.name, value


def _plain(value):
    return value.item() if hasattr(value, "item") else value


def _output_path(cfg: ExperimentConfig) -> str:
    name = cfg.output or f"{cfg.experiment}.{cfg.format}"
    if not os.path.isabs(name):
        name = os.path.join(os.environ.get(_OUTPUT_DIR_VAR, "."), name)
    parent = os.path.dirname(name)
    if parent:
        os.makedirs(parent, exist_ok=True)
    return name


def _write(path: str, cfg: ExperimentConfig, columns, rows) -> None:
    if cfg.format == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# version = {__version__}\n")
            for key, value in _config_items(cfg):
                fh.write(f"# {key} = {value}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            writer.writerows(rows)
    else:
        payload = {
            "version": __version__,
            "config": dict(_config_items(cfg)),
            "columns": list(columns),
            "rows": [list(row) for row in rows],
        }
        with open(path, "w", encoding="utf-8", newline="") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def run(cfg: ExperimentConfig) -> int:
    """Run one experiment; writes the artifact and returns the exit code."""
    _validate(cfg)
    builder = _BUILDERS[cfg.experiment]
    if cfg.threads > 0:
        with threadpool_limits(limits=cfg.threads):
            columns, rows, failures = builder(cfg)
    else:
        columns, rows, failures = builder(cfg)
    rows = [tuple(_plain(v) for v in row) for row in rows]
    path = _output_path(cfg)
    _write(path, cfg, columns, rows)
    if cfg.experiment == "selftest":
        width = max(len(r[0]) for r in rows)
        for name, value, tol, status in rows:
            print(f"{name:<{width}}  {value:.3e}  (tol {tol:.0e})  {status}")
    print(f"wrote {path}")
    for name in failures:
        print(f"check failed: {name}", file=sys.stderr)
    return 1 if failures else 0


def _build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="flat key = value configuration file")
    shared.add_argument("--q", type=int, help="tree branching factor")
    shared.add_argument("--alpha", type=float, help="stability index in (0, 2)")
    shared.add_argument("--t", help="time grid, e.g. 1,2,5 or 10:100:10")
    shared.add_argument("--n", help="distance grid (integers)")
    shared.add_argument("--nmax", type=int, help="shorthand for --n 0:NMAX:1")
    shared.add_argument("--r", help="radius grid (integers)")
    shared.add_argument("--A1", dest="a1", type=float, help="annulus inner scale")
    shared.add_argument("--A2", dest="a2", type=float, help="annulus outer scale")
    shared.add_argument("--beta-exponent", dest="beta_exponent", type=float,
                        help="override the annulus radius exponent 2/alpha")
    shared.add_argument("--n-samples", dest="n_samples", type=int,
                        help="Monte Carlo path count")
    shared.add_argument("--seed", type=int, help="random seed")
    shared.add_argument("--truncation", type=int,
                        help="spectral truncation size")
    shared.add_argument("--output", help="artifact path (default per experiment)")
    shared.add_argument("--format", choices=_FORMATS, help="csv or json")
    shared.add_argument("--threads", type=int,
                        help="cap BLAS worker threads (0 = library default)")
    parser = argparse.ArgumentParser(
        prog="treestable",
        description="Experiments for the stable jump process on a regular tree.",
    )
    # distinct dest: the subparser would otherwise reset an already-parsed
    # top-level --config to its own default
    parser.add_argument("--config", dest="config_before", metavar="CONFIG",
                        help="flat key = value configuration file")
    sub = parser.add_subparsers(dest="experiment")
    descriptions = {
        "kernel-table": "both kernel routes per (t, n) with relative differences",
        "envelope": "calibrated two-sided envelope checks across modules",
        "repartition": "annulus mass between A1 t**e and A2 t**e",
        "exit-time": "Monte Carlo vs exact mean exit times from balls",
        "poisson": "exit-position comparability against the frozen band",
        "selftest": "closed-form, dual-route, and mass-conservation checks",
    }
    for name in _EXPERIMENTS:
        sub.add_parser(name, parents=[shared], help=descriptions[name])
    return parser


def _assemble(args: argparse.Namespace) -> ExperimentConfig:
    config_path = getattr(args, "config", None) or getattr(args, "config_before", None)
    mapping = read_config_file(config_path) if config_path else {}
    experiment = getattr(args, "experiment", None) or mapping.get("experiment")
    if not experiment:
        raise ConfigError("experiment: give a subcommand or an experiment key")
    cfg = ExperimentConfig(experiment=experiment)
    for key, raw in mapping.items():
        if key != "experiment":
            cfg = replace(cfg, **{key: _coerce(key, raw)})
    if getattr(args, "nmax", None) is not None:
        if getattr(args, "n", None) is not None:
            raise ConfigError("n: give either --n or --nmax, not both")
        cfg = replace(cfg, n=tuple(range(args.nmax + 1)))
    for key in _FIELD_NAMES:
        if key == "experiment":
            continue
        value = getattr(args, key, None)
        if value is None:
            continue
        if key in ("t", "n", "r"):
            value = parse_grid(key, value, integer=key != "t")
        cfg = replace(cfg, **{key: value})
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return run(_assemble(args))
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
