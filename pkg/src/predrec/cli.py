"""Command-line interface.

Commands
--------
simulate     draw observations from one of the example mixtures
estimate     run predictive recursion on an observations file
ci           permutation ensemble, intervals and variances for functionals
coverage     Monte Carlo coverage of the permutation intervals
figure-data  long-format records for the density / CDF band plots

Every parameter can come from ``--config`` (a JSON object whose keys are
the flag names, with dashes or underscores); flags given on the command
line take precedence. Exit codes: 0 success, 2 input or configuration
error, 3 numerical failure. Errors are printed to stderr as one JSON
object.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DegeneratePredictive, DomainError, InvalidArgument
from .functionals import Functional
from .grid import GridDensity, cumulative_integral, make_grid
from .kernels import parse_kernel
from .permutation import (
    PermutationPlan,
    ensemble_variance,
    interval_bounds,
    permuted_densities,
    quantile_interval,
)
from .recursion import WeightSchedule, pr_run
from .simulation import (
    DEFAULT_REPS,
    ExampleModel,
    all_examples,
    derived_seed,
    run_coverage,
    sample_mixture,
    sampling_distribution,
    true_functional,
)

log = logging.getLogger("predrec")

DEFAULTS = {
    "grid_min": 0.0,
    "grid_max": 10.0,
    "grid_points": 1001,
    "gamma": 0.67,
    "perms": 200,
    "level": 0.95,
    "seed": 0,
    "kernel": None,
    "example": None,
    "n": None,
    "reps": DEFAULT_REPS,
    "at": None,
    "input": None,
    "output": None,
    "out_dir": ".",
    "functional": None,
    "workers": 1,
    "save_densities": False,
}
LIST_KEYS = ("example", "n", "at")


class UsageError(Exception):
    """Bad input or configuration (exit code 2)."""

    def __init__(self, message, **detail):
        super().__init__(message)
        self.detail = detail


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_meta(out_dir: Path, command: str, cfg: dict, extra=None) -> None:
    # the output location is left out so reruns elsewhere stay byte-identical
    recorded = {k: v for k, v in cfg.items() if k != "out_dir"}
    meta = {"command": command, "version": __version__, "config": recorded}
    if extra:
        meta.update(extra)
    with open(out_dir / "meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_observations(path) -> np.ndarray:
    """One number per line; ``#`` comment lines and blank lines are skipped."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}", path=str(path)) from None
    except UnicodeDecodeError:
        raise UsageError(f"{path} is not UTF-8 text", path=str(path)) from None
    values = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        try:
            v = float(s)
        except ValueError:
            raise UsageError(f"{path}:{lineno}: not a number: {s!r}",
                             path=str(path), line=lineno) from None
        if not np.isfinite(v):
            raise UsageError(f"{path}:{lineno}: non-finite value", path=str(path), line=lineno)
        values.append(v)
    if not values:
        raise UsageError(f"{path}: no observations", path=str(path))
    return np.array(values)


# --- configuration --------------------------------------------------------

def _add_shared(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--config", help="JSON file with parameters; flags override it")
    p.add_argument("--grid-min", type=float, default=S)
    p.add_argument("--grid-max", type=float, default=S)
    p.add_argument("--grid-points", type=int, default=S)
    p.add_argument("--gamma", type=float, default=S, help="weight exponent (default 0.67)")
    p.add_argument("--perms", type=int, default=S, help="number of permutations (default 200)")
    p.add_argument("--level", type=float, default=S, help="interval level (default 0.95)")
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--kernel", default=S, help="normal:S | t:DF:S | gamma:A:RATE")
    p.add_argument("--example", action="append", default=S, help="example id such as 3-3")
    p.add_argument("--n", type=int, action="append", default=S, help="sample size")
    p.add_argument("--reps", type=int, default=S, help="Monte Carlo replications")
    p.add_argument("--at", type=float, action="append", default=S, help="evaluation point")
    p.add_argument("--functional", default=S, choices=["cdf", "density", "mean"])
    p.add_argument("--input", default=S, help="observations file")
    p.add_argument("--output", default=S, help="output file (simulate)")
    p.add_argument("--out-dir", default=S)
    p.add_argument("--workers", type=int, default=S)
    p.add_argument("--save-densities", action="store_true", default=S)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="predrec", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("simulate", "draw observations from an example mixture"),
        ("estimate", "predictive recursion estimate of the mixing density"),
        ("ci", "permutation intervals for functionals"),
        ("coverage", "coverage of permutation intervals"),
        ("figure-data", "plot records for permutation bands"),
    ]:
        _add_shared(sub.add_parser(name, help=help_))
    return parser


def resolve_config(ns: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(ns, "config", None):
        try:
            with open(ns.config, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config {ns.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {ns.config}: {exc.msg}", line=exc.lineno) from None
        if not isinstance(loaded, dict):
            raise UsageError("config must be a JSON object")
        for key, val in loaded.items():
            k = key.replace("-", "_")
            if k not in DEFAULTS:
                raise UsageError(f"unknown config key {key!r}")
            if k in LIST_KEYS and val is not None and not isinstance(val, list):
                val = [val]
            cfg[k] = val
    for key, val in vars(ns).items():
        if key in DEFAULTS:
            cfg[key] = val
    return cfg


def _single(cfg, key, required=True):
    val = cfg[key]
    if val is None:
        if required:
            raise UsageError(f"--{key.replace('_', '-')} is required")
        return None
    if isinstance(val, list):
        if len(val) != 1:
            raise UsageError(f"--{key.replace('_', '-')} takes a single value here")
        return val[0]
    return val


def _grid(cfg):
    return make_grid("lebesgue", cfg["grid_min"], cfg["grid_max"], cfg["grid_points"])


def _kernel(cfg):
    if cfg["kernel"]:
        return parse_kernel(cfg["kernel"])
    label = _single(cfg, "example", required=False)
    if label is None:
        raise UsageError("need --kernel or --example")
    return ExampleModel.from_label(label).kernel


def _functionals(cfg, default="cdf"):
    kind = cfg["functional"] or default
    if kind == "mean":
        return [Functional.mean()]
    at = cfg["at"]
    if not at:
        raise UsageError(f"--at is required for functional {kind!r}")
    make = Functional.cdf_at if kind == "cdf" else Functional.density_at
    return [make(x) for x in at]


def _common(cfg):
    """Validate and build the objects every estimation command needs."""
    grid = _grid(cfg)
    return grid, GridDensity.uniform(grid), WeightSchedule(cfg["gamma"])


def _out_dir(cfg) -> Path:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- commands -------------------------------------------------------------

def cmd_simulate(cfg):
    model = ExampleModel.from_label(_single(cfg, "example"))
    n = _single(cfg, "n")
    rng = np.random.default_rng(cfg["seed"])
    y = sample_mixture(model, n, rng)
    path = Path(cfg["output"]) if cfg["output"] else _out_dir(cfg) / "observations.txt"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# example {model.label}, n={n}, seed={cfg['seed']}\n")
        for v in y:
            fh.write(repr(float(v)) + "\n")


def cmd_estimate(cfg):
    grid, p0, schedule = _common(cfg)
    kernel = _kernel(cfg)
    data = read_observations(_single(cfg, "input"))
    run = pr_run(data, p0, schedule, kernel)
    out = _out_dir(cfg)
    write_table(out / "density.csv", ["x", "quad_weight", "density"],
                zip(grid.points, grid.quad_weights, run.density.values))
    write_table(out / "predictive.csv", ["step", "y", "log_predictive"],
                zip(range(1, data.size + 1), data, run.log_predictive))
    write_meta(out, "estimate", cfg, {"n": int(data.size), "kernel": str(kernel),
                                      "log_likelihood": run.log_likelihood})


def cmd_ci(cfg):
    grid, p0, schedule = _common(cfg)
    kernel = _kernel(cfg)
    funcs = _functionals(cfg)
    data = read_observations(_single(cfg, "input"))
    plan = PermutationPlan(cfg["perms"], cfg["seed"])
    level = cfg["level"]
    if not 0 < level < 1:
        raise InvalidArgument("level must lie in (0, 1)")
    _, P = permuted_densities(data, p0, schedule, kernel, plan)
    values = np.stack([np.asarray(f.evaluate(grid, P), dtype=float) for f in funcs], axis=1)
    out = _out_dir(cfg)
    labels = [f.label for f in funcs]
    write_table(out / "ensemble.csv", ["replicate"] + labels,
                ([m] + list(row) for m, row in enumerate(values)))
    rows = []
    for t, f in enumerate(funcs):
        iv = quantile_interval(values[:, t], level)
        rows.append([f.label, iv.lower, iv.upper, iv.level, iv.point,
                     ensemble_variance(values[:, t]), values[0, t]])
    write_table(out / "intervals.csv",
                ["functional", "lower", "upper", "level", "point", "variance", "original_order"],
                rows)
    if cfg["save_densities"]:
        write_table(out / "densities.csv", ["replicate", "x", "value"],
                    ([m, x, v] for m in range(P.shape[0]) for x, v in zip(grid.points, P[m])))
    write_meta(out, "ci", cfg, {"n": int(data.size), "kernel": str(kernel)})


def _examples(cfg):
    labels = cfg["example"] or ["all"]
    if labels == ["all"]:
        return all_examples()
    return [ExampleModel.from_label(lab) for lab in labels]


def cmd_coverage(cfg):
    grid, _, schedule = _common(cfg)
    models = _examples(cfg)
    ns = cfg["n"] or [500, 1000]
    xs = cfg["at"] or [2.0, 5.0, 8.0]
    for x in xs:
        grid.index_of(x)
    plan = PermutationPlan(cfg["perms"], 0)
    rows = []
    for model in models:
        for n in ns:
            seed = derived_seed(cfg["seed"], model.kernel_id, model.mixing_id, n)
            rep = run_coverage(model, xs, n, cfg["reps"], plan, cfg["level"], seed,
                               grid=grid, schedule=schedule, workers=cfg["workers"])
            log.info("example %s n=%d: %.1fs", model.label, n, rep.wall_time)
            for c in rep.cells:
                rows.append([c.example, c.n, c.target, c.truth, c.reps, c.hits, c.failed,
                             c.coverage, c.mean_width])
    out = _out_dir(cfg)
    write_table(out / "coverage.csv",
                ["example", "n", "x", "truth", "reps", "hits", "failed", "coverage",
                 "mean_width"], rows)
    # wide layout: one row per example, columns n x x
    cov = {(r[0], r[1], r[2]): r[7] for r in rows}
    cols = [(n, f"{x:g}") for n in ns for x in xs]
    write_table(out / "table.csv", ["example"] + [f"n={n} x={x}" for n, x in cols],
                ([m.label] + [cov[(m.label, n, x)] for n, x in cols] for m in models))
    write_meta(out, "coverage", cfg)


def cmd_figure_data(cfg):
    grid, p0, schedule = _common(cfg)
    model = ExampleModel.from_label(_single(cfg, "example"))
    n = _single(cfg, "n", required=False) or 500
    kind = cfg["functional"] or "density"
    if kind == "mean":
        raise UsageError("figure-data supports --functional density or cdf")
    xs = cfg["at"] or [2.0, 5.0, 8.0]
    rng = np.random.default_rng(np.random.SeedSequence(cfg["seed"], spawn_key=(0,)))
    data = sample_mixture(model, n, rng)
    plan = PermutationPlan(cfg["perms"], derived_seed(cfg["seed"], 1))
    _, P = permuted_densities(data, p0, schedule, model.kernel, plan)
    if kind == "cdf":
        curves = cumulative_integral(grid, P)
        truth = model.mixing.cdf(grid.points)
        funcs = [Functional.cdf_at(x) for x in xs]
    else:
        curves = P
        truth = model.mixing.pdf(grid.points)
        funcs = [Functional.density_at(x) for x in xs]
    samp = sampling_distribution(model, funcs, n, cfg["reps"], derived_seed(cfg["seed"], 2),
                                 grid, schedule)
    lo, hi = interval_bounds(samp.T, cfg["level"])
    avg = curves.mean(axis=0)

    def records():
        for m in range(curves.shape[0]):
            for x, v in zip(grid.points, curves[m]):
                yield ["permutation", m, x, v]
        for x, v in zip(grid.points, avg):
            yield ["average", "", x, v]
        for x, v in zip(grid.points, truth):
            yield ["truth", "", x, v]
        for f, a, b in zip(funcs, lo, hi):
            yield ["sampling_lower", "", f.x0, a]
            yield ["sampling_upper", "", f.x0, b]

    out = _out_dir(cfg)
    write_table(out / "figure.csv", ["series", "replicate", "x", "value"], records())
    write_meta(out, "figure-data", cfg, {"example": model.label, "curve": kind,
                                         "true_values": [true_functional(model, f) for f in funcs]})


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "ci": cmd_ci,
    "coverage": cmd_coverage,
    "figure-data": cmd_figure_data,
}


def _fail(code, kind, message, **detail):
    print(json.dumps({"error": kind, "message": message, **detail}, sort_keys=True),
          file=sys.stderr)
    return code


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = resolve_config(ns)
        COMMANDS[ns.command](cfg)
    except UsageError as exc:
        return _fail(2, "usage", str(exc), **exc.detail)
    except (InvalidArgument, DomainError) as exc:
        return _fail(2, "invalid-argument", str(exc))
    except DegeneratePredictive as exc:
        detail = {k: v for k, v in (("step", exc.step), ("replicate", exc.replicate)) if v is not None}
        return _fail(3, "numerical", str(exc), **detail)
    return 0


if __name__ == "__main__":
    sys.exit(main())
