"""Command-line interface.

    distributed-rd sweep    --problem two_bsc_p30 --seed 7 --output out/
    distributed-rd target-d --problem wz_binary_p30 --target-d 0.1
    distributed-rd bounds   --problem dependent_pair --lambda-grid 1,5
    distributed-rd contour  --problem two_bsc_p30 --output out/
    distributed-rd verify

Exit codes: 0 success, 1 usage error, 2 validation error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
import time
import warnings
from pathlib import Path
from typing import Sequence

import numpy as np

from .io import (
    ParseError,
    ResultBundle,
    bounds_to_dicts,
    emit_contour_grid,
    fmt,
    parse_problem,
    write_sweep_csv,
)
from .probability import ProbabilityError
from .problem import ProblemSpec, ValidationError
from .region import (
    SweepPoint,
    TargetOutOfRange,
    default_lambda_grid,
    solve_for_distortion,
    subset_bounds,
    sweep,
)
from .solver import ConditionalDependenceWarning, SolverConfig

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2, 3

CONTOUR_WEIGHTS = [(1.0, 2.0**k) for k in (-2, -1, -0.5, 0, 0.5, 1, 2)]

log = logging.getLogger("distributed_rd")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def parse_lambda_grid(text: str | None) -> list[float]:
    """``start:stop:count`` (geometric; a zero start adds λ = 0 plus a
    geometric run from 1e-2) or a comma-separated list."""
    if text is None:
        return default_lambda_grid()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"bad --lambda-grid {text!r}; expected start:stop:count")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1 or stop <= 0 or start < 0 or start > stop:
            raise UsageError(f"bad --lambda-grid {text!r}")
        if start == 0:
            return [0.0] + list(np.geomspace(min(1e-2, stop), stop, count - 1)) if count > 1 else [0.0]
        return list(np.geomspace(start, stop, count))
    try:
        grid = _float_list(text)
    except ValueError:
        raise UsageError(f"bad --lambda-grid {text!r}") from None
    if not grid or min(grid) < 0:
        raise UsageError("--lambda-grid needs nonnegative values")
    return grid


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--problem", required=True,
                        help="problem JSON file or bundled name (wz_binary_p30, two_bsc_p30, dependent_pair)")
    common.add_argument("--lambda-grid", help="start:stop:count or comma list")
    common.add_argument("--target-d", type=float)
    common.add_argument("--restarts", type=int)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, help="inner tolerance; the outer one is 10x")
    common.add_argument("--max-iters", type=int, help="inner iteration cap per user")
    common.add_argument("--aux-sizes", help="comma list of |W_i|")
    common.add_argument("--per-source-lambda", help="comma list of per-source rate weights (experimental)")
    common.add_argument("--output", default=".", help="output directory")
    common.add_argument("--emit", choices=("csv", "json", "both"), default="both")
    common.add_argument("--warm-start", choices=("on", "off"), default="on")
    common.add_argument("--states", action="store_true", help="store solution tensors in bundle.json")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="distributed-rd", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("sweep", parents=[common], help="trace R(D) by sweeping lambda")
    sub.add_parser("target-d", parents=[common], help="solve for one target distortion")
    sub.add_parser("bounds", parents=[common], help="inner/outer subset bounds along a sweep")
    c = sub.add_parser("contour", parents=[common], help="(R_1, R_2) -> D grid for two sources")
    c.add_argument("--bins", type=int, default=20)
    v = sub.add_parser("verify", help="run the oracle checks on the bundled problems")
    v.add_argument("-v", "--verbose", action="store_true")
    return p


def make_config(spec: ProblemSpec, args) -> SolverConfig:
    fields = {f.name for f in dataclasses.fields(SolverConfig)}
    overrides = {k: v for k, v in spec.solver.items() if k in fields}
    cfg = SolverConfig(**overrides)
    changes: dict = {"rng_seed": args.seed}
    if args.restarts is not None:
        changes["restarts"] = args.restarts
    if args.tol is not None:
        changes["inner_tol"] = args.tol
        changes["outer_tol"] = 10 * args.tol
    if args.max_iters is not None:
        changes["max_inner_iters"] = args.max_iters
    if args.per_source_lambda:
        changes["rate_weights"] = tuple(_float_list(args.per_source_lambda))
    try:
        cfg = dataclasses.replace(cfg, **changes)
        cfg.weights(spec.n_sources)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return cfg


def load(args) -> ProblemSpec:
    spec = parse_problem(args.problem)
    if args.aux_sizes:
        try:
            aux = [int(v) for v in args.aux_sizes.split(",")]
        except ValueError:
            raise UsageError(f"bad --aux-sizes {args.aux_sizes!r}") from None
        spec = spec.with_aux_sizes(aux)
    return spec


def _write_outputs(args, spec: ProblemSpec, cfg: SolverConfig, points: list[SweepPoint],
                   wall: float, bounds=None) -> ResultBundle:
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    bundle = ResultBundle(
        spec.name, points, _jsonable(dataclasses.asdict(cfg)), args.seed, wall,
        bounds=bounds or [], include_states=getattr(args, "states", False),
    )
    if args.emit in ("csv", "both"):
        write_sweep_csv(points, out / "sweep.csv", spec.n_sources)
    if args.emit in ("json", "both"):
        (out / "bundle.json").write_text(bundle.to_json())
    return bundle


def _jsonable(d: dict) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def _require_convergence(points: Sequence[SweepPoint]) -> int:
    if not any(p.converged for p in points):
        print("error: no lambda point converged", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _timed_sweep(spec, grid, cfg, warm):
    t0 = time.perf_counter()
    pts = sweep(spec, grid, cfg, warm_start=warm)
    return pts, time.perf_counter() - t0


def cmd_sweep(args) -> int:
    if args.target_d is not None:
        return cmd_target(args)
    spec = load(args)
    cfg = make_config(spec, args)
    pts, wall = _timed_sweep(spec, parse_lambda_grid(args.lambda_grid), cfg, args.warm_start == "on")
    _write_outputs(args, spec, cfg, pts, wall)
    for p in pts:
        log.info("lambda=%-10.4g D=%.6f R=%s%s", p.lam, p.distortion,
                 ", ".join(f"{r:.6f}" for r in p.rates), "" if p.converged else " (not converged)")
    return _require_convergence(pts)


def cmd_target(args) -> int:
    if args.target_d is None:
        raise UsageError("target-d needs --target-d")
    spec = load(args)
    cfg = make_config(spec, args)
    t0 = time.perf_counter()
    pt = solve_for_distortion(spec, args.target_d, cfg)
    _write_outputs(args, spec, cfg, [pt], time.perf_counter() - t0)
    print(f"target D={args.target_d}: lambda={pt.lam:.6g} D={pt.distortion:.6f} "
          f"R={', '.join(f'{r:.6f}' for r in pt.rates)}")
    return _require_convergence([pt])


def cmd_bounds(args) -> int:
    spec = load(args)
    cfg = make_config(spec, args)
    pts, wall = _timed_sweep(spec, parse_lambda_grid(args.lambda_grid), cfg, args.warm_start == "on")
    rows = []
    for p in pts:
        if p.state is None:
            continue
        rows += bounds_to_dicts(subset_bounds(spec, p.state), p.lam)
    _write_outputs(args, spec, cfg, pts, wall, bounds=rows)
    out = Path(args.output)
    with open(out / "bounds.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda", "subset", "inner", "outer", "sum_rate"])
        for r in rows:
            w.writerow([fmt(r["lambda"]), "+".join(str(i) for i in r["subset"]),
                        fmt(r["inner_value"]), fmt(r["outer_value"]), fmt(r["sum_rate"])])
    if not spec.conditionally_independent[0]:
        print("note: sources are not conditionally independent given Y; "
              "inner and outer bounds may differ", file=sys.stderr)
    return _require_convergence(pts)


def cmd_contour(args) -> int:
    spec = load(args)
    if spec.n_sources != 2:
        print(f"error: contour mode needs exactly 2 sources, {spec.name} has {spec.n_sources}",
              file=sys.stderr)
        return EXIT_VALIDATION
    cfg = make_config(spec, args)
    grid = parse_lambda_grid(args.lambda_grid)
    weight_sets = [cfg.rate_weights] if cfg.rate_weights else CONTOUR_WEIGHTS
    cloud, wall = [], 0.0
    for w in weight_sets:
        pts, t = _timed_sweep(spec, grid, dataclasses.replace(cfg, rate_weights=w),
                              args.warm_start == "on")
        cloud += pts
        wall += t
    bundle = _write_outputs(args, spec, cfg, cloud, wall)
    emit_contour_grid(bundle, Path(args.output) / "contour.csv", bins=args.bins)
    return _require_convergence(cloud)


def cmd_verify(args) -> int:
    from .verify import run_checks

    results = run_checks()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_NUMERICAL


COMMANDS = {"sweep": cmd_sweep, "target-d": cmd_target, "bounds": cmd_bounds,
            "contour": cmd_contour, "verify": cmd_verify}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    warnings.simplefilter("once", ConditionalDependenceWarning)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ParseError, ValidationError, ProbabilityError, TargetOutOfRange) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FloatingPointError, np.linalg.LinAlgError, OverflowError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
