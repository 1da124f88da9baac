"""Rate-distortion curves and region bounds built on the solver."""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .probability import conditional_mutual_information, mutual_information
from .problem import ProblemSpec
from .solver import SolveResult, SolverConfig, SolverState, rates, solve

logger = logging.getLogger(__name__)

DISTORTION_TOL = 1e-3
MAX_BISECTIONS = 40
MAX_SUBSET_SOURCES = 10
COLD_SEED_STRIDE = 7919


class TargetOutOfRange(ValueError):
    def __init__(self, target: float, d_min: float, d_max: float):
        self.target, self.d_min, self.d_max = target, d_min, d_max
        super().__init__(f"target distortion {target} outside feasible [{d_min:.6g}, {d_max:.6g}]")


class TooManySources(ValueError):
    pass


@dataclass
class SweepPoint:
    lam: float
    rates: list[float]
    distortion: float
    lagrangian: float
    converged: bool
    rate_weights: tuple[float, ...] | None = None
    state: SolverState | None = field(default=None, repr=False, compare=False)

    @classmethod
    def from_result(cls, res: SolveResult, rate_weights=None) -> "SweepPoint":
        return cls(res.lam, list(res.rates), res.distortion, res.lagrangian, res.converged,
                   rate_weights, res.state)


def default_lambda_grid(n: int = 24, lo: float = 1e-2, hi: float = 1e3) -> list[float]:
    return [0.0] + list(np.geomspace(lo, hi, n))


def sweep(
    spec: ProblemSpec,
    lambda_grid: Sequence[float],
    config: SolverConfig,
    warm_start: bool = True,
) -> list[SweepPoint]:
    """One best-of-restarts solve per λ, returned in ascending λ order.

    With warm starts, the first point uses the full restart budget and each
    later point runs from the previous solution plus a single cold restart.
    A second pass in descending λ then reruns every point from its upper
    neighbour's solution and keeps whichever Lagrangian is lower, so a good
    branch found at large λ is carried back down. Repeated λ values reuse
    the first solve.
    """
    grid = sorted(set(float(v) for v in lambda_grid))
    if not grid:
        raise ValueError("lambda grid is empty")
    if grid[0] < 0:
        raise ValueError("lambda values must be >= 0")
    weights = config.rate_weights
    results: list[SolveResult | None] = []
    prev: SolverState | None = None
    for k, lam in enumerate(grid):
        # distinct cold-start seeds per point; the first point keeps the configured seed
        cfg = replace(config, lam=lam, rng_seed=config.rng_seed + COLD_SEED_STRIDE * k)
        try:
            if warm_start and prev is not None:
                res = solve(spec, cfg, warm_start=prev, cold_restarts=1)
            else:
                res = solve(spec, cfg)
        except (ValueError, FloatingPointError) as exc:
            logger.warning("lambda=%g failed: %s", lam, exc)
            res = None
        results.append(res)
        if res is not None:
            prev = res.state
    if warm_start:
        for k in range(len(grid) - 2, -1, -1):
            upper = results[k + 1]
            if upper is None:
                continue
            res = solve(spec, replace(config, lam=grid[k]), warm_start=upper.state, cold_restarts=0)
            if results[k] is None or res.lagrangian < results[k].lagrangian - 1e-12:
                results[k] = res
    by_lam: dict[float, SweepPoint] = {}
    for lam, res in zip(grid, results):
        if res is None:
            pt = SweepPoint(lam, [math.nan] * spec.n_sources, math.nan, math.nan, False, weights)
        else:
            pt = SweepPoint.from_result(res, weights)
        if not pt.converged:
            logger.warning("%s: lambda=%g did not converge", spec.name, lam)
        by_lam[lam] = pt
    return [by_lam[float(v)] for v in sorted(float(v) for v in lambda_grid)]


def distortion_bounds(spec: ProblemSpec) -> tuple[float, float]:
    """(D_min, D_max): Bayes risk knowing (x, y) and knowing y alone.

    D_min is reachable only when every |W_i| >= |X_i|; D_max is the zero-rate
    distortion.
    """
    G = spec.risk_kernel  # (t_hat, x..., y)
    d_min = float(G.min(axis=0).sum())
    from_y = G.sum(axis=tuple(range(1, G.ndim - 1)))  # (t_hat, y)
    d_max = float(from_y.min(axis=0).sum())
    return d_min, d_max


def solve_for_distortion(
    spec: ProblemSpec,
    target_D: float,
    config: SolverConfig,
    bracket: Sequence[SweepPoint] | None = None,
    tol: float = DISTORTION_TOL,
) -> SweepPoint:
    """Bisect λ until the solved distortion is within ``tol`` of ``target_D``.

    Returns the closest point found. Distortion is non-increasing in λ but
    may jump across straight parts of the curve, so an exact hit is not
    always possible.
    """
    d_min, d_max = distortion_bounds(spec)
    if target_D < d_min - tol or target_D > d_max + tol:
        raise TargetOutOfRange(target_D, d_min, d_max)

    best: SweepPoint | None = None

    def run(lam: float) -> SweepPoint:
        nonlocal best
        pt = SweepPoint.from_result(solve(spec, replace(config, lam=lam)), config.rate_weights)
        if best is None or abs(pt.distortion - target_D) < abs(best.distortion - target_D):
            best = pt
        return pt

    lo, hi = 0.0, None
    if bracket:
        lo = max((p.lam for p in bracket if p.converged and p.distortion > target_D), default=0.0)
        hi = min(
            (p.lam for p in bracket if p.converged and p.distortion <= target_D and p.lam > lo),
            default=None,
        )
    pt = run(lo)
    if abs(pt.distortion - target_D) <= tol or pt.distortion <= target_D:
        return best
    if hi is None:
        hi = max(1.0, 2 * lo)
        while True:
            pt = run(hi)
            if abs(pt.distortion - target_D) <= tol:
                return best
            if pt.distortion < target_D or hi >= 1e6:
                break
            lo, hi = hi, hi * 4
    else:
        pt = run(hi)
        if abs(pt.distortion - target_D) <= tol:
            return best
    for _ in range(MAX_BISECTIONS):
        mid = hi / 2 if lo == 0 else math.sqrt(lo * hi)
        pt = run(mid)
        if abs(pt.distortion - target_D) <= tol:
            break
        if pt.distortion > target_D:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * hi:
            break
    return best


# ---------------------------------------------------------------------------
# region bounds


@dataclass(frozen=True)
class SubsetBound:
    subset: tuple[int, ...]
    inner_value: float
    outer_value: float
    sum_rate: float


@dataclass(frozen=True)
class SubsetBoundReport:
    bounds: list[SubsetBound]
    conditionally_independent: bool

    def __iter__(self):
        return iter(self.bounds)

    def max_gap(self) -> float:
        return max(abs(b.outer_value - b.inner_value) for b in self.bounds)


def source_aux_joint(spec: ProblemSpec, state: SolverState) -> np.ndarray:
    """p(x_1..x_M, w_1..w_M, y) under the product encoder channels."""
    m = spec.n_sources
    ops: list = [spec.p_xy, [*range(m), 2 * m]]
    for i in range(m):
        ops += [state.q[i], [i, m + i]]
    return np.einsum(*ops, list(range(2 * m + 1)))


def subset_bounds(spec: ProblemSpec, state: SolverState) -> SubsetBoundReport:
    """Inner and outer sum-rate bounds for every nonempty subset of sources.

    inner(A) = I(X_A; W_A | W_{A^c}, Y), outer(A) = Σ_{i∈A} I(X_i; W_i | Y).
    Sources are numbered from 1 in the reported subsets.
    """
    m = spec.n_sources
    if m > MAX_SUBSET_SOURCES:
        raise TooManySources(f"{m} sources; subset enumeration is limited to {MAX_SUBSET_SOURCES}")
    joint = source_aux_joint(spec, state)
    y = 2 * m
    single = [conditional_mutual_information(joint, [i], [m + i], [y]) for i in range(m)]
    r = rates(spec, state)
    out = []
    for size in range(1, m + 1):
        for A in itertools.combinations(range(m), size):
            comp = [j for j in range(m) if j not in A]
            inner = conditional_mutual_information(
                joint, list(A), [m + i for i in A], [m + j for j in comp] + [y]
            )
            out.append(SubsetBound(
                tuple(i + 1 for i in A), inner, sum(single[i] for i in A), sum(r[i] for i in A)
            ))
    return SubsetBoundReport(out, spec.conditionally_independent[0])


def marginal_information_rates(spec: ProblemSpec, state: SolverState) -> list[float]:
    """I(X_i; W_i) - I(W_i; Y) per source from the encoder-induced joint."""
    out = []
    for i in range(spec.n_sources):
        pxy = spec.source_y[i]
        q = state.q[i]
        p_xw = pxy.sum(axis=1)[:, None] * q
        p_wy = (pxy.T @ q).T
        out.append(mutual_information(p_xw) - mutual_information(p_wy))
    return out
