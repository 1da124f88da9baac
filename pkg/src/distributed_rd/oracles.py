"""Independent reference computations used to check the solver."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .probability import OutOfRange, binary_entropy
from .problem import ProblemSpec
from .solver import SolverState, _distortion_profile

WZ_GRID_STEP = 1e-4
KKT_SUPPORT = 1e-8
MAX_GRID = 10**7


class GridTooLarge(ValueError):
    pass


def _star(p: float, d: float) -> float:
    return p * (1 - d) + (1 - p) * d


def wz_g(p: float, d: float) -> float:
    """h(p * d) - h(d), the Wyner-Ziv rate without time sharing."""
    return binary_entropy(_star(p, d)) - binary_entropy(d)


def _lower_hull(xs: np.ndarray, ys: np.ndarray) -> list[int]:
    hull: list[int] = []
    for i in range(len(xs)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (ys[b] - ys[a]) * (xs[i] - xs[a])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


@dataclass(frozen=True)
class WZCurve:
    """Lower convex envelope of h(p * D) - h(D) together with the point (p, 0)."""

    p: float
    D: np.ndarray
    R: np.ndarray
    # hull vertex indices into the dense sample grid
    vertices: np.ndarray

    def __call__(self, d: float) -> float:
        if not 0.0 <= d <= self.p:
            raise OutOfRange(f"D must lie in [0, {self.p}], got {d}")
        xs, ys = self.D[self.vertices], self.R[self.vertices]
        k = int(np.searchsorted(xs, d, side="right")) - 1
        k = min(max(k, 0), len(xs) - 2)
        lo, hi = self.vertices[k], self.vertices[k + 1]
        if hi - lo == 1 and hi != len(self.D) - 1:
            # both ends are adjacent curve samples: the curve itself is on the envelope
            return max(0.0, wz_g(self.p, d))
        t = (d - xs[k]) / (xs[k + 1] - xs[k])
        return max(0.0, float(ys[k] + t * (ys[k + 1] - ys[k])))

    @property
    def critical_distortion(self) -> float:
        """Where the straight segment to (p, 0) leaves the curve."""
        return float(self.D[self.vertices[-2]])


@lru_cache(maxsize=32)
def wz_curve(p: float, step: float = WZ_GRID_STEP) -> WZCurve:
    if not 0.0 < p <= 0.5:
        raise OutOfRange(f"crossover must lie in (0, 1/2], got {p}")
    n = max(2, int(math.ceil(p / step)))
    ds = np.linspace(0.0, p, n + 1)
    rs = np.array([wz_g(p, d) for d in ds])
    rs[-1] = 0.0
    return WZCurve(p, ds, rs, np.array(_lower_hull(ds, rs)))


def wyner_ziv_binary(p: float, D: float) -> float:
    """Binary Wyner-Ziv rate-distortion function (bits) for a doubly symmetric source."""
    if not 0.0 < p <= 0.5:
        raise OutOfRange(f"crossover must lie in (0, 1/2], got {p}")
    if not 0.0 <= D <= p:
        raise OutOfRange(f"D must lie in [0, {p}], got {D}")
    return wz_curve(float(p))(float(D))


# ---------------------------------------------------------------------------
# brute force


def simplex_grid(k: int, resolution: float) -> np.ndarray:
    """All probability vectors of length k with entries on multiples of ``resolution``."""
    n = int(round(1.0 / resolution))
    if not math.isclose(n * resolution, 1.0, rel_tol=1e-9):
        raise ValueError(f"resolution {resolution} does not divide 1")
    pts = [c for c in itertools.product(range(n + 1), repeat=k - 1) if sum(c) <= n]
    return np.array([list(c) + [n - sum(c)] for c in pts], dtype=float) / n


@dataclass
class BruteForceResult:
    value: float
    channels: list[np.ndarray]
    evaluated: int


def _grid_lagrangian(spec: ProblemSpec, qs: list[np.ndarray], lam: float) -> np.ndarray:
    """Lagrangian with induced marginals and Bayes decoder for a batch of encoders.

    ``qs[i]`` has shape (B, |X_i|, |W_i|). Written directly over the batch; it
    shares no code with the solver updates.
    """
    m = spec.n_sources
    batch = qs[0].shape[0]
    total = np.zeros(batch)
    for i in range(m):
        pxy = spec.source_y[i]  # (x, y)
        joint = pxy[None, :, :, None] * qs[i][:, :, None, :]  # (B, x, y, w)
        pyw = joint.sum(axis=1, keepdims=True)
        py = pxy.sum(axis=0)[None, None, :, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = joint * py / (pxy[None, :, :, None] * pyw)
            terms = np.where(joint > 0, joint * np.log2(np.where(joint > 0, ratio, 1.0)), 0.0)
        total += terms.sum(axis=(1, 2, 3))
    # Bayes risk: Σ_{w,y} min_t_hat J(t_hat, w, y)
    G = spec.risk_kernel  # (t_hat, x_1..x_M, y)
    x_ax = [2 + i for i in range(m)]
    y_ax = 2 + m
    w_ax = [3 + m + i for i in range(m)]
    ops: list = [G, [1, *x_ax, y_ax]]
    for i in range(m):
        ops += [qs[i], [0, x_ax[i], w_ax[i]]]
    J = np.einsum(*ops, [0, 1, *w_ax, y_ax])
    risk = J.min(axis=1).reshape(batch, -1).sum(axis=1)
    return total + lam * risk


def brute_force_lagrangian_min(
    spec: ProblemSpec, lam: float, resolution: float = 0.02, chunk: int = 20000
) -> BruteForceResult:
    """Global minimum of the Lagrangian over a simplex grid of encoder channels."""
    row_grids = [simplex_grid(nw, resolution) for nw in spec.aux_sizes]
    per_source = [len(row_grids[i]) ** spec.x_sizes[i] for i in range(spec.n_sources)]
    total = int(np.prod([float(c) for c in per_source]))
    if total > MAX_GRID:
        raise GridTooLarge(f"{total} grid configurations exceed the limit of {MAX_GRID}")
    # per-source channel lists: every combination of grid rows
    channel_sets = []
    for i in range(spec.n_sources):
        g = row_grids[i]
        idx = np.array(list(itertools.product(range(len(g)), repeat=spec.x_sizes[i])))
        channel_sets.append(g[idx])  # (C_i, |X_i|, |W_i|)
    best_val, best_idx = math.inf, None
    all_idx = itertools.product(*[range(len(c)) for c in channel_sets])
    while True:
        block = list(itertools.islice(all_idx, chunk))
        if not block:
            break
        arr = np.array(block)
        qs = [channel_sets[i][arr[:, i]] for i in range(spec.n_sources)]
        vals = _grid_lagrangian(spec, qs, lam)
        j = int(np.argmin(vals))
        if vals[j] < best_val:
            best_val, best_idx = float(vals[j]), arr[j]
    channels = [channel_sets[i][best_idx[i]] for i in range(spec.n_sources)]
    return BruteForceResult(best_val, channels, total)


# ---------------------------------------------------------------------------
# KKT


def encoder_partials(spec: ProblemSpec, state: SolverState, m: int, lam: float) -> np.ndarray:
    """∂L/∂q_m(w|x) in nats-consistent units, shape (|X_m|, |W_m|).

    Σ_y p(x, y) (ln q(w|x) - ln Q(w|y) + 1) + λ ln2 Δ(x, w), i.e. the bits
    Lagrangian scaled by ln 2.
    """
    pxy = spec.source_y[m]
    q, Q = state.q[m], state.Q[m]
    px = pxy.sum(axis=1)
    with np.errstate(divide="ignore"):
        logq = np.log(q)
        logQ = np.log(Q)
    rate = px[:, None] * (logq + 1.0) - pxy @ logQ
    return rate + lam * math.log(2) * _distortion_profile(spec, state, m)


def kkt_residual(spec: ProblemSpec, state: SolverState, lam: float) -> float:
    """Largest violation of the encoder stationarity conditions.

    For each source and input symbol: the spread of the partials over the
    support {q > 1e-8}, plus how far any off-support partial (evaluated at the
    support threshold) falls below the on-support mean.
    """
    worst = 0.0
    for m in range(spec.n_sources):
        pxy = spec.source_y[m]
        px = pxy.sum(axis=1)
        with np.errstate(divide="ignore"):
            logQ = np.log(state.Q[m])
        other = -(pxy @ logQ) + lam * math.log(2) * _distortion_profile(spec, state, m)
        q = state.q[m]
        for x in range(q.shape[0]):
            if px[x] <= 0:
                continue
            active = q[x] > KKT_SUPPORT
            g_active = px[x] * (np.log(q[x, active]) + 1.0) + other[x, active]
            spread = float(g_active.max() - g_active.min())
            gamma = float(g_active.mean())
            viol = 0.0
            if (~active).any():
                g_zero = px[x] * (math.log(KKT_SUPPORT) + 1.0) + other[x, ~active]
                viol = float(np.max(np.maximum(gamma - g_zero, 0.0)))
            worst = max(worst, spread + viol)
    return worst
