"""Distributed Blahut-Arimoto solver.

The Lagrangian minimized is

    L = Σ_i μ_i Σ p(y, x_i) q_i(w_i|x_i) log2[q_i(w_i|x_i) / Q_i(w_i|y)]
        + λ Σ d(t, t_hat) p(t, x, y) q'(t_hat|w, y) Π_i q_i(w_i|x_i)

over encoders q_i (|X_i| x |W_i|), marginals Q_i (|Y| x |W_i|) and the
decoder q' (|T_hat| x |W_1| x ... x |W_M| x |Y|). The rate weights μ_i are 1
unless per-source multipliers are requested. Rates are in bits, so λ is in
bits per unit distortion.

Einsum axis labels: t_hat = 0, x_i = 1 + i, y = 1 + M, w_i = 2 + M + i.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numpy as np

from .problem import ProblemSpec

logger = logging.getLogger(__name__)

LOG_FLOOR = math.log(1e-300)
TIE_RTOL = 1e-13
SUPPORT_FLOOR = 1e-8


class ConditionalDependenceWarning(UserWarning):
    """Sources are not conditionally independent given Y; results bound the region."""


@dataclass
class SolverConfig:
    lam: float = 1.0
    inner_tol: float = 1e-9
    outer_tol: float = 1e-8
    max_inner_iters: int = 2000
    max_outer_cycles: int = 200
    restarts: int = 8
    rng_seed: int = 0
    init_mode: Literal["uniform", "random-dirichlet"] = "random-dirichlet"
    # symmetric Dirichlet concentration for random encoder rows
    init_concentration: float = 0.2
    # largest |Δ ln q| over encoder entries above SUPPORT_FLOOR for inner convergence
    entry_tol: float = 1e-6
    rate_weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.lam < 0 or not math.isfinite(self.lam):
            raise ValueError(f"lambda must be finite and >= 0, got {self.lam}")
        if self.inner_tol <= 0 or self.outer_tol <= 0 or self.entry_tol <= 0:
            raise ValueError("tolerances must be > 0")
        if min(self.max_inner_iters, self.max_outer_cycles, self.restarts) < 1:
            raise ValueError("iteration and restart counts must be >= 1")
        if self.init_concentration <= 0:
            raise ValueError("init_concentration must be > 0")
        if self.init_mode not in ("uniform", "random-dirichlet"):
            raise ValueError(f"unknown init_mode {self.init_mode!r}")
        if self.rate_weights is not None:
            self.rate_weights = tuple(float(w) for w in self.rate_weights)
            if any(w <= 0 for w in self.rate_weights):
                raise ValueError("rate weights must be > 0")

    def weights(self, n_sources: int) -> np.ndarray:
        if self.rate_weights is None:
            return np.ones(n_sources)
        if len(self.rate_weights) != n_sources:
            raise ValueError(f"{len(self.rate_weights)} rate weights for {n_sources} sources")
        return np.asarray(self.rate_weights, dtype=float)


@dataclass
class SolverState:
    q: list[np.ndarray]
    Q: list[np.ndarray]
    dec: np.ndarray
    lagrangian: float = float("nan")
    outer_iter: int = 0
    inner_iters: list[int] = field(default_factory=list)
    user: int = 0

    def copy(self) -> "SolverState":
        return SolverState(
            [a.copy() for a in self.q],
            [a.copy() for a in self.Q],
            self.dec.copy(),
            self.lagrangian,
            self.outer_iter,
            list(self.inner_iters),
            self.user,
        )


@dataclass
class SolveResult:
    state: SolverState
    rates: list[float]
    distortion: float
    lagrangian: float
    converged: bool
    restart_index_of_best: int
    lagrangian_trace: list[float]
    lam: float = 0.0
    restart_lagrangians: list[float] = field(default_factory=list)
    restart_traces: list[list[float]] = field(default_factory=list)
    restart_converged: list[bool] = field(default_factory=list)
    # False when the sources are not conditionally independent given Y
    region_exact: bool = True


# ---------------------------------------------------------------------------
# tensor plumbing


def _labels(m: int):
    x = [1 + i for i in range(m)]
    y = 1 + m
    w = [2 + m + i for i in range(m)]
    return x, y, w


def _joint_risk(spec: ProblemSpec, q: Sequence[np.ndarray]) -> np.ndarray:
    """J(t_hat, w, y) = Σ_{x, t} d(t, t_hat) p(t, x, y) Π_i q_i(w_i|x_i)."""
    m = spec.n_sources
    x, y, w = _labels(m)
    ops: list = [spec.risk_kernel, [0, *x, y]]
    for i in range(m):
        ops += [q[i], [x[i], w[i]]]
    return np.einsum(*ops, [0, *w, y])


def _distortion_profile(spec: ProblemSpec, state: SolverState, m: int) -> np.ndarray:
    """Expected distortion contributions with encoder m factored out, shape (|X_m|, |W_m|).

    Σ_{x_m, w_m} q_m(w_m|x_m) * profile(x_m, w_m) is the expected distortion.
    """
    n = spec.n_sources
    x, y, w = _labels(n)
    ops: list = [spec.risk_kernel, [0, *x, y], state.dec, [0, *w, y]]
    for i in range(n):
        if i != m:
            ops += [state.q[i], [x[i], w[i]]]
    return np.einsum(*ops, [x[m], w[m]])


def _rate_term(p_xy: np.ndarray, q: np.ndarray, Q: np.ndarray) -> float:
    """Σ p(x, y) q(w|x) log2[q(w|x) / Q(w|y)] with 0 log 0 = 0."""
    weight = p_xy[:, :, None] * q[:, None, :]  # (x, y, w)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_ratio = np.log2(q)[:, None, :] - np.log2(Q)[None, :, :]
        terms = np.where(weight > 0, weight * log_ratio, 0.0)
    return float(terms.sum())


def _induced_marginal(p_xy: np.ndarray, q: np.ndarray) -> np.ndarray:
    py = p_xy.sum(axis=0)
    mass = p_xy.T @ q  # (y, w)
    out = np.empty_like(mass)
    live = py > 0
    out[live] = mass[live] / mass[live].sum(axis=1, keepdims=True)
    out[~live] = 1.0 / q.shape[1]
    return out


def _encoder_from_profile(
    p_xy: np.ndarray, Q: np.ndarray, profile: np.ndarray, lam: float, weight: float = 1.0
) -> np.ndarray:
    px = p_xy.sum(axis=1)
    live = px > 0
    with np.errstate(divide="ignore"):
        logQ = np.maximum(np.log(Q), LOG_FLOOR)
    out = np.full((p_xy.shape[0], Q.shape[1]), 1.0 / Q.shape[1])
    if not live.any():
        return out
    p_y_given_x = p_xy[live] / px[live, None]
    expo = p_y_given_x @ logQ - (lam * math.log(2) / weight) * profile[live] / px[live, None]
    e = np.exp(expo - expo.max(axis=1, keepdims=True))
    out[live] = e / e.sum(axis=1, keepdims=True)
    return out


def _bayes_decoder(J: np.ndarray) -> np.ndarray:
    """All mass on the lowest-index minimizer of J over axis 0."""
    lo = J.min(axis=0, keepdims=True)
    scale = np.abs(J).max(axis=0, keepdims=True)
    ties = J <= lo + TIE_RTOL * scale
    choice = np.argmax(ties, axis=0)
    dec = np.zeros_like(J)
    np.put_along_axis(dec, choice[None], 1.0, axis=0)
    return dec


# ---------------------------------------------------------------------------
# public operations


def lagrangian(
    spec: ProblemSpec, state: SolverState, lam: float, rate_weights: Sequence[float] | None = None
) -> float:
    """Weighted rate sum plus λ times expected distortion."""
    mu = np.ones(spec.n_sources) if rate_weights is None else np.asarray(rate_weights, float)
    rate = sum(
        mu[i] * _rate_term(spec.source_y[i], state.q[i], state.Q[i]) for i in range(spec.n_sources)
    )
    return float(rate + lam * expected_distortion(spec, state))


def update_marginal(spec: ProblemSpec, state: SolverState, m: int) -> np.ndarray:
    """Minimizer of the Lagrangian over Q_m with everything else fixed.

    Weighting by the full joint p(x, y) Π_i q_i q' and summing out t_hat, w_{-m}
    and x_{-m} leaves p(x_m, y) q_m(w_m|x_m), so the result is the marginal of
    W_m given Y induced by the current encoder.
    """
    p_xy = spec.source_y[m]
    if np.any(p_xy.sum(axis=0) <= 0):
        logger.debug("source %d: zero-mass side-information symbol, uniform marginal row", m)
    return _induced_marginal(p_xy, state.q[m])


def update_encoder(
    spec: ProblemSpec, state: SolverState, m: int, lam: float, rate_weight: float = 1.0
) -> np.ndarray:
    """Minimizer of the Lagrangian over q_m with Q, q_{-m} and the decoder fixed.

    q_m(w|x) ∝ exp[Σ_y p(y|x) ln Q_m(w|y) - λ ln2 Δ(x, w) / (μ_m p(x))] where
    Δ is the distortion profile of encoder m. Rows with p(x) = 0 are uniform.
    """
    profile = _distortion_profile(spec, state, m)
    return _encoder_from_profile(spec.source_y[m], state.Q[m], profile, lam, rate_weight)


def update_decoder(spec: ProblemSpec, state: SolverState) -> np.ndarray:
    """Bayes decoder over (w, y); ties go to the lowest reconstruction index."""
    return _bayes_decoder(_joint_risk(spec, state.q))


def expected_distortion(spec: ProblemSpec, state: SolverState) -> float:
    J = _joint_risk(spec, state.q)
    return float(max(0.0, np.sum(J * state.dec)))


def rates(spec: ProblemSpec, state: SolverState) -> list[float]:
    """Per-source rates in bits; assumes each Q_i is the marginal induced by q_i."""
    out = []
    for i in range(spec.n_sources):
        r = _rate_term(spec.source_y[i], state.q[i], state.Q[i])
        if -1e-9 <= r < 0:
            r = 0.0
        out.append(r)
    return out


def initial_state(
    spec: ProblemSpec, mode: str = "uniform", rng=None, concentration: float = 0.2
) -> SolverState:
    """Fresh state: encoders per ``mode``, induced marginals, Bayes decoder.

    The exactly uniform encoder is a stationary point of every update (all W
    symbols look alike to the decoder), so "uniform" mode tilts it slightly
    toward w = x mod |W| to stay deterministic while breaking the symmetry.
    Random rows use a sparse Dirichlet by default: near-uniform rows are
    rarely informative enough for the Bayes decoder to look at w, and the
    iteration then collapses to the zero-rate encoder.
    """
    q = []
    for nx, nw in zip(spec.x_sizes, spec.aux_sizes):
        if mode == "uniform":
            tilt = 0.1
            enc = np.full((nx, nw), (1 - tilt) / nw)
            enc[np.arange(nx), np.arange(nx) % nw] += tilt
        elif mode == "random-dirichlet":
            rng = np.random.default_rng(rng)
            enc = rng.dirichlet(np.full(nw, concentration), size=nx)
        else:
            raise ValueError(f"unknown init mode {mode!r}")
        q.append(enc)
    Q = [_induced_marginal(spec.source_y[i], q[i]) for i in range(spec.n_sources)]
    shape = (spec.t_hat_size, *spec.aux_sizes, spec.y_size)
    state = SolverState(q, Q, np.zeros(shape), inner_iters=[0] * spec.n_sources)
    state.dec = update_decoder(spec, state)
    return state


def _log_step(old: np.ndarray, new: np.ndarray) -> float:
    """Largest |ln new - ln old| over entries that are not vanishing."""
    live = np.maximum(old, new) > SUPPORT_FLOOR
    if not live.any():
        return 0.0
    with np.errstate(divide="ignore"):
        return float(np.max(np.abs(np.log(new[live]) - np.log(old[live]))))


def _rel_change(old: float, new: float) -> float:
    diff = abs(old - new)
    # below ~1e-15 the difference is floating-point noise
    if diff <= 1e-15:
        return 0.0
    return diff / max(abs(new), 1e-12)


def run_from(
    spec: ProblemSpec, config: SolverConfig, state: SolverState
) -> tuple[SolverState, list[float], bool]:
    """Run the cyclic per-user schedule from ``state`` (modified in place)."""
    lam = config.lam
    mu = config.weights(spec.n_sources)
    n = spec.n_sources
    trace = [lagrangian(spec, state, lam, mu)]
    converged = False
    state.inner_iters = [0] * n
    for cycle in range(config.max_outer_cycles):
        state.outer_iter = cycle + 1
        cycle_start = trace[-1]
        capped = False
        for m in range(n):
            state.user = m
            p_xy = spec.source_y[m]
            profile = _distortion_profile(spec, state, m)
            fixed = sum(mu[i] * _rate_term(spec.source_y[i], state.q[i], state.Q[i]) for i in range(n) if i != m)

            def current() -> float:
                return float(
                    fixed
                    + mu[m] * _rate_term(p_xy, state.q[m], state.Q[m])
                    + lam * np.sum(state.q[m] * profile)
                )

            prev = trace[-1]
            for k in range(config.max_inner_iters):
                state.Q[m] = _induced_marginal(p_xy, state.q[m])
                trace.append(current())
                new_q = _encoder_from_profile(p_xy, state.Q[m], profile, lam, mu[m])
                step = _log_step(state.q[m], new_q)
                state.q[m] = new_q
                value = current()
                trace.append(value)
                state.inner_iters[m] += 1
                if _rel_change(prev, value) < config.inner_tol and step < config.entry_tol:
                    break
                prev = value
            else:
                capped = True
            state.dec = update_decoder(spec, state)
            trace.append(lagrangian(spec, state, lam, mu))
        if not capped and _rel_change(cycle_start, trace[-1]) < config.outer_tol:
            converged = True
            break
    for m in range(n):
        state.Q[m] = update_marginal(spec, state, m)
    state.lagrangian = lagrangian(spec, state, lam, mu)
    trace.append(state.lagrangian)
    return state, trace, converged


def solve(
    spec: ProblemSpec,
    config: SolverConfig,
    warm_start: SolverState | None = None,
    cold_restarts: int | None = None,
) -> SolveResult:
    """Best-of-restarts solve at ``config.lam``.

    With ``warm_start`` given, that state is run first and counts as one
    extra candidate alongside the cold starts (``config.restarts`` unless
    ``cold_restarts`` says otherwise; 0 is allowed only with a warm start).
    """
    holds, dev = spec.conditionally_independent
    if not holds:
        warnings.warn(
            f"{spec.name}: sources are not conditionally independent given Y "
            f"(max deviation {dev:.3g}); rates are an inner bound on the region",
            ConditionalDependenceWarning,
            stacklevel=2,
        )
    starts: list[SolverState] = []
    if warm_start is not None:
        starts.append(warm_start.copy())
    n_cold = config.restarts if cold_restarts is None else cold_restarts
    if config.init_mode == "uniform":
        n_cold = min(n_cold, 1)
    if n_cold < 1 and warm_start is None:
        raise ValueError("need at least one cold start without a warm start")
    for r in range(n_cold):
        starts.append(initial_state(spec, config.init_mode, config.rng_seed + r, config.init_concentration))

    finals, traces, flags = [], [], []
    for s in starts:
        st, tr, ok = run_from(spec, config, s)
        finals.append(st)
        traces.append(tr)
        flags.append(ok)
        if not ok:
            logger.info("%s: start did not converge at lambda=%g", spec.name, config.lam)
    values = [s.lagrangian for s in finals]
    best = int(np.argmin(values))
    state = finals[best]
    return SolveResult(
        state=state,
        rates=rates(spec, state),
        distortion=expected_distortion(spec, state),
        lagrangian=state.lagrangian,
        converged=flags[best],
        restart_index_of_best=best,
        lagrangian_trace=traces[best],
        lam=config.lam,
        restart_lagrangians=values,
        restart_traces=traces,
        restart_converged=flags,
        region_exact=holds,
    )


def with_lambda(config: SolverConfig, lam: float) -> SolverConfig:
    return replace(config, lam=float(lam))
