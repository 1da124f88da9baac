import itertools
import math
import warnings

import numpy as np
import pytest

from distributed_rd.io import parse_problem
from distributed_rd.problem import two_bsc_problem, wyner_ziv_problem
from distributed_rd.solver import ConditionalDependenceWarning, SolverState, initial_state


@pytest.fixture(autouse=True)
def _quiet_dependence_warning():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConditionalDependenceWarning)
        yield


@pytest.fixture
def two_bsc():
    return two_bsc_problem(0.3, 0.3)


@pytest.fixture
def wz():
    return wyner_ziv_problem(0.3, 3)


@pytest.fixture(params=["wz_binary_p30", "two_bsc_p30", "dependent_pair"])
def bundled(request):
    return parse_problem(request.param)


def random_state(spec, seed):
    """A generic valid state: random encoders, random (not induced) marginals,
    random stochastic decoder."""
    rng = np.random.default_rng(seed)
    q = [rng.dirichlet(np.ones(nw), size=nx) for nx, nw in zip(spec.x_sizes, spec.aux_sizes)]
    Q = [rng.dirichlet(np.ones(nw), size=spec.y_size) for nw in spec.aux_sizes]
    shape = (*spec.aux_sizes, spec.y_size)
    dec = rng.dirichlet(np.ones(spec.t_hat_size), size=shape)  # (..., t_hat)
    dec = np.moveaxis(dec, -1, 0)
    return SolverState(q, Q, dec)


def identity_state(spec):
    """w_i = x_i encoders (|W_i| = |X_i|), induced marginals, Bayes decoder."""
    spec = spec.with_aux_sizes(spec.x_sizes)
    st = initial_state(spec, "uniform")
    st.q = [np.eye(n) for n in spec.x_sizes]
    from distributed_rd.solver import update_decoder, update_marginal

    st.Q = [update_marginal(spec, st, i) for i in range(spec.n_sources)]
    st.dec = update_decoder(spec, st)
    return spec, st


# ---------------------------------------------------------------------------
# nested-loop reference evaluations, written without the solver's einsums


def _configs(spec):
    m = spec.n_sources
    t_r = range(spec.t_size)
    x_r = [range(n) for n in spec.x_sizes]
    w_r = [range(n) for n in spec.aux_sizes]
    return itertools.product(t_r, itertools.product(*x_r), range(spec.y_size),
                             itertools.product(*w_r), range(spec.t_hat_size))


def brute_distortion(spec, st):
    p = spec.joint.probs
    d = spec.distortion
    total = 0.0
    for t, x, y, w, th in _configs(spec):
        prod = 1.0
        for i in range(spec.n_sources):
            prod *= st.q[i][x[i], w[i]]
        total += d[t, th] * p[(t, *x, y)] * st.dec[(th, *w, y)] * prod
    return total


def brute_lagrangian(spec, st, lam):
    """Rate sum over the full joint (y, x, w, t_hat) plus λ times distortion."""
    p = spec.joint.probs
    rate = 0.0
    for t, x, y, w, th in _configs(spec):
        pxy = p[(t, *x, y)]
        prod = 1.0
        for i in range(spec.n_sources):
            prod *= st.q[i][x[i], w[i]]
        weight = pxy * prod * st.dec[(th, *w, y)]
        if weight == 0:
            continue
        for i in range(spec.n_sources):
            rate += weight * math.log2(st.q[i][x[i], w[i]] / st.Q[i][y, w[i]])
    return rate + lam * brute_distortion(spec, st)


def brute_marginal_update(spec, st, m):
    """Full-joint weighted marginal of W_m given Y."""
    p = spec.joint.probs
    num = np.zeros((spec.y_size, spec.aux_sizes[m]))
    for t, x, y, w, th in _configs(spec):
        prod = 1.0
        for i in range(spec.n_sources):
            prod *= st.q[i][x[i], w[i]]
        num[y, w[m]] += p[(t, *x, y)] * prod * st.dec[(th, *w, y)]
    return num / num.sum(axis=1, keepdims=True)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
