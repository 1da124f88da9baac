"""Quick oracle checks on the bundled problems (the CLI ``verify`` command)."""
from __future__ import annotations

import warnings
from dataclasses import replace

import numpy as np

from .io import parse_problem
from .oracles import brute_force_lagrangian_min, kkt_residual, wyner_ziv_binary
from .probability import binary_entropy
from .region import subset_bounds
from .solver import ConditionalDependenceWarning, SolverConfig, solve


def run_checks(config: SolverConfig | None = None) -> list[tuple[str, bool, str]]:
    cfg = config or SolverConfig()
    wz = parse_problem("wz_binary_p30")
    two = parse_problem("two_bsc_p30")
    dep = parse_problem("dependent_pair")
    h = binary_entropy(0.3)
    out = []

    r = solve(two, replace(cfg, lam=0.0))
    out.append(("zero-rate corner", max(r.rates) <= 1e-6 and abs(r.distortion - 0.6) <= 1e-3,
                f"R={np.round(r.rates, 8).tolist()} D={r.distortion:.6f}"))

    r = solve(two, replace(cfg, lam=1e3))
    out.append(("lossless corner",
                r.distortion <= 1e-3 and all(abs(x - h) <= 0.02 for x in r.rates),
                f"R={np.round(r.rates, 6).tolist()} D={r.distortion:.2e}"))

    worst = 0.0
    for lam in (2.637, 3.79, 5.46):
        r = solve(wz, replace(cfg, lam=lam))
        if 0.01 <= r.distortion <= 0.29:
            worst = max(worst, abs(r.rates[0] - wyner_ziv_binary(0.3, r.distortion)))
    out.append(("Wyner-Ziv agreement", worst <= 0.01, f"max |R - R_WZ| = {worst:.2e}"))

    wz2 = wz.with_aux_sizes([2])
    r = solve(wz2, replace(cfg, lam=1.0))
    bf = brute_force_lagrangian_min(wz2, 1.0, 0.02)
    out.append(("brute-force grid", r.lagrangian <= bf.value + 1e-3,
                f"solver {r.lagrangian:.6f} vs grid {bf.value:.6f}"))

    kkt, descent = 0.0, 0.0
    for spec in (wz, two, dep):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConditionalDependenceWarning)
            r = solve(spec, replace(cfg, lam=3.0))
        if r.converged:
            kkt = max(kkt, kkt_residual(spec, r.state, 3.0))
        for tr in r.restart_traces:
            descent = max(descent, float(np.max(np.diff(tr), initial=0.0)))
    out.append(("KKT stationarity", kkt < 1e-5, f"max residual {kkt:.2e}"))
    out.append(("Lagrangian descent", descent <= 1e-10, f"max increase {descent:.2e}"))

    r = solve(two, replace(cfg, lam=3.0))
    rep = subset_bounds(two, r.state)
    out.append(("inner = outer bound", rep.max_gap() < 1e-6, f"max gap {rep.max_gap():.2e}"))
    return out
