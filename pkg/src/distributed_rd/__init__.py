"""Rate-distortion regions for distributed indirect source coding with decoder
side information, computed by a distributed Blahut-Arimoto iteration."""

__version__ = "0.1.0"

from .probability import (  # noqa: E402
    JointPmf,
    binary_entropy,
    check_conditional_independence,
    conditional,
    conditional_mutual_information,
    marginal,
    mutual_information,
    validate_joint,
)
from .problem import ProblemSpec, two_bsc_problem, wyner_ziv_problem  # noqa: E402
from .solver import (  # noqa: E402
    SolveResult,
    SolverConfig,
    SolverState,
    expected_distortion,
    lagrangian,
    rates,
    solve,
    update_decoder,
    update_encoder,
    update_marginal,
)
from .region import (  # noqa: E402
    SweepPoint,
    marginal_information_rates,
    solve_for_distortion,
    subset_bounds,
    sweep,
)
from .oracles import brute_force_lagrangian_min, kkt_residual, wyner_ziv_binary  # noqa: E402
