"""Problem definition: joint source model, distortion measure, auxiliary alphabets."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Sequence

import numpy as np

from .probability import JointPmf, ProbabilityError, check_conditional_independence


class ValidationError(ValueError):
    """A problem definition is inconsistent."""


class DimensionMismatch(ValidationError):
    pass


def hamming(n: int) -> np.ndarray:
    return 1.0 - np.eye(n)


def hamming_sum(components: Sequence[int]) -> np.ndarray:
    """d(t, t_hat) = Σ_i 1[t_i != t_hat_i] with t indexed row-major over ``components``."""
    tuples = list(itertools.product(*[range(c) for c in components]))
    a = np.array(tuples)
    return (a[:, None, :] != a[None, :, :]).sum(axis=2).astype(float)


def validate_distortion(d: np.ndarray) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if d.ndim != 2:
        raise ValidationError(f"distortion matrix must be 2-D, got {d.ndim} axes")
    if not np.all(np.isfinite(d)):
        raise ValidationError("distortion entries must be finite")
    if np.any(d < 0):
        raise ValidationError(f"distortion entries must be >= 0 (min {d.min():.3g})")
    return d


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """A distributed indirect source coding problem.

    ``joint`` has axes (t, x_1, ..., x_M, y); ``distortion`` is |T| x |T_hat|;
    ``aux_sizes[i]`` is the size of encoder i's output alphabet W_i.
    """

    joint: JointPmf
    distortion: np.ndarray
    aux_sizes: tuple[int, ...] = ()
    name: str = "problem"
    solver: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        joint = self.joint if isinstance(self.joint, JointPmf) else JointPmf(self.joint)
        if joint.ndim < 3:
            raise DimensionMismatch("joint needs axes (t, x_1, ..., x_M, y) with M >= 1")
        d = validate_distortion(self.distortion).copy()
        d.setflags(write=False)
        if d.shape[0] != joint.shape[0]:
            raise DimensionMismatch(f"distortion has {d.shape[0]} rows but |T| = {joint.shape[0]}")
        m = joint.ndim - 2
        aux = tuple(int(a) for a in self.aux_sizes) if self.aux_sizes else tuple(
            s + 1 for s in joint.shape[1:-1]
        )
        if len(aux) != m:
            raise DimensionMismatch(f"{len(aux)} aux sizes given for {m} sources")
        if any(a < 1 for a in aux):
            raise ValidationError("aux alphabet sizes must be >= 1")
        object.__setattr__(self, "joint", joint)
        object.__setattr__(self, "distortion", d)
        object.__setattr__(self, "aux_sizes", aux)
        object.__setattr__(self, "solver", dict(self.solver))

    def with_aux_sizes(self, aux_sizes: Sequence[int]) -> "ProblemSpec":
        return ProblemSpec(self.joint, self.distortion, tuple(aux_sizes), self.name, self.solver)

    @property
    def n_sources(self) -> int:
        return self.joint.ndim - 2

    @property
    def t_size(self) -> int:
        return self.joint.shape[0]

    @property
    def t_hat_size(self) -> int:
        return self.distortion.shape[1]

    @property
    def x_sizes(self) -> tuple[int, ...]:
        return self.joint.shape[1:-1]

    @property
    def y_size(self) -> int:
        return self.joint.shape[-1]

    @cached_property
    def conditionally_independent(self) -> tuple[bool, float]:
        return check_conditional_independence(self.joint, tol=1e-12)

    # Derived tensors used by the solver. Cached; the spec is immutable.

    @cached_property
    def risk_kernel(self) -> np.ndarray:
        """G(t_hat, x_1..x_M, y) = Σ_t d(t, t_hat) p(t, x, y)."""
        return np.tensordot(self.distortion.T, self.joint.probs, axes=([1], [0]))

    @cached_property
    def p_xy(self) -> np.ndarray:
        """p(x_1..x_M, y)."""
        return self.joint.probs.sum(axis=0)

    @cached_property
    def source_y(self) -> list[np.ndarray]:
        """Per-source p(x_i, y) matrices, shape (|X_i|, |Y|)."""
        m = self.n_sources
        return [
            self.p_xy.sum(axis=tuple(j for j in range(m) if j != i)) if m > 1 else self.p_xy
            for i in range(m)
        ]

    @cached_property
    def p_y(self) -> np.ndarray:
        return self.source_y[0].sum(axis=0)


def factored_joint(
    p_y: Sequence[float],
    channels: Sequence[np.ndarray],
    t_given_xy: np.ndarray | None = None,
) -> np.ndarray:
    """Build p(t, x, y) = p(y) Π p(x_i | y) p(t | x, y).

    ``channels[i]`` has rows indexed by y: shape (|Y|, |X_i|).
    ``t_given_xy`` has shape (|X_1|, ..., |X_M|, |Y|, |T|); ``None`` means
    T = (X_1, ..., X_M) indexed row-major.
    """
    p_y = np.asarray(p_y, dtype=float)
    chans = [np.asarray(c, dtype=float) for c in channels]
    m = len(chans)
    for i, c in enumerate(chans):
        if c.ndim != 2 or c.shape[0] != p_y.size:
            raise DimensionMismatch(f"channel {i} must have shape (|Y|, |X_{i + 1}|)")
        if np.any(c < 0) or not np.allclose(c.sum(axis=1), 1.0, atol=1e-12, rtol=0):
            raise ValidationError(f"channel {i} rows must be probability vectors")
    x_sizes = [c.shape[1] for c in chans]
    pxy = p_y.reshape([1] * m + [-1])
    for i, c in enumerate(chans):
        shape = [1] * (m + 1)
        shape[i] = c.shape[1]
        shape[m] = c.shape[0]
        pxy = pxy * c.T.reshape(shape)
    if t_given_xy is None:
        n_t = int(np.prod(x_sizes))
        t_given_xy = np.zeros(x_sizes + [p_y.size, n_t])
        for flat, x in enumerate(itertools.product(*[range(s) for s in x_sizes])):
            t_given_xy[x + (slice(None), flat)] = 1.0
    t_given_xy = np.asarray(t_given_xy, dtype=float)
    if t_given_xy.shape[:-1] != tuple(x_sizes) + (p_y.size,):
        raise DimensionMismatch("t_given_xy must have shape (|X_1|..|X_M|, |Y|, |T|)")
    joint = pxy[..., None] * t_given_xy
    return np.moveaxis(joint, -1, 0)


def two_bsc_problem(p1: float = 0.3, p2: float = 0.3, aux_sizes=(3, 3)) -> ProblemSpec:
    """Uniform binary Y observed through two BSCs; T = (X_1, X_2), Hamming-sum distortion."""
    bsc = lambda p: np.array([[1 - p, p], [p, 1 - p]])  # noqa: E731
    joint = factored_joint([0.5, 0.5], [bsc(p1), bsc(p2)])
    return ProblemSpec(JointPmf(joint), hamming_sum([2, 2]), tuple(aux_sizes), name="two_bsc")


def wyner_ziv_problem(p: float = 0.3, aux_size: int = 3) -> ProblemSpec:
    """Binary doubly symmetric source, T = X, Hamming distortion (M = 1)."""
    joint = factored_joint([0.5, 0.5], [np.array([[1 - p, p], [p, 1 - p]])])
    return ProblemSpec(JointPmf(joint), hamming(2), (aux_size,), name="wz_binary")


__all__ = [
    "DimensionMismatch",
    "ProbabilityError",
    "ProblemSpec",
    "ValidationError",
    "factored_joint",
    "hamming",
    "hamming_sum",
    "two_bsc_problem",
    "validate_distortion",
    "wyner_ziv_problem",
]
