"""Finite-alphabet probability machinery.

All information quantities are in bits. Tensors are dense numpy arrays; a
``JointPmf`` is an immutable, validated wrapper around one.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

NORMALIZATION_TOL = 1e-12


class ProbabilityError(ValueError):
    """Base class for invalid probability inputs."""


class NegativeProbability(ProbabilityError):
    pass


class NotNormalized(ProbabilityError):
    def __init__(self, deviation: float):
        self.deviation = deviation
        super().__init__(f"probabilities do not sum to 1 (deviation {deviation:.3g})")


class ShapeMismatch(ProbabilityError):
    pass


class EmptyAxisSet(ProbabilityError):
    pass


class AxesOverlap(ProbabilityError):
    pass


class OutOfRange(ProbabilityError):
    pass


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class JointPmf:
    """Dense joint PMF. For problem joints the axis order is (t, x_1, ..., x_M, y)."""

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _readonly(self.probs))
        validate_joint(self)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.probs.shape

    @property
    def ndim(self) -> int:
        return self.probs.ndim

    def __array__(self, dtype=None, copy=None):
        return self.probs if dtype is None else self.probs.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, JointPmf):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.probs, other.probs))

    __hash__ = None


def _probs(pmf) -> np.ndarray:
    return pmf.probs if isinstance(pmf, JointPmf) else np.asarray(pmf, dtype=float)


def validate_joint(pmf, n_sources: int | None = None, tol: float = NORMALIZATION_TOL) -> None:
    """Raise if ``pmf`` is not a valid joint PMF.

    With ``n_sources`` given, the tensor must have exactly ``n_sources + 2``
    axes (t, x_1..x_M, y).
    """
    p = _probs(pmf)
    if n_sources is not None and p.ndim != n_sources + 2:
        raise ShapeMismatch(f"expected {n_sources + 2} axes, got {p.ndim}")
    if p.size == 0:
        raise ShapeMismatch("empty probability tensor")
    if not np.all(np.isfinite(p)):
        raise ProbabilityError("probabilities must be finite")
    if np.any(p < 0):
        raise NegativeProbability(f"negative entry {p.min():.3g}")
    deviation = 1.0 - float(p.sum())
    if abs(deviation) > tol:
        raise NotNormalized(deviation)


def _axis_tuple(axes, ndim: int) -> tuple[int, ...]:
    if isinstance(axes, (int, np.integer)):
        axes = (axes,)
    axes = tuple(int(a) for a in axes)
    bad = [a for a in axes if not -ndim <= a < ndim]
    if bad:
        raise ShapeMismatch(f"axis {bad[0]} out of range for {ndim} axes")
    out = tuple(a % ndim for a in axes)
    if len(set(out)) != len(out):
        raise AxesOverlap(f"repeated axis in {axes}")
    return out


def marginal(pmf, keep_axes: Iterable[int] | int) -> JointPmf:
    """Sum out every axis not in ``keep_axes``; kept axes stay in ascending order."""
    p = _probs(pmf)
    keep = _axis_tuple(keep_axes, p.ndim)
    if not keep:
        raise EmptyAxisSet("keep_axes must be nonempty")
    drop = tuple(a for a in range(p.ndim) if a not in keep)
    return JointPmf(p.sum(axis=drop) if drop else p)


def _marginal_array(p: np.ndarray, keep: Sequence[int]) -> np.ndarray:
    """Marginal with axes left in place (size 1 for summed axes) for broadcasting."""
    drop = tuple(a for a in range(p.ndim) if a not in keep)
    return p.sum(axis=drop, keepdims=True) if drop else p


class ConditionalPmf(NamedTuple):
    """``probs`` has the given axes first, then the target axes, each group in
    ascending original order. ``degenerate`` marks zero-mass conditioning cells."""

    probs: np.ndarray
    degenerate: np.ndarray


def conditional(pmf, target_axes, given_axes) -> ConditionalPmf:
    """p(target | given). Zero-probability conditioning cells are filled uniformly and flagged."""
    p = _probs(pmf)
    target = _axis_tuple(target_axes, p.ndim)
    given = _axis_tuple(given_axes, p.ndim) if given_axes is not None else ()
    if set(target) & set(given):
        raise AxesOverlap(f"target {target} and given {given} overlap")
    if not target:
        raise EmptyAxisSet("target_axes must be nonempty")
    tg = tuple(sorted(given)) + tuple(sorted(target))
    drop = tuple(a for a in range(p.ndim) if a not in tg)
    joint = p.sum(axis=drop) if drop else p
    # reorder remaining axes to (given..., target...)
    remaining = sorted(tg)
    joint = np.transpose(joint, [remaining.index(a) for a in tg])
    ng = len(given)
    norm = joint.sum(axis=tuple(range(ng, joint.ndim)), keepdims=True)
    degenerate = norm <= 0.0
    n_target = int(np.prod(joint.shape[ng:]))
    with np.errstate(invalid="ignore", divide="ignore"):
        cond = np.where(degenerate, 1.0 / n_target, joint / np.where(degenerate, 1.0, norm))
    return ConditionalPmf(cond, degenerate.reshape(joint.shape[:ng]))


def _kl_terms(p: np.ndarray, num: Sequence[np.ndarray], den: Sequence[np.ndarray]) -> float:
    """Σ p log2(Π num / Π den) over the support of p (0 log 0 = 0).

    Factors are logged separately so products of tiny masses cannot underflow.
    """
    mask = p > 0
    logs = sum(np.log2(np.broadcast_to(f, p.shape)[mask]) for f in num)
    logs = logs - sum(np.log2(np.broadcast_to(f, p.shape)[mask]) for f in den)
    return float(np.sum(p[mask] * logs))


def entropy(pmf) -> float:
    p = _probs(pmf).ravel()
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def mutual_information(joint) -> float:
    """I(A;B) in bits for a 2-axis joint PMF."""
    p = _probs(joint)
    if p.ndim != 2:
        raise ShapeMismatch(f"mutual_information expects 2 axes, got {p.ndim}")
    validate_joint(p)
    pa = p.sum(axis=1, keepdims=True)
    pb = p.sum(axis=0, keepdims=True)
    return max(0.0, _kl_terms(p, [p], [pa, pb]))


def conditional_mutual_information(joint, a_axes, b_axes, c_axes=()) -> float:
    """I(A;B|C) in bits; axes not named in A, B or C are marginalized out."""
    p = _probs(joint)
    a = _axis_tuple(a_axes, p.ndim)
    b = _axis_tuple(b_axes, p.ndim)
    c = _axis_tuple(c_axes, p.ndim) if c_axes is not None else ()
    if set(a) & set(b) or set(a) & set(c) or set(b) & set(c):
        raise AxesOverlap(f"axis sets {a}, {b}, {c} must be disjoint")
    if not a or not b:
        raise EmptyAxisSet("A and B must be nonempty")
    abc = _marginal_array(p, a + b + c)
    ac = _marginal_array(p, a + c)
    bc = _marginal_array(p, b + c)
    pc = _marginal_array(p, c) if c else np.ones([1] * p.ndim)
    return max(0.0, _kl_terms(abc, [abc, pc], [ac, bc]))


def check_conditional_independence(pmf, tol: float = 1e-12) -> tuple[bool, float]:
    """Test p(x_1..x_M | y) = Π p(x_i | y) on a (t, x_1..x_M, y) joint.

    Returns ``(holds, max_deviation)``; conditioning values with p(y) = 0 are skipped.
    """
    p = _probs(pmf)
    m = p.ndim - 2
    pxy = p.sum(axis=0)  # (x_1..x_M, y)
    py = pxy.sum(axis=tuple(range(m)), keepdims=True)
    live = py > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        cond = np.where(live, pxy / np.where(live, py, 1.0), 0.0)
    product = np.ones_like(cond)
    for i in range(m):
        others = tuple(j for j in range(m) if j != i)
        product = product * (cond.sum(axis=others, keepdims=True) if others else cond)
    deviation = float(np.max(np.abs(cond - product) * live)) if m > 1 else 0.0
    return deviation <= tol, deviation


def binary_entropy(p: float) -> float:
    """h(p) in bits."""
    if not 0.0 <= p <= 1.0:
        raise OutOfRange(f"binary_entropy needs 0 <= p <= 1, got {p}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return float(-p * np.log2(p) - (1 - p) * np.log2(1 - p))
