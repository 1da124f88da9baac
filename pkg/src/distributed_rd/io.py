"""Problem files, result serialization and contour grids.

Problem files are JSON documents::

    {
      "name": "two_bsc_p30",
      "alphabets": {"t": 4, "x": [2, 2], "y": 2, "t_hat": 4},
      "joint": {"form": "factored",
                "p_y": [0.5, 0.5],
                "channels": [[[0.7, 0.3], [0.3, 0.7]], [[0.7, 0.3], [0.3, 0.7]]],
                "t": "tuple"},
      "distortion": "hamming-sum",
      "aux_sizes": [3, 3],
      "solver": {"restarts": 8}
    }

``joint`` may instead be ``{"form": "dense", "probs": [...]}`` with the
probabilities flattened row-major over the axis order (t, x_1, ..., x_M, y).
In factored form ``channels[i][y]`` is the row p(x_i | y) and ``t`` is either
``"tuple"`` (T = (X_1, ..., X_M), row-major index) or an array of shape
(|X_1|, ..., |X_M|, |Y|, |T|) holding p(t | x, y). ``distortion`` is a
|T| x |T_hat| matrix or one of ``"hamming"`` / ``"hamming-sum"``; the latter
splits t row-major into the components listed under ``"t_components"``
(default: the source alphabet sizes).
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .probability import JointPmf, ProbabilityError
from .problem import (
    DimensionMismatch,
    ProblemSpec,
    ValidationError,
    factored_joint,
    hamming,
    hamming_sum,
)
from .region import SubsetBoundReport, SweepPoint
from .solver import SolverState

BUNDLED = ("wz_binary_p30", "two_bsc_p30", "dependent_pair")
MISSING = "NA"


class ParseError(ValueError):
    def __init__(self, source: str, field_name: str, message: str):
        self.source, self.field_name = source, field_name
        super().__init__(f"{source}: field '{field_name}': {message}")


def fmt(x: float) -> str:
    """17 significant digits: round-trips every double."""
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# problems


def bundled_problem_path(name: str) -> Path:
    return Path(str(resources.files("distributed_rd") / "problems" / f"{name}.json"))


def resolve_problem(ref: str | Path) -> Path:
    """A filesystem path, or the name of a bundled problem."""
    p = Path(ref)
    if p.exists():
        return p
    if str(ref) in BUNDLED:
        return bundled_problem_path(str(ref))
    raise FileNotFoundError(f"problem file not found: {ref}")


def _require(doc: dict, key: str, source: str):
    if key not in doc:
        raise ParseError(source, key, "missing")
    return doc[key]


def problem_from_dict(doc: dict[str, Any], source: str = "<dict>") -> ProblemSpec:
    alph = _require(doc, "alphabets", source)
    try:
        n_t = int(_require(alph, "t", source))
        x_sizes = [int(v) for v in _require(alph, "x", source)]
        n_y = int(_require(alph, "y", source))
        n_that = int(alph.get("t_hat", n_t))
    except (TypeError, ValueError) as exc:
        raise ParseError(source, "alphabets", str(exc)) from None
    shape = (n_t, *x_sizes, n_y)

    jdoc = _require(doc, "joint", source)
    form = jdoc.get("form")
    try:
        if form == "dense":
            probs = np.asarray(_require(jdoc, "probs", source), dtype=float)
            if probs.size != int(np.prod(shape)):
                raise DimensionMismatch(
                    f"dense joint has {probs.size} entries, alphabets imply {int(np.prod(shape))}"
                )
            probs = probs.reshape(shape)
        elif form == "factored":
            channels = [np.asarray(c, dtype=float) for c in _require(jdoc, "channels", source)]
            t_map = jdoc.get("t", "tuple")
            t_given = None if t_map == "tuple" else np.asarray(t_map, dtype=float)
            probs = factored_joint(_require(jdoc, "p_y", source), channels, t_given)
            if probs.shape != shape:
                raise DimensionMismatch(f"factored joint has shape {probs.shape}, alphabets imply {shape}")
        else:
            raise ParseError(source, "joint.form", f"expected 'dense' or 'factored', got {form!r}")
        joint = JointPmf(probs)
    except ProbabilityError as exc:
        raise ValidationError(f"{source}: joint: {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, (ParseError, ValidationError)):
            raise
        raise ParseError(source, "joint", str(exc)) from None

    dist = _require(doc, "distortion", source)
    if dist == "hamming":
        if n_that != n_t:
            raise DimensionMismatch("hamming distortion needs |T_hat| = |T|")
        d = hamming(n_t)
    elif dist == "hamming-sum":
        comps = [int(c) for c in doc.get("t_components", x_sizes)]
        if int(np.prod(comps)) != n_t or n_that != n_t:
            raise DimensionMismatch(f"t_components {comps} do not factor |T| = {n_t}")
        d = hamming_sum(comps)
    else:
        try:
            d = np.asarray(dist, dtype=float)
        except (TypeError, ValueError) as exc:
            raise ParseError(source, "distortion", str(exc)) from None
        if d.shape != (n_t, n_that):
            raise DimensionMismatch(f"distortion shape {d.shape} != ({n_t}, {n_that})")
    aux = doc.get("aux_sizes") or [s + 1 for s in x_sizes]
    return ProblemSpec(joint, d, tuple(int(a) for a in aux), str(doc.get("name", source)),
                       dict(doc.get("solver", {})))


def parse_problem(path: str | Path) -> ProblemSpec:
    p = resolve_problem(path)
    text = p.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(str(p), f"line {exc.lineno}", exc.msg) from None
    if not isinstance(doc, dict):
        raise ParseError(str(p), "<root>", "expected a JSON object")
    return problem_from_dict(doc, str(p))


def problem_to_dict(spec: ProblemSpec) -> dict[str, Any]:
    """Dense-form document; floats keep full precision through json."""
    return {
        "name": spec.name,
        "alphabets": {"t": spec.t_size, "x": list(spec.x_sizes), "y": spec.y_size,
                      "t_hat": spec.t_hat_size},
        "joint": {"form": "dense", "probs": [float(v) for v in spec.joint.probs.ravel()]},
        "distortion": spec.distortion.tolist(),
        "aux_sizes": list(spec.aux_sizes),
        "solver": dict(spec.solver),
    }


def serialize_problem(spec: ProblemSpec) -> str:
    return json.dumps(problem_to_dict(spec), indent=2)


# ---------------------------------------------------------------------------
# results


def sweep_header(n_sources: int) -> list[str]:
    return ["lambda", *[f"R_{i + 1}" for i in range(n_sources)], "D", "lagrangian", "converged"]


def write_sweep_csv(points: Sequence[SweepPoint], path: str | Path, n_sources: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(sweep_header(n_sources))
        for pt in points:
            w.writerow([fmt(pt.lam), *[fmt(r) for r in pt.rates], fmt(pt.distortion),
                        fmt(pt.lagrangian), int(pt.converged)])


def read_sweep_csv(path: str | Path) -> list[SweepPoint]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        n = sum(1 for k in row if k.startswith("R_"))
        out.append(SweepPoint(float(row["lambda"]), [float(row[f"R_{i + 1}"]) for i in range(n)],
                              float(row["D"]), float(row["lagrangian"]), row["converged"] == "1"))
    return out


def _state_to_dict(state: SolverState) -> dict[str, Any]:
    return {"q": [a.tolist() for a in state.q], "Q": [a.tolist() for a in state.Q],
            "dec": state.dec.tolist()}


def _state_from_dict(doc: dict[str, Any]) -> SolverState:
    return SolverState([np.asarray(a, float) for a in doc["q"]],
                       [np.asarray(a, float) for a in doc["Q"]], np.asarray(doc["dec"], float))


def _float_or_none(x: float):
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else x


@dataclass
class ResultBundle:
    problem: str
    points: list[SweepPoint]
    config: dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    wall_time: float = 0.0
    version: str = __version__
    bounds: list[dict[str, Any]] = field(default_factory=list)
    include_states: bool = False

    @property
    def n_sources(self) -> int:
        return len(self.points[0].rates) if self.points else 0

    def to_dict(self) -> dict[str, Any]:
        pts = []
        for p in self.points:
            d = {"lambda": p.lam, "rates": [_float_or_none(r) for r in p.rates],
                 "distortion": _float_or_none(p.distortion),
                 "lagrangian": _float_or_none(p.lagrangian), "converged": p.converged,
                 "rate_weights": list(p.rate_weights) if p.rate_weights else None}
            if self.include_states and p.state is not None:
                d["state"] = _state_to_dict(p.state)
            pts.append(d)
        return {"metadata": {"problem": self.problem, "seed": self.seed, "config": self.config,
                             "version": self.version, "wall_time": self.wall_time},
                "points": pts, "bounds": self.bounds}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "ResultBundle":
        meta = doc["metadata"]
        nan = lambda v: math.nan if v is None else v  # noqa: E731
        pts = []
        for d in doc["points"]:
            st = _state_from_dict(d["state"]) if "state" in d else None
            pts.append(SweepPoint(d["lambda"], [nan(r) for r in d["rates"]], nan(d["distortion"]),
                                  nan(d["lagrangian"]), d["converged"],
                                  tuple(d["rate_weights"]) if d.get("rate_weights") else None, st))
        return cls(meta["problem"], pts, meta.get("config", {}), meta.get("seed", 0),
                   meta.get("wall_time", 0.0), meta.get("version", __version__),
                   doc.get("bounds", []), any("state" in d for d in doc["points"]))

    @classmethod
    def from_json(cls, text: str) -> "ResultBundle":
        return cls.from_dict(json.loads(text))


def bounds_to_dicts(report: SubsetBoundReport, lam: float | None = None) -> list[dict[str, Any]]:
    return [dict(asdict(b), subset=list(b.subset), **({"lambda": lam} if lam is not None else {}))
            for b in report.bounds]


# ---------------------------------------------------------------------------
# contour grids


class NotEnoughPoints(ValueError):
    pass


class WrongSourceCount(ValueError):
    pass


@dataclass(frozen=True)
class ContourGrid:
    r1_edges: np.ndarray
    r2_edges: np.ndarray
    # D per cell, shape (len(r2_edges) - 1, len(r1_edges) - 1); NaN where no point falls
    values: np.ndarray

    @property
    def r1_centers(self) -> np.ndarray:
        return 0.5 * (self.r1_edges[1:] + self.r1_edges[:-1])

    @property
    def r2_centers(self) -> np.ndarray:
        return 0.5 * (self.r2_edges[1:] + self.r2_edges[:-1])


def contour_grid(points: Sequence[SweepPoint], bins: int = 20,
                 r_max: tuple[float, float] | None = None) -> ContourGrid:
    """Grid a two-source (R_1, R_2, D) cloud.

    Each cell takes D from the point nearest its centre among the points that
    fall inside it; empty cells stay NaN rather than being interpolated.
    """
    pts = [p for p in points if p.converged and np.all(np.isfinite(p.rates))]
    if len(points) and len(points[0].rates) != 2:
        raise WrongSourceCount(f"contour grids need 2 sources, got {len(points[0].rates)}")
    if len(pts) < 3:
        raise NotEnoughPoints(f"{len(pts)} usable points; need at least 3")
    r = np.array([p.rates for p in pts])
    d = np.array([p.distortion for p in pts])
    if r_max is None:
        top = r.max(axis=0)
        r_max = (float(top[0]) or 1.0, float(top[1]) or 1.0)
    e1 = np.linspace(0.0, r_max[0] * (1 + 1e-9), bins + 1)
    e2 = np.linspace(0.0, r_max[1] * (1 + 1e-9), bins + 1)
    g = ContourGrid(e1, e2, np.full((bins, bins), np.nan))
    i1 = np.clip(np.searchsorted(e1, r[:, 0], side="right") - 1, 0, bins - 1)
    i2 = np.clip(np.searchsorted(e2, r[:, 1], side="right") - 1, 0, bins - 1)
    c1, c2 = g.r1_centers, g.r2_centers
    best = np.full((bins, bins), np.inf)
    for k in range(len(pts)):
        if r[k, 0] > e1[-1] or r[k, 1] > e2[-1]:
            continue
        a, b = i2[k], i1[k]
        dist = (r[k, 0] - c1[b]) ** 2 + (r[k, 1] - c2[a]) ** 2
        if dist < best[a, b]:
            best[a, b] = dist
            g.values[a, b] = d[k]
    return g


def emit_contour_grid(bundle: ResultBundle, path: str | Path, bins: int = 20,
                      r_max: tuple[float, float] | None = None) -> ContourGrid:
    """Write the gridded cloud as CSV: a header row of R_1 cell centres, then
    one row per R_2 cell centre. Empty cells hold ``NA``."""
    if bundle.n_sources and bundle.n_sources != 2:
        raise WrongSourceCount(f"contour mode needs M = 2, bundle has M = {bundle.n_sources}")
    g = contour_grid(bundle.points, bins, r_max)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["R_2 \\ R_1", *[fmt(c) for c in g.r1_centers]])
        for j, c2 in enumerate(g.r2_centers):
            w.writerow([fmt(c2), *[MISSING if np.isnan(v) else fmt(v) for v in g.values[j]]])
    return g


def read_contour_csv(path: str | Path) -> ContourGrid:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    c1 = np.array([float(v) for v in rows[0][1:]])
    c2 = np.array([float(r[0]) for r in rows[1:]])
    vals = np.array([[np.nan if v == MISSING else float(v) for v in r[1:]] for r in rows[1:]])

    def edges(c):
        h = c[1] - c[0] if len(c) > 1 else 2 * c[0]
        return np.concatenate([[c[0] - h / 2], c + h / 2])

    return ContourGrid(edges(c1), edges(c2), vals)

