"""Cosine similarity, angular distance and the angular triangle distance.

All distances here are normalized angles: a pairwise angular distance is the
angle between two vectors divided by pi (so it lies in [0, 1]) and a triangle
distance is the sum of two consecutive pairwise distances (so it lies in
[0, 2]).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

NORM_FLOOR = 1e-12
DEFAULT_AXIOM_TOL = 1e-9


class DegenerateVectorError(ValueError):
    """Raised when a vector is too close to zero to have a direction."""


def _as_vector(v) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {arr.shape}")
    return arr


def _check_pair(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between ``a`` and ``b``, clamped to [-1, 1].

    The denominator is ``sqrt(<a,a> * <b,b>)`` rather than the product of two
    separately rounded norms, so ``cosine_similarity(v, v)`` is exactly 1.

    Raises:
        ValueError: if the dimensions differ.
        DegenerateVectorError: if either vector has norm below ``NORM_FLOOR``.
    """
    a = _as_vector(a)
    b = _as_vector(b)
    _check_pair(a, b)
    aa = float(np.dot(a, a))
    bb = float(np.dot(b, b))
    if math.sqrt(aa) < NORM_FLOOR or math.sqrt(bb) < NORM_FLOOR:
        raise DegenerateVectorError("cannot take the direction of a zero-norm vector")
    s = float(np.dot(a, b)) / math.sqrt(aa * bb)
    return min(1.0, max(-1.0, s))


def _half_chord_angle(ua: np.ndarray, ub: np.ndarray, axis=None):
    # 2 * atan2(|ua - ub|, |ua + ub|) equals arccos(<ua, ub>) for unit vectors
    # but stays well conditioned near 0 and pi, where arccos loses half the digits
    diff = np.sqrt(np.sum((ua - ub) ** 2, axis=axis))
    summ = np.sqrt(np.sum((ua + ub) ** 2, axis=axis))
    return 2.0 * np.arctan2(diff, summ)


def angular_distance(a, b) -> float:
    """Angle between ``a`` and ``b`` divided by pi, in [0, 1].

    Equal to ``arccos(cosine_similarity(a, b)) / pi``; evaluated through the
    half-chord form so that near-parallel and near-antipodal pairs keep full
    precision.
    """
    a = _as_vector(a)
    b = _as_vector(b)
    _check_pair(a, b)
    na = math.sqrt(float(np.dot(a, a)))
    nb = math.sqrt(float(np.dot(b, b)))
    if na < NORM_FLOOR or nb < NORM_FLOOR:
        raise DegenerateVectorError("cannot take the direction of a zero-norm vector")
    return float(_half_chord_angle(a / na, b / nb)) / math.pi


def angular_triangle_distance(a, b, c) -> float:
    """Angular distance a->b plus angular distance b->c, in [0, 2]."""
    return angular_distance(a, b) + angular_distance(b, c)


def _unit_rows(u: np.ndarray) -> np.ndarray:
    norms = np.sqrt(np.einsum("ij,ij->i", u, u))
    if np.any(norms < NORM_FLOOR):
        raise DegenerateVectorError("sample contains a zero-norm vector")
    return u / norms[:, None]


def rowwise_angle(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Angle in radians between matching rows."""
    return _half_chord_angle(_unit_rows(u), _unit_rows(v), axis=1)


def rowwise_angular_distance(u, v) -> np.ndarray:
    """Angular distance between matching rows of two ``(n, d)`` arrays."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 2:
        raise ValueError(f"expected two equal (n, d) arrays, got {u.shape} and {v.shape}")
    return rowwise_angle(u, v) / np.pi


@dataclass
class AxiomResult:
    name: str
    worst_violation: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.worst_violation <= self.tol


@dataclass
class AxiomReport:
    """Per-axiom outcome of a sampled metric check.

    ``worst_triple`` maps each axiom name to the index of the sample triple
    with the largest violation.
    """

    n_samples: int
    results: dict[str, AxiomResult]
    worst_triple: dict[str, int] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results.values())

    def as_dict(self) -> dict[str, object]:
        out: dict[str, object] = {"samples": self.n_samples, "all_passed": self.passed}
        for name, r in self.results.items():
            out[f"{name}.passed"] = r.passed
            out[f"{name}.worst_violation"] = r.worst_violation
            out[f"{name}.tol"] = r.tol
            out[f"{name}.worst_index"] = self.worst_triple.get(name, -1)
        return out


def check_metric_axioms(samples, tol: float = DEFAULT_AXIOM_TOL, **tols: float) -> AxiomReport:
    """Evaluate the four metric axioms over sampled triples ``(u, v, w)``.

    For every triple this checks non-negativity of D(u, v), identity
    D(u, u) == 0, symmetry D(u, v) == D(v, u), and the triangle inequality on
    raw angles theta(u, w) <= theta(u, v) + theta(v, w). Violations are
    measured in the axiom's own units (normalized distance for the first three,
    radians for the triangle inequality).

    ``samples`` is a sequence of triples or an array of shape ``(n, 3, d)``.
    Per-axiom tolerances can be overridden by keyword, e.g.
    ``check_metric_axioms(s, identity=1e-6)``.
    """
    arr = np.asarray(samples, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("need at least one sample triple")
    if arr.ndim != 3 or arr.shape[1] != 3:
        raise ValueError(f"samples must have shape (n, 3, d), got {arr.shape}")
    unknown = set(tols) - {"non_negativity", "identity", "symmetry", "triangle_inequality"}
    if unknown:
        raise ValueError(f"unknown axiom tolerance(s): {sorted(unknown)}")
    u, v, w = arr[:, 0], arr[:, 1], arr[:, 2]

    d_uv = rowwise_angular_distance(u, v)
    d_vu = rowwise_angular_distance(v, u)
    d_uu = rowwise_angular_distance(u, u)
    theta_uv = rowwise_angle(u, v)
    theta_vw = rowwise_angle(v, w)
    theta_uw = rowwise_angle(u, w)

    violations = {
        "non_negativity": np.maximum(0.0, -d_uv),
        "identity": np.abs(d_uu),
        "symmetry": np.abs(d_uv - d_vu),
        "triangle_inequality": np.maximum(0.0, theta_uw - (theta_uv + theta_vw)),
    }
    results = {}
    worst = {}
    for name, viol in violations.items():
        idx = int(np.argmax(viol))
        results[name] = AxiomResult(name, float(viol[idx]), tols.get(name, tol))
        worst[name] = idx
    return AxiomReport(n_samples=arr.shape[0], results=results, worst_triple=worst)


def random_triples(n: int, dim: int, rng: np.random.Generator, unit: bool = True) -> np.ndarray:
    """Gaussian random triples of shape ``(n, 3, dim)``, optionally unit-normalized."""
    if dim < 2:
        raise ValueError("dimension must be at least 2")
    x = rng.standard_normal((n, 3, dim))
    if unit:
        x /= np.linalg.norm(x, axis=2, keepdims=True)
    return x
