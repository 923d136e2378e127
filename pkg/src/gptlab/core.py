"""State spaces, states, effects and measurements in homogeneous coordinates.

A state of a ``d``-dimensional space is a vector in ``R^(d+1)`` whose last
entry is 1; effects are linear functionals on that space, so ``e(s)`` is a
dot product and the unit effect is ``(0, ..., 0, 1)``.  Polytopes are given
by their vertices.  The Bloch ball (``geometry="ball"``) carries a sample of
pure states and a sample of effect rays; its support function is analytic.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.spatial import ConvexHull

from .errors import (
    DimensionError,
    InvalidEffectError,
    InvalidMeasurementError,
    InvalidSpaceError,
    InvalidStateError,
)
from .lp import solve_lp

GEOMETRIES = ("polytope", "ball")


def default_tol() -> float:
    """Global absolute tolerance; ``GPTLAB_TOL`` overrides the 1e-9 default."""
    raw = os.environ.get("GPTLAB_TOL")
    return float(raw) if raw else 1e-9


def resolve_tol(tol: float | None) -> float:
    return default_tol() if tol is None else float(tol)


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def span_basis(vectors: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Orthonormal rows spanning the linear span of ``vectors`` (rows)."""
    _, sv, vt = np.linalg.svd(vectors, full_matrices=False)
    rank = int((sv > rtol * sv[0]).sum()) if sv.size else 0
    return vt[:rank]


def _normalize_rays(rays: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    peak = (vertices @ rays.T).max(axis=0)
    return rays / peak[:, None]


def polytope_effect_rays(vertices: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Extremal rays of the cone of nonnegative affine functionals.

    These are the facet functionals of the polytope, scaled so that each
    ray peaks at exactly 1 on the vertices (so every ray is itself an effect).
    Simplices use the dual basis; everything else goes through qhull on the
    affine hull.
    """
    V = np.asarray(vertices, dtype=np.float64)
    n = V.shape[0]
    if n == 1:
        return V[:1] * 0.0 + np.eye(V.shape[1])[-1]
    if np.linalg.matrix_rank(V, tol=1e-10) == n:
        # simplex: f_k(p_j) = delta_kj
        return _normalize_rays(np.linalg.pinv(V).T, V)
    X = V[:, :-1]
    center = X.mean(axis=0)
    _, sv, vt = np.linalg.svd(X - center, full_matrices=False)
    k = int((sv > 1e-10 * sv[0]).sum())
    U = vt[:k].T
    Y = (X - center) @ U
    if k == 1:
        y = Y[:, 0]
        eqs = np.array([[1.0, -y.max()], [-1.0, y.min()]])
    else:
        eqs = ConvexHull(Y).equations
    # inside: a.y + b <= 0, so f(x) = -(a.(U^T (x - c)) + b) >= 0
    a, b = eqs[:, :-1], eqs[:, -1]
    lin = -(a @ U.T)
    const = (a @ U.T @ center) - b
    rays = np.hstack([lin, const[:, None]])
    rays = _normalize_rays(rays, V)
    key = np.round(rays / np.abs(rays).max(axis=1, keepdims=True), 8)
    _, first = np.unique(key, axis=0, return_index=True)
    return rays[np.sort(first)]


def effect_cone_decomposition(rays: np.ndarray, basis: np.ndarray, unit: np.ndarray):
    """Equality constraints ``A lam = b`` meaning ``sum_i lam_i r_i = unit`` on the span."""
    return basis @ rays.T, basis @ unit


class StateSpace:
    """Compact convex state space given by its pure states.

    Parameters
    ----------
    pure_states:
        Rows in homogeneous coordinates (last entry 1).
    effect_rays:
        Extremal rays of the effect cone. Computed from the vertices of a
        polytope when omitted; required for the ball geometry.
    geometry:
        ``"polytope"`` (exact) or ``"ball"`` (unit ball, rays are a sample).
    """

    def __init__(self, pure_states, effect_rays=None, *, label: str = "",
                 geometry: str = "polytope", metadata: Mapping | None = None,
                 factors: Sequence["StateSpace"] = (), tol: float | None = None,
                 check: bool = True):
        if geometry not in GEOMETRIES:
            raise InvalidSpaceError(f"unknown geometry {geometry!r}")
        P = np.array(pure_states, dtype=np.float64, ndmin=2)
        if P.shape[1] < 2:
            raise DimensionError("state vectors need at least one affine coordinate")
        self.label = label
        self.geometry = geometry
        self.metadata = dict(metadata or {})
        self.factors = tuple(factors)
        self.pure_states = _readonly(P)
        if effect_rays is None:
            if geometry != "polytope":
                raise InvalidSpaceError("smooth state spaces need an explicit effect-ray sample")
            effect_rays = polytope_effect_rays(P)
        R = np.array(effect_rays, dtype=np.float64, ndmin=2)
        if R.shape[1] != P.shape[1]:
            raise DimensionError(f"effect rays have length {R.shape[1]}, states {P.shape[1]}")
        self.effect_rays = _readonly(R)
        self.basis = _readonly(span_basis(P) if geometry == "polytope" else np.eye(P.shape[1]))
        self._hash = hash((geometry, P.shape, P.tobytes(), R.tobytes()))
        if check:
            report = validate(self, tol=tol)
            if not report.ok:
                raise InvalidSpaceError(f"invalid state space {label!r}: {report.summary()}")

    @property
    def dim(self) -> int:
        return self.pure_states.shape[1] - 1

    @property
    def size(self) -> int:
        """Length of homogeneous coordinate vectors."""
        return self.pure_states.shape[1]

    @property
    def unit(self) -> np.ndarray:
        u = np.zeros(self.size)
        u[-1] = 1.0
        return u

    @property
    def approximate(self) -> bool:
        return self.geometry != "polytope"

    def __repr__(self) -> str:
        return (f"StateSpace(label={self.label!r}, dim={self.dim}, "
                f"pure={len(self.pure_states)}, rays={len(self.effect_rays)}, geometry={self.geometry})")

    def __eq__(self, other) -> bool:
        if not isinstance(other, StateSpace):
            return NotImplemented
        return (self is other) or (
            self.geometry == other.geometry
            and self.pure_states.shape == other.pure_states.shape
            and self.effect_rays.shape == other.effect_rays.shape
            and np.array_equal(self.pure_states, other.pure_states)
            and np.array_equal(self.effect_rays, other.effect_rays))

    def __hash__(self) -> int:
        return self._hash

    def support(self, functional) -> tuple[float, float]:
        """Minimum and maximum of a linear functional over the space."""
        f = np.asarray(functional, dtype=np.float64)
        if self.geometry == "ball":
            spread = float(np.linalg.norm(f[:-1]))
            return float(f[-1] - spread), float(f[-1] + spread)
        vals = self.pure_states @ f
        return float(vals.min()), float(vals.max())

    def homogenize(self, coords) -> np.ndarray:
        x = np.asarray(coords, dtype=np.float64).ravel()
        if x.size == self.dim:
            x = np.append(x, 1.0)
        if x.size != self.size:
            raise DimensionError(f"expected {self.dim} or {self.size} coordinates, got {x.size}")
        return x

    def state(self, coords, *, tol: float | None = None) -> "State":
        return State(self.homogenize(coords), self, tol=tol)

    def state_from_weights(self, weights, *, tol: float | None = None) -> "State":
        w = np.asarray(weights, dtype=np.float64).ravel()
        if w.size != len(self.pure_states):
            raise DimensionError(f"expected {len(self.pure_states)} weights, got {w.size}")
        t = resolve_tol(tol)
        if (w < -t).any() or abs(w.sum() - 1.0) > t:
            raise InvalidStateError("barycentric weights must be nonnegative and sum to 1")
        return State(w @ self.pure_states, self, tol=tol)

    def vertex(self, i: int) -> "State":
        return State(self.pure_states[i], self, check=False)

    def center(self) -> "State":
        return State(self.pure_states.mean(axis=0), self, check=False)

    def ray_effect(self, i: int) -> "Effect":
        return Effect(self.effect_rays[i], self, check=False)

    def unit_effect(self) -> "Effect":
        return Effect(self.unit, self, check=False)


# ---------------------------------------------------------------------------
# membership
# ---------------------------------------------------------------------------

@dataclass
class Membership:
    inside: bool
    weights: np.ndarray | None = None
    witness: np.ndarray | None = None
    residual: float = 0.0


def membership(coords, space: StateSpace, *, tol: float | None = None) -> Membership:
    """Decide whether ``coords`` lies in ``space``.

    Inside a polytope the result carries barycentric weights over the pure
    states; outside it carries a separating functional ``f`` with
    ``f(p) >= 0`` on every pure state and ``f(coords) < 0``.
    """
    t = resolve_tol(tol)
    x = np.asarray(coords, dtype=np.float64).ravel()
    if x.size != space.size:
        raise DimensionError(f"expected {space.size} homogeneous coordinates, got {x.size}")
    if abs(x[-1] - 1.0) > t:
        raise DimensionError(f"last homogeneous coordinate must be 1, got {x[-1]!r}")

    if space.geometry == "ball":
        r = float(np.linalg.norm(x[:-1]))
        if r <= 1.0 + t:
            return Membership(True, residual=max(r - 1.0, 0.0))
        w = np.append(-x[:-1] / r, 1.0)
        return Membership(False, witness=w, residual=r - 1.0)

    return _polytope_membership(x, space.pure_states, space.basis, t)


def _polytope_membership(x, V, B, t) -> Membership:
    off = x - B.T @ (B @ x)
    off_norm = float(np.linalg.norm(off))
    if off_norm > t:
        return Membership(False, witness=-off / off_norm, residual=off_norm)
    res = solve_lp(np.zeros(len(V)), B @ V.T, B @ x, feas_tol=t)
    if res.status == "optimal":
        w = res.x
        err = float(np.abs(w @ V - x).max())
        return Membership(err <= 10 * t, weights=w, residual=err)
    f = -(B.T @ res.farkas)
    f = f / np.abs(f).max()
    return Membership(False, witness=f, residual=float(-(f @ x)))


# ---------------------------------------------------------------------------
# states, effects, measurements
# ---------------------------------------------------------------------------

class State:
    __slots__ = ("coords", "space")

    def __init__(self, coords, space: StateSpace, *, tol: float | None = None, check: bool = True):
        x = np.asarray(coords, dtype=np.float64).ravel()
        if check:
            m = membership(x, space, tol=tol)
            if not m.inside:
                raise InvalidStateError(
                    f"point lies outside {space.label or 'the state space'} (margin {m.residual:.3g})")
        self.coords = _readonly(x)
        self.space = space

    def __repr__(self) -> str:
        return f"State({np.array2string(self.coords, precision=6)}, space={self.space.label!r})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, State):
            return NotImplemented
        return self.space == other.space and np.array_equal(self.coords, other.coords)

    def __hash__(self) -> int:
        return hash(self.coords.tobytes())

    def mix(self, other: "State", lam: float) -> "State":
        """Convex combination ``lam * self + (1 - lam) * other``."""
        if other.space != self.space:
            raise DimensionError("cannot mix states of different spaces")
        return State(lam * self.coords + (1 - lam) * other.coords, self.space, check=False)


class Effect:
    __slots__ = ("functional", "space")

    def __init__(self, functional, space: StateSpace, *, tol: float | None = None, check: bool = True):
        f = np.asarray(functional, dtype=np.float64).ravel()
        if f.size != space.size:
            raise DimensionError(f"effect has length {f.size}, expected {space.size}")
        self.functional = _readonly(f)
        self.space = space
        if check:
            report = validate(self, tol=tol)
            if not report.ok:
                raise InvalidEffectError(report.summary())

    def __call__(self, state: State) -> float:
        return evaluate_effect(self, state)

    def __add__(self, other: "Effect") -> "Effect":
        return Effect(self.functional + other.functional, self.space, check=False)

    def scaled(self, c: float) -> "Effect":
        return Effect(c * self.functional, self.space, check=False)

    def __repr__(self) -> str:
        return f"Effect({np.array2string(self.functional, precision=6)})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Effect):
            return NotImplemented
        return self.space == other.space and np.array_equal(self.functional, other.functional)

    def __hash__(self) -> int:
        return hash(self.functional.tobytes())

    def dominates(self, other: "Effect", tol: float | None = None) -> bool:
        """Partial order ``self >= other`` on the whole state space."""
        lo, _ = self.space.support(self.functional - other.functional)
        return lo >= -resolve_tol(tol)


class Measurement:
    """Labelled family of effects summing to the unit effect."""

    def __init__(self, outcomes, *, tol: float | None = None, check: bool = True):
        if isinstance(outcomes, Mapping):
            outcomes = list(outcomes.items())
        pairs = []
        for item in outcomes:
            if isinstance(item, Effect):
                pairs.append((str(len(pairs)), item))
            else:
                label, eff = item
                pairs.append((str(label), eff))
        if not pairs:
            raise InvalidMeasurementError("a measurement needs at least one outcome")
        self.outcomes: tuple[tuple[str, Effect], ...] = tuple(pairs)
        if check:
            report = validate(self, tol=tol)
            if not report.ok:
                raise InvalidMeasurementError(report.summary())

    @property
    def space(self) -> StateSpace:
        return self.outcomes[0][1].space

    @property
    def labels(self) -> list[str]:
        return [lab for lab, _ in self.outcomes]

    @property
    def effects(self) -> list[Effect]:
        return [e for _, e in self.outcomes]

    def matrix(self) -> np.ndarray:
        return np.array([e.functional for e in self.effects])

    def __len__(self) -> int:
        return len(self.outcomes)

    def __repr__(self) -> str:
        return f"Measurement({self.labels})"

    @classmethod
    def from_rays(cls, space: StateSpace, weights, *, cutoff: float = 1e-12, check: bool = True):
        """Measurement with effects ``w_i * r_i`` for every ray weight above ``cutoff``."""
        w = np.asarray(weights, dtype=np.float64)
        idx = np.flatnonzero(w > cutoff)
        outcomes = [(f"r{i}", Effect(w[i] * space.effect_rays[i], space, check=False)) for i in idx]
        return cls(outcomes, check=check)


def evaluate_effect(e: Effect, s: State, *, tol: float | None = None) -> float:
    """Outcome probability ``e(s)``, clamped into [0, 1] within tolerance."""
    if e.space != s.space:
        raise DimensionError("effect and state belong to different spaces")
    t = resolve_tol(tol)
    v = float(e.functional @ s.coords)
    if v < -t or v > 1 + t:
        raise InvalidEffectError(f"e(s) = {v!r} lies outside [0, 1]")
    return min(max(v, 0.0), 1.0)


def measure(M: Measurement, s: State, *, tol: float | None = None) -> dict[str, float]:
    """Outcome distribution of ``M`` on ``s`` keyed by outcome label."""
    if M.space != s.space:
        raise DimensionError("measurement and state belong to different spaces")
    return {lab: evaluate_effect(e, s, tol=tol) for lab, e in M.outcomes}


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass
class Issue:
    check: str
    detail: str
    margin: float


@dataclass
class ValidationReport:
    subject: str
    issues: list[Issue] = field(default_factory=list)
    approximate: bool = False

    @property
    def ok(self) -> bool:
        return not self.issues

    def failed(self, check: str) -> bool:
        return any(i.check == check for i in self.issues)

    def summary(self) -> str:
        if self.ok:
            return "all checks pass"
        return "; ".join(f"{i.check}: {i.detail} (margin {i.margin:.3g})" for i in self.issues)


def _validate_space(space: StateSpace, t: float) -> ValidationReport:
    rep = ValidationReport(f"space {space.label!r}", approximate=space.approximate)
    P, R = space.pure_states, space.effect_rays
    last = np.abs(P[:, -1] - 1.0)
    for i in np.flatnonzero(last > t):
        rep.issues.append(Issue("homogeneous-coordinate", f"pure state {i} has last coordinate {P[i, -1]!r}",
                                float(last[i])))
    if rep.issues:
        return rep

    if space.geometry == "polytope":
        if len(P) > 1:
            for i in range(len(P)):
                others = np.delete(P, i, axis=0)
                m = _polytope_membership(P[i], others, span_basis(others), t)
                if m.inside:
                    rep.issues.append(Issue("extreme-point", f"pure state {i} is not an extreme point",
                                            float(m.residual)))
        vals = P @ R.T
        worst = vals.min(axis=0)
        for j in np.flatnonzero(worst < -t):
            rep.issues.append(Issue("ray-nonnegative", f"effect ray {j} is negative on a pure state",
                                    float(-worst[j])))
    else:
        norms = np.linalg.norm(P[:, :-1], axis=1)
        bad = np.abs(norms - 1.0)
        for i in np.flatnonzero(bad > t):
            rep.issues.append(Issue("extreme-point", f"pure state {i} is not on the unit sphere", float(bad[i])))
        for j, r in enumerate(R):
            lo, _ = space.support(r)
            if lo < -t:
                rep.issues.append(Issue("ray-nonnegative", f"effect ray {j} is negative on the ball", -lo))

    unit_vals = P @ space.unit
    dev = float(np.abs(unit_vals - 1.0).max())
    if dev > t:
        rep.issues.append(Issue("unit", "unit effect differs from 1 on a pure state", dev))

    A, b = effect_cone_decomposition(R, space.basis, space.unit)
    res = solve_lp(np.zeros(len(R)), A, b, feas_tol=t)
    if res.status != "optimal":
        rep.issues.append(Issue("unit-in-ray-cone", "unit effect is not a nonnegative combination of rays",
                                float(res.infeasibility)))
    return rep


def _validate_effect(e: Effect, t: float) -> ValidationReport:
    rep = ValidationReport("effect", approximate=e.space.approximate)
    lo, hi = e.space.support(e.functional)
    if lo < -t:
        rep.issues.append(Issue(">= 0 on all vertices", f"minimum value {lo!r}", -lo))
    if hi > 1 + t:
        rep.issues.append(Issue("<= 1 on all vertices", f"maximum value {hi!r}", hi - 1.0))
    return rep


def _validate_measurement(M: Measurement, t: float) -> ValidationReport:
    space = M.space
    rep = ValidationReport(f"measurement {M.labels}", approximate=space.approximate)
    for lab, e in M.outcomes:
        if e.space != space:
            rep.issues.append(Issue("shared-space", f"outcome {lab!r} lives on another space", np.inf))
            return rep
        for issue in _validate_effect(e, t).issues:
            rep.issues.append(Issue(issue.check, f"outcome {lab!r}: {issue.detail}", issue.margin))
    total = M.matrix().sum(axis=0) - space.unit
    lo, hi = space.support(total)
    dev = max(abs(lo), abs(hi))
    if dev > t:
        rep.issues.append(Issue("sums to unit", "effects do not sum to the unit effect", dev))
    return rep


def validate(obj, *, tol: float | None = None) -> ValidationReport:
    """Report every violated invariant of a space, effect or measurement."""
    t = resolve_tol(tol)
    if isinstance(obj, StateSpace):
        return _validate_space(obj, t)
    if isinstance(obj, Effect):
        return _validate_effect(obj, t)
    if isinstance(obj, Measurement):
        return _validate_measurement(obj, t)
    raise TypeError(f"cannot validate {type(obj).__name__}")


def mixture(states: Iterable[State], weights) -> State:
    states = list(states)
    w = np.asarray(weights, dtype=np.float64)
    coords = sum(wi * s.coords for wi, s in zip(w, states))
    return State(coords, states[0].space)
