"""Composite systems: product states, minimal and maximal tensor products.

Joint states of the minimal tensor product live in the Kronecker product of
the factors' homogeneous coordinate spaces, so ``(s (x) t)(e, f) = e(s) f(t)``
is literally ``kron(e, f) @ kron(s, t)``.  Maximal-tensor states are stored as
tables of values on pairs of effect rays.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .core import (
    Effect,
    State,
    StateSpace,
    effect_cone_decomposition,
    membership,
    polytope_effect_rays,
    resolve_tol,
)
from .errors import DimensionError, InvalidCompositeError
from .lp import solve_lp

_COMPOSITES: dict[tuple[StateSpace, ...], StateSpace] = {}


def _kron_all(vectors) -> np.ndarray:
    return reduce(np.kron, vectors)


def min_tensor_space(*spaces: StateSpace) -> StateSpace:
    """Convex hull of product pure states, as a polytope in the Kronecker space.

    Factors that are themselves composites are flattened. Results are
    cached, so the same factor tuple always yields the same object.
    """
    flat: list[StateSpace] = []
    for s in spaces:
        flat.extend(s.factors if s.factors else (s,))
    if len(flat) == 1:
        return flat[0]
    key = tuple(flat)
    if key in _COMPOSITES:
        return _COMPOSITES[key]
    if any(s.geometry != "polytope" for s in flat):
        raise NotImplementedError("composites are only supported for polytope factors")
    verts = np.array([_kron_all(combo) for combo in itertools.product(*(s.pure_states for s in flat))])
    if all(len(s.pure_states) == s.basis.shape[0] for s in flat):
        # product of simplices is a simplex: rays are products of factor rays
        rays = np.array([_kron_all(combo) for combo in itertools.product(*(s.effect_rays for s in flat))])
    else:
        rays = polytope_effect_rays(verts)
    refs = [s.metadata.get("ref") for s in flat]
    meta = {"composite": "min"}
    if all(refs):
        meta["ref"] = refs
    space = StateSpace(verts, rays, label="(x)".join(s.label for s in flat),
                       metadata=meta, factors=flat, check=False)
    _COMPOSITES[key] = space
    return space


def factor_spaces(space: StateSpace) -> tuple[StateSpace, ...]:
    return space.factors if space.factors else (space,)


# ---------------------------------------------------------------------------
# composite state types
# ---------------------------------------------------------------------------

class ProductState:
    def __init__(self, factors: Sequence[State]):
        if len(factors) < 2:
            raise InvalidCompositeError("a product state needs at least two factors")
        self.factors = tuple(factors)

    @property
    def spaces(self) -> tuple[StateSpace, ...]:
        return tuple(f.space for f in self.factors)

    @property
    def space(self) -> StateSpace:
        return min_tensor_space(*self.spaces)

    @property
    def coords(self) -> np.ndarray:
        return _kron_all([f.coords for f in self.factors])

    def as_state(self) -> State:
        return State(self.coords, self.space, check=False)

    def __repr__(self) -> str:
        return " (x) ".join(repr(f) for f in self.factors)


class MinTensorState:
    """Finite convex mixture of product states."""

    def __init__(self, components, *, tol: float | None = None):
        t = resolve_tol(tol)
        comps = [(float(w), p) for w, p in components]
        if not comps:
            raise InvalidCompositeError("empty mixture")
        w = np.array([c[0] for c in comps])
        if (w < -t).any() or abs(w.sum() - 1.0) > t:
            raise InvalidCompositeError("mixture weights must be nonnegative and sum to 1")
        spaces = comps[0][1].spaces
        if any(p.spaces != spaces for _, p in comps):
            raise InvalidCompositeError("mixture components live on different composites")
        self.components = tuple(comps)

    @property
    def spaces(self) -> tuple[StateSpace, ...]:
        return self.components[0][1].spaces

    @property
    def space(self) -> StateSpace:
        return min_tensor_space(*self.spaces)

    @property
    def coords(self) -> np.ndarray:
        return sum(w * p.coords for w, p in self.components)

    def as_state(self) -> State:
        return State(self.coords, self.space, check=False)


class MaxTensorState:
    """Bipartite joint state given by its values on pairs of effect rays."""

    def __init__(self, table, spaces: Sequence[StateSpace]):
        A, B = spaces
        T = np.array(table, dtype=np.float64, ndmin=2)
        if T.shape != (len(A.effect_rays), len(B.effect_rays)):
            raise DimensionError(f"table shape {T.shape} does not match the ray counts")
        T.setflags(write=False)
        self.table = T
        self.spaces = (A, B)

    @classmethod
    def from_bilinear(cls, W, spaces: Sequence[StateSpace]) -> "MaxTensorState":
        """Table of the bilinear form ``phi(e, f) = e @ W @ f``."""
        A, B = spaces
        return cls(A.effect_rays @ np.asarray(W, dtype=np.float64) @ B.effect_rays.T, spaces)

    def bilinear(self) -> np.ndarray:
        """Least-squares matrix ``W`` with ``R_A W R_B^T`` close to the table."""
        A, B = self.spaces
        return np.linalg.pinv(A.effect_rays) @ self.table @ np.linalg.pinv(B.effect_rays).T

    def __eq__(self, other) -> bool:
        if not isinstance(other, MaxTensorState):
            return NotImplemented
        return self.spaces == other.spaces and np.array_equal(self.table, other.table)

    __hash__ = None


Composite = ProductState | MinTensorState | MaxTensorState


def product_state(*factors: State) -> ProductState:
    return ProductState(factors)


def as_composite_state(x) -> State:
    """Joint state of a ProductState/MinTensorState as a State of the composite."""
    if isinstance(x, State):
        return x
    if isinstance(x, (ProductState, MinTensorState)):
        return x.as_state()
    raise TypeError(f"expected a product or mixture state, got {type(x).__name__}")


# ---------------------------------------------------------------------------
# ray-coordinate helpers
# ---------------------------------------------------------------------------

def ray_coefficients(e, space: StateSpace) -> np.ndarray:
    """Coefficients ``a`` with ``sum_i a_i r_i = e`` on the span of the states."""
    f = e.functional if isinstance(e, Effect) else np.asarray(e, dtype=np.float64)
    A, b = effect_cone_decomposition(space.effect_rays, space.basis, f)
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    return coef


def unit_ray_weights(rays: np.ndarray, basis: np.ndarray, unit: np.ndarray) -> np.ndarray:
    """A nonnegative decomposition of the unit effect over ``rays``."""
    A, b = effect_cone_decomposition(rays, basis, unit)
    res = solve_lp(np.zeros(len(rays)), A, b)
    if not res.success:
        raise InvalidCompositeError("unit effect is not in the cone of the given rays")
    return res.x


def ray_measurements(rays: np.ndarray, basis: np.ndarray, unit: np.ndarray) -> list[np.ndarray]:
    """Complete measurements built from rays: one LP vertex per ray it can use.

    For each ray ``i`` the vertex maximizing its weight is kept; duplicates
    are dropped. Deterministic, ordered by first ray.
    """
    A, b = effect_cone_decomposition(rays, basis, unit)
    found: list[np.ndarray] = []
    for i in range(len(rays)):
        c = np.zeros(len(rays))
        c[i] = -1.0
        res = solve_lp(c, A, b)
        if res.success and res.x[i] > 1e-12 and not any(np.allclose(res.x, f, atol=1e-12) for f in found):
            found.append(res.x)
    return found


def _product_rays(spaces: Sequence[StateSpace]) -> np.ndarray:
    return np.array([_kron_all(c) for c in itertools.product(*(s.effect_rays for s in spaces))])


def _product_unit(spaces: Sequence[StateSpace]) -> np.ndarray:
    return _kron_all([s.unit for s in spaces])


def table_of(c) -> MaxTensorState:
    """Bipartite ray table of any composite (first factor vs the rest)."""
    if isinstance(c, MaxTensorState):
        return c
    spaces = c.spaces
    first = spaces[0]
    rest = min_tensor_space(*spaces[1:])
    omega = c.coords.reshape(first.size, -1)
    return MaxTensorState(first.effect_rays @ omega @ rest.effect_rays.T, (first, rest))


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def joint_probability(c, *effects: Effect, tol: float | None = None) -> float:
    """Joint probability of one effect per subsystem."""
    t = resolve_tol(tol)
    if isinstance(c, MaxTensorState):
        if len(effects) != 2:
            raise DimensionError("a max-tensor table takes exactly two effects")
        A, B = c.spaces
        a = ray_coefficients(effects[0], A)
        b = ray_coefficients(effects[1], B)
        v = float(a @ c.table @ b)
    else:
        if len(effects) != len(c.spaces):
            raise DimensionError(f"need {len(c.spaces)} effects, got {len(effects)}")
        for e, s in zip(effects, c.spaces):
            if e.space != s:
                raise DimensionError("effect does not belong to its subsystem")
        v = float(_kron_all([e.functional for e in effects]) @ c.coords)
    if v < -t or v > 1 + t:
        raise InvalidCompositeError(f"joint probability {v!r} outside [0, 1]: invalid joint state")
    return min(max(v, 0.0), 1.0)


def _state_from_ray_values(values: np.ndarray, space: StateSpace, t: float) -> State:
    M = space.effect_rays @ space.basis.T
    z, *_ = np.linalg.lstsq(M, values, rcond=None)
    x = space.basis.T @ z
    fit = float(np.abs(M @ z - values).max())
    if fit > 1e3 * t or abs(x[-1] - 1.0) > 1e3 * t:
        raise InvalidCompositeError(f"ray values are not those of a state (misfit {fit:.3g})")
    x[-1] = 1.0 if abs(x[-1] - 1.0) <= t else x[-1]
    m = membership(x, space, tol=t)
    if not m.inside:
        raise InvalidCompositeError(f"marginal falls outside the state space (margin {m.residual:.3g})")
    return State(x, space, check=False)


def marginal(c, which: int = 0, *, tol: float | None = None) -> State:
    """Reduced state of subsystem ``which``."""
    t = resolve_tol(tol)
    if isinstance(c, ProductState):
        return c.factors[which]
    if isinstance(c, MinTensorState):
        coords = sum(w * p.factors[which].coords for w, p in c.components)
        space = c.spaces[which]
        m = membership(coords, space, tol=t)
        if not m.inside:
            raise InvalidCompositeError("marginal falls outside the state space")
        return State(coords, space, check=False)
    if isinstance(c, MaxTensorState):
        A, B = c.spaces
        if which == 0:
            mu = unit_ray_weights(B.effect_rays, B.basis, B.unit)
            return _state_from_ray_values(c.table @ mu, A, t)
        mu = unit_ray_weights(A.effect_rays, A.basis, A.unit)
        return _state_from_ray_values(mu @ c.table, B, t)
    raise TypeError(f"not a composite state: {type(c).__name__}")


@dataclass
class MaxTableReport:
    ok: bool
    min_entry: float
    normalization_error: float
    approximate: bool


def validate_max_table(c: MaxTensorState, tol: float | None = None) -> MaxTableReport:
    """Positivity on all ray pairs and normalization ``phi(unit, unit) = 1``."""
    t = resolve_tol(tol)
    A, B = c.spaces
    la = unit_ray_weights(A.effect_rays, A.basis, A.unit)
    lb = unit_ray_weights(B.effect_rays, B.basis, B.unit)
    norm_err = abs(float(la @ c.table @ lb) - 1.0)
    lo = float(c.table.min())
    return MaxTableReport(lo >= -t and norm_err <= t, lo, norm_err, A.approximate or B.approximate)


@dataclass
class NoSignallingReport:
    ok: bool
    max_deviation: float
    side: str | None = None
    n_measurements: tuple[int, int] = (0, 0)


def check_no_signalling(c, tol: float | None = None) -> NoSignallingReport:
    """Marginals must not depend on the complete measurement chosen on the other side."""
    t = resolve_tol(tol)
    mt = table_of(c)
    A, B = mt.spaces
    meas_a = ray_measurements(A.effect_rays, A.basis, A.unit)
    meas_b = ray_measurements(B.effect_rays, B.basis, B.unit)
    dev_a = dev_b = 0.0
    if meas_a:
        va = np.array([lam @ mt.table for lam in meas_a])
        dev_a = float(np.abs(va - va[0]).max())
    if meas_b:
        vb = np.array([mt.table @ lam for lam in meas_b])
        dev_b = float(np.abs(vb - vb[0]).max())
    dev = max(dev_a, dev_b)
    side = None if dev <= t else ("A" if dev_a >= dev_b else "B")
    return NoSignallingReport(dev <= t, dev, side, (len(meas_a), len(meas_b)))


@dataclass
class ProductForm:
    factors: list[State] | None
    deviation: float
    cut: int | None = None

    @property
    def is_product(self) -> bool:
        return self.factors is not None


def _factorize(joint: np.ndarray, spaces: Sequence[StateSpace], t: float, offset: int = 0) -> ProductForm:
    first, rest = spaces[0], spaces[1:]
    omega = joint.reshape(first.size, -1)
    unit_rest = _product_unit(rest)
    m_first = omega @ unit_rest
    m_rest = first.unit @ omega
    R1, Rr = first.effect_rays, _product_rays(rest)
    dev = float(np.abs(R1 @ omega @ Rr.T - np.outer(R1 @ m_first, Rr @ m_rest)).max())
    if dev > t:
        return ProductForm(None, dev, cut=offset + 1)
    s_first = State(m_first, first, tol=t)
    if len(rest) == 1:
        return ProductForm([s_first, State(m_rest, rest[0], tol=t)], dev)
    sub = _factorize(m_rest, rest, t, offset + 1)
    if sub.factors is None:
        return ProductForm(None, max(dev, sub.deviation), cut=sub.cut)
    return ProductForm([s_first] + sub.factors, max(dev, sub.deviation))


def is_product_form(c, tol: float | None = None) -> ProductForm:
    """Factorization into marginals when the joint table is their outer product."""
    t = resolve_tol(tol)
    if isinstance(c, ProductState):
        return ProductForm(list(c.factors), 0.0)
    if isinstance(c, MaxTensorState):
        A, B = c.spaces
        try:
            ma, mb = marginal(c, 0, tol=t), marginal(c, 1, tol=t)
        except InvalidCompositeError:
            return ProductForm(None, np.inf, cut=1)
        dev = float(np.abs(c.table - np.outer(A.effect_rays @ ma.coords, B.effect_rays @ mb.coords)).max())
        return ProductForm([ma, mb] if dev <= t else None, dev, cut=None if dev <= t else 1)
    if isinstance(c, MinTensorState):
        return _factorize(c.coords, c.spaces, t)
    if isinstance(c, State) and c.space.factors:
        return _factorize(c.coords, c.space.factors, t)
    raise TypeError(f"not a composite state: {type(c).__name__}")


def joint_from_coords(coords, spaces: Sequence[StateSpace], *, tol: float | None = None) -> State:
    """Validated State of the minimal tensor product from flattened coordinates."""
    space = min_tensor_space(*spaces)
    return State(coords, space, tol=tol)


def random_min_tensor_state(spaces: Sequence[StateSpace], rng: np.random.Generator,
                            n_components: int = 3) -> MinTensorState:
    comps = []
    w = rng.dirichlet(np.ones(n_components))
    for wk in w:
        factors = [s.state_from_weights(rng.dirichlet(np.ones(len(s.pure_states)))) for s in spaces]
        comps.append((wk, ProductState(factors)))
    return MinTensorState(comps)


def min_to_max(c) -> MaxTensorState:
    """Express a bipartite product/mixture state as a max-tensor table."""
    if len(c.spaces) != 2:
        raise DimensionError("max-tensor tables are bipartite")
    return table_of(c)


__all__ = [
    "MaxTableReport", "MaxTensorState", "MinTensorState", "NoSignallingReport", "ProductForm",
    "ProductState", "as_composite_state", "check_no_signalling", "factor_spaces", "is_product_form",
    "joint_from_coords", "joint_probability", "marginal", "min_tensor_space", "min_to_max",
    "product_state", "random_min_tensor_state", "ray_coefficients", "ray_measurements",
    "table_of", "unit_ray_weights", "validate_max_table",
]
