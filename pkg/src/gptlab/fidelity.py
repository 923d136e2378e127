"""Fidelity of GPT states: the infimum over measurements of classical fidelity.

Splitting an outcome never increases the Bhattacharyya sum (Cauchy-Schwarz),
so the infimum is reached on measurements whose effects are multiples of
extremal effect rays.  Writing such a measurement as weights ``lam >= 0`` with
``sum_i lam_i r_i = unit`` turns the objective into the linear function
``sum_i lam_i sqrt(r_i(s1) r_i(s2))``: a small LP, exact for polytopes and
an upper bound when the rays are a sample (Bloch ball).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core import (
    Effect,
    Measurement,
    State,
    StateSpace,
    effect_cone_decomposition,
    resolve_tol,
)
from .errors import DimensionError, GPTError, LPError
from .lp import solve_lp

# ray values below this are round-off (e.g. from Kronecker products); sqrt would
# amplify 1e-16 noise to 1e-8 in the fidelity
_PROB_FLOOR = 1e-13


def _snap(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, 0.0, None)
    p[p < _PROB_FLOOR] = 0.0
    return p


def classical_fidelity(p, q, *, tol: float | None = None) -> float:
    """Bhattacharyya coefficient ``sum_i sqrt(p_i q_i)``."""
    t = resolve_tol(tol)
    p = np.asarray(list(p.values()) if isinstance(p, dict) else p, dtype=np.float64)
    q = np.asarray(list(q.values()) if isinstance(q, dict) else q, dtype=np.float64)
    if p.shape != q.shape:
        raise DimensionError(f"distributions differ in length: {p.shape} vs {q.shape}")
    for name, d in (("p", p), ("q", q)):
        if (d < -t).any():
            raise GPTError(f"{name} has negative entries")
        if abs(d.sum() - 1.0) > t:
            raise GPTError(f"{name} sums to {d.sum()!r}, not 1")
    val = float(np.sqrt(np.clip(p, 0, None) * np.clip(q, 0, None)).sum())
    return min(max(val, 0.0), 1.0)


@dataclass
class FidelityResult:
    value: float
    optimal_measurement: Measurement | None
    method: str
    gap_bound: float = 0.0
    weights: np.ndarray | None = field(default=None, repr=False)
    n_rays: int = 0
    dual_bound: float | None = None

    def distributions(self, s1: State, s2: State) -> tuple[np.ndarray, np.ndarray]:
        E = self.optimal_measurement.matrix()
        return E @ s1.coords, E @ s2.coords


def _objective(rays: np.ndarray, s1: np.ndarray, s2: np.ndarray) -> np.ndarray:
    return np.sqrt(_snap(rays @ s1) * _snap(rays @ s2))


def _ray_lp(space: StateSpace, rays: np.ndarray, s1: np.ndarray, s2: np.ndarray):
    A, b = effect_cone_decomposition(rays, space.basis, space.unit)
    c = _objective(rays, s1, s2)
    res = solve_lp(c, A, b)
    if res.status == "infeasible":
        raise LPError("fidelity LP infeasible: the unit effect is not in the cone of the rays")
    if not res.success:
        raise LPError(f"fidelity LP failed: {res.status}")
    return res


def _check_pair(s1: State, s2: State):
    if s1.space != s2.space:
        raise DimensionError("states belong to different spaces")


def fidelity(s1: State, s2: State, *, rays: int | None = None, method: str = "lp",
             n_samples: int = 10_000, seed: int = 0) -> FidelityResult:
    """Fidelity by ray LP (``method="lp"``) or the sampling oracle (``"sampled"``).

    For the Bloch ball, ``rays`` overrides the number of grid directions, and
    a few boundary effects aligned with the two states are added to the grid.
    The reported ``gap_bound`` is the decrease obtained by doubling the grid
    from ``rays // 2`` (a heuristic; the ray sets are nested).
    """
    _check_pair(s1, s2)
    if method == "sampled":
        sr = fidelity_sampled(s1, s2, n_samples, seed)
        return FidelityResult(sr.upper_bound, sr.best_measurement, "sampled", gap_bound=np.inf,
                              n_rays=len(s1.space.effect_rays))
    if method != "lp":
        raise ValueError(f"unknown method {method!r}")
    space = s1.space
    if len(space.effect_rays) == 0:
        raise LPError("space has no effect rays")
    R = space.effect_rays
    extra = np.empty((0, space.size))
    if space.geometry == "ball":
        if rays is not None:
            from .models import bloch_rays
            R = bloch_rays(rays)
        extra = _adapted_ball_rays(s1.coords, s2.coords)
    res = _ray_lp(space, np.vstack([R, extra]), s1.coords, s2.coords)
    R_all = np.vstack([R, extra])
    lam = res.x
    outcomes = [(f"r{i}", lam[i] * R_all[i]) for i in np.flatnonzero(lam > 1e-14)]
    M = Measurement([(lab, Effect(f, space, check=False)) for lab, f in outcomes], check=False)
    E = M.matrix()
    p, q = _snap(E @ s1.coords), _snap(E @ s2.coords)
    value = float(np.sqrt(p * q).sum())
    if np.array_equal(s1.coords, s2.coords):
        value = 1.0
    value = min(max(value, 0.0), 1.0)
    dual = float(res.dual @ (space.basis @ space.unit))
    if space.geometry == "polytope":
        return FidelityResult(value, M, "exact-LP", 0.0, lam, len(R), dual)
    half = len(R) // 2
    gap = 0.0
    if half >= 4:
        try:
            coarse = _ray_lp(space, np.vstack([R[:half], extra]), s1.coords, s2.coords).fun
            gap = max(coarse - res.fun, 0.0)
        except LPError:
            gap = np.inf
    return FidelityResult(value, M, "discretized-LP", gap, lam, len(R_all), dual)


def _adapted_ball_rays(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Boundary effects aligned with the two states: +-a, +-b, +-(a+b), +-(a-b).

    Every ``(d/2, 1/2)`` with a unit ``d`` is an extremal effect of the ball,
    so adding them keeps the LP an upper bound; for pure states the effect
    along one of the states is optimal, which the grid alone only approaches
    to first order in its angular spacing.
    """
    a, b = x1[:-1], x2[:-1]
    dirs = []
    for v in (a, b, a + b, a - b):
        n = float(np.linalg.norm(v))
        if n > 1e-12:
            dirs += [v / n, -v / n]
    if not dirs:
        return np.empty((0, x1.size))
    d = np.array(dirs)
    return np.hstack([0.5 * d, np.full((len(d), 1), 0.5)])


@dataclass
class SampledFidelity:
    upper_bound: float
    best_measurement: Measurement
    n_samples: int
    values: np.ndarray = field(repr=False, default=None)


def _measurement_vertices(space: StateSpace, rng: np.random.Generator, count: int) -> np.ndarray:
    """Vertices of the ray-measurement polytope from random LP objectives."""
    R = space.effect_rays
    A, b = effect_cone_decomposition(R, space.basis, space.unit)
    out = []
    for _ in range(count):
        res = solve_lp(rng.standard_normal(len(R)), A, b)
        if res.status == "unbounded":
            res = solve_lp(rng.random(len(R)), A, b)
        if res.success:
            out.append(res.x)
    if not out:
        raise LPError("no complete ray measurement exists")
    return np.unique(np.round(np.array(out), 14), axis=0)


def random_measurement_weights(space: StateSpace, n: int, rng: np.random.Generator,
                               n_vertices: int = 32) -> np.ndarray:
    """``n`` random feasible ray-weight vectors (convex mixtures of LP vertices)."""
    V = _measurement_vertices(space, rng, n_vertices)
    mix = rng.dirichlet(np.full(len(V), 0.5), size=n)
    return mix @ V


def fidelity_sampled(s1: State, s2: State, n_samples: int = 10_000, seed: int = 0, *,
                     max_groups: int | None = None) -> SampledFidelity:
    """Upper bound on the fidelity from random valid measurements.

    Each sample is a random ray measurement (a mixture of LP vertices of the
    measurement polytope) followed by a random coarse-graining of its
    outcomes; every measurement arises this way.
    """
    _check_pair(s1, s2)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    space = s1.space
    R = space.effect_rays
    rng = np.random.default_rng(seed)
    lam = random_measurement_weights(space, n_samples, rng)
    # a quarter of the samples use pure LP vertices (sharpest measurements)
    V = _measurement_vertices(space, rng, 8)
    k = max(1, n_samples // 4)
    lam[:k] = V[rng.integers(0, len(V), size=k)]
    n_rays = len(R)
    g_max = max_groups or n_rays
    n_groups = rng.integers(1, g_max + 1, size=n_samples)
    n_groups[: max(1, n_samples // 2)] = g_max
    groups = (rng.random((n_samples, n_rays)) * n_groups[:, None]).astype(np.int64)
    ident = np.arange(n_rays)
    groups[: max(1, n_samples // 2)] = ident
    r1, r2 = _snap(R @ s1.coords), _snap(R @ s2.coords)
    vals = _kernels.grouped_bhattacharyya(lam * r1, lam * r2, groups, g_max)
    best = int(np.argmin(vals))
    M = _coarse_measurement(space, lam[best], groups[best])
    return SampledFidelity(float(min(vals[best], 1.0)), M, n_samples, vals)


def _coarse_measurement(space: StateSpace, lam: np.ndarray, groups: np.ndarray) -> Measurement:
    R = space.effect_rays
    outcomes = []
    for g in np.unique(groups):
        f = (lam[groups == g, None] * R[groups == g]).sum(axis=0)
        if np.abs(f).max() > 0:
            outcomes.append((f"g{g}", Effect(f, space, check=False)))
    return Measurement(outcomes, check=False)


def uhlmann_fidelity(bloch1, bloch2) -> float:
    """Root fidelity ``tr sqrt(sqrt(rho) sigma sqrt(rho))`` of two qubit states.

    Uses the 2x2 closed form ``(tr sqrt M)^2 = tr M + 2 sqrt(det M)``.
    """
    a = np.asarray(bloch1, dtype=np.float64)
    b = np.asarray(bloch2, dtype=np.float64)
    if a.shape != (3,) or b.shape != (3,):
        raise DimensionError("Bloch vectors must have three components")
    na, nb = float(a @ a), float(b @ b)
    if na > 1 + 1e-12 or nb > 1 + 1e-12:
        raise GPTError("Bloch vector norm exceeds 1")
    det = max(0.0, (1 - na) * (1 - nb))
    return float(np.sqrt(max(0.0, (1 + a @ b + np.sqrt(det)) / 2)))


def orthogonality_certificate(s1: State, s2: State, *, tol: float | None = None) -> Measurement | None:
    """Two-outcome measurement with disjoint outcome supports, if the fidelity is 0."""
    t = resolve_tol(tol)
    res = fidelity(s1, s2)
    if res.value > t:
        return None
    M = res.optimal_measurement
    E = M.matrix()
    p, q = E @ s1.coords, E @ s2.coords
    first = p > q
    f1 = E[first].sum(axis=0)
    f2 = E[~first].sum(axis=0)
    space = s1.space
    return Measurement([("1", Effect(f1, space, check=False)), ("2", Effect(f2, space, check=False))],
                       tol=max(t, 1e-9))


@dataclass
class PropertyReport:
    n_trials: int
    submultiplicativity: float = 0.0
    stability: float = 0.0
    invariance: float = 0.0
    worst: dict = field(default_factory=dict)

    def passed(self, tol: float = 1e-9) -> bool:
        return max(self.submultiplicativity, self.stability, self.invariance) <= tol

    def to_dict(self) -> dict:
        return {"n_trials": self.n_trials, "submultiplicativity_violation": self.submultiplicativity,
                "stability_deviation": self.stability, "invariance_deviation": self.invariance,
                "worst": self.worst}


def _random_state(space: StateSpace, rng: np.random.Generator, pure_prob: float = 0.2) -> State:
    n = len(space.pure_states)
    if rng.random() < pure_prob:
        return space.vertex(int(rng.integers(n)))
    return State(rng.dirichlet(np.ones(n)) @ space.pure_states, space, check=False)


def verify_fidelity_properties(spaces, n_trials: int = 100, seed: int = 0) -> PropertyReport:
    """Worst observed violation of sub-multiplicativity, stability and invariance.

    Each trial draws a space pair from ``spaces`` (a space or a list), random
    states and a random vertex-permutation symmetry, and measures

    * ``F(s1 (x) t1, s2 (x) t2) - F(s1, s2) F(t1, t2)`` (should be <= 0),
    * ``|F(s1 (x) t, s2 (x) t) - F(s1, s2)|``,
    * ``|F(G s1, G s2) - F(s1, s2)|``.
    """
    from .tensor import min_tensor_space, product_state
    from .transforms import apply, random_symmetry

    if isinstance(spaces, StateSpace):
        spaces = [spaces]
    spaces = list(spaces)
    streams = np.random.SeedSequence(seed).spawn(n_trials)
    rep = PropertyReport(n_trials)
    for k, ss in enumerate(streams):
        rng = np.random.default_rng(ss)
        A = spaces[int(rng.integers(len(spaces)))]
        B = spaces[int(rng.integers(len(spaces)))]
        s1, s2 = _random_state(A, rng), _random_state(A, rng)
        t1, t2 = _random_state(B, rng), _random_state(B, rng)
        min_tensor_space(A, B)
        f_s = fidelity(s1, s2).value
        f_t = fidelity(t1, t2).value
        joint = fidelity(product_state(s1, t1).as_state(), product_state(s2, t2).as_state()).value
        v1 = joint - f_s * f_t
        t_fixed = t1 if k % 2 else B.vertex(int(rng.integers(len(B.pure_states))))
        stab = abs(fidelity(product_state(s1, t_fixed).as_state(),
                            product_state(s2, t_fixed).as_state()).value - f_s)
        G = random_symmetry(A, rng)
        inv = abs(fidelity(apply(G, s1), apply(G, s2)).value - f_s)
        for name, v in (("submultiplicativity", v1), ("stability", stab), ("invariance", inv)):
            if v > getattr(rep, name):
                setattr(rep, name, float(v))
                rep.worst[name] = {"trial": k, "space_a": A.label, "space_b": B.label, "value": float(v)}
    rep.submultiplicativity = max(rep.submultiplicativity, 0.0)
    return rep
