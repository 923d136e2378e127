"""Built-in GPT models and chain scenarios."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .core import StateSpace, validate
from .errors import GPTError
from .tensor import MaxTensorState, min_tensor_space

# generalized golden ratio for two dimensions (plastic number): 1/rho, 1/rho^2
_R2_A1 = 0.7548776662466927
_R2_A2 = 0.5698402909980532


@lru_cache(maxsize=None)
def classical_simplex(n: int) -> StateSpace:
    """Probability simplex on ``n`` outcomes; states are ``(p_1..p_n, 1)``."""
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise GPTError(f"classical simplex needs n >= 2, got {n!r}")
    n = int(n)
    P = np.hstack([np.eye(n), np.ones((n, 1))])
    R = np.hstack([np.eye(n), np.zeros((n, 1))])
    return StateSpace(P, R, label=f"classical:{n}", metadata={"ref": f"builtin:classical:{n}"})


@lru_cache(maxsize=None)
def gbit() -> StateSpace:
    """Square state space with vertices ``(+-1, +-1)``, counter-clockwise from ``(1, 1)``."""
    P = np.array([[1.0, 1.0, 1.0], [-1.0, 1.0, 1.0], [-1.0, -1.0, 1.0], [1.0, -1.0, 1.0]])
    # edge functionals (1 + x)/2, (1 - x)/2, (1 + y)/2, (1 - y)/2
    R = np.array([[0.5, 0.0, 0.5], [-0.5, 0.0, 0.5], [0.0, 0.5, 0.5], [0.0, -0.5, 0.5]])
    return StateSpace(P, R, label="gbit", metadata={"ref": "builtin:gbit"})


def bloch_directions(n: int) -> np.ndarray:
    """``n`` (even) unit vectors in antipodal pairs, prefix-nested.

    Pair ``k`` uses the two-dimensional golden-ratio sequence mapped to the
    sphere by an equal-area map, so the first ``m`` directions of a longer
    list are exactly the ``m``-direction list.
    """
    if n < 2 or n % 2:
        raise GPTError(f"direction count must be even and >= 2, got {n!r}")
    k = np.arange(n // 2, dtype=np.float64)
    z = 1.0 - 2.0 * np.mod(k * _R2_A1 + 0.5, 1.0)
    phi = 2.0 * np.pi * np.mod(k * _R2_A2 + 0.5, 1.0)
    rho = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    d = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    out = np.empty((n, 3))
    out[0::2] = d
    out[1::2] = -d
    return out


def bloch_rays(n: int) -> np.ndarray:
    """Effect rays ``(n/2, 1/2)`` of the qubit: projectors onto ``bloch_directions(n)``."""
    d = bloch_directions(n)
    return np.hstack([0.5 * d, np.full((n, 1), 0.5)])


@lru_cache(maxsize=8)
def bloch_ball(n_rays: int = 10_000) -> StateSpace:
    """Qubit as the unit ball in R^3, with a discretized effect cone (approximate)."""
    if n_rays < 6:
        raise GPTError(f"bloch_ball needs n_rays >= 6, got {n_rays!r}")
    n_rays += n_rays % 2
    d = bloch_directions(n_rays)
    P = np.hstack([d, np.ones((n_rays, 1))])
    return StateSpace(P, bloch_rays(n_rays), label=f"bloch:{n_rays}", geometry="ball",
                      metadata={"ref": f"builtin:bloch:{n_rays}"})


def pr_box() -> MaxTensorState:
    """Popescu-Rohrlich box on gbit x gbit: outputs agree unless both inputs are y."""
    W = np.array([[1.0, 1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 0.0, 1.0]])
    g = gbit()
    return MaxTensorState.from_bilinear(W, (g, g))


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

def _single(name: str) -> StateSpace:
    parts = name.split(":")
    head = parts[0]
    try:
        if head == "classical" and len(parts) == 2:
            return classical_simplex(int(parts[1]))
        if head == "gbit" and len(parts) == 1:
            return gbit()
        if head == "bloch" and len(parts) <= 2:
            return bloch_ball(int(parts[1])) if len(parts) == 2 else bloch_ball()
    except ValueError:
        pass
    raise GPTError(f"unknown model reference 'builtin:{name}'")


def get_model(ref: str) -> StateSpace:
    """Resolve ``builtin:classical:N``, ``builtin:gbit``, ``builtin:bloch[:N]``.

    ``*`` joins factors of a minimal tensor product, e.g. ``builtin:gbit*gbit``.
    """
    if not ref.startswith("builtin:"):
        raise GPTError(f"unknown model reference {ref!r}")
    names = ref[len("builtin:"):].split("*")
    spaces = [_single(n) for n in names]
    if len(spaces) == 1:
        return spaces[0]
    space = min_tensor_space(*spaces)
    space.metadata.setdefault("ref", ref)
    return space


@dataclass(frozen=True)
class ModelCatalog:
    entries: dict[str, Callable[[], StateSpace]] = field(default_factory=dict)

    def names(self) -> list[str]:
        return list(self.entries)

    def get(self, ref: str) -> StateSpace:
        if ref in self.entries:
            return self.entries[ref]()
        return get_model(ref)

    def describe(self) -> list[dict]:
        rows = []
        for ref in self.entries:
            space = self.get(ref)
            rep = validate(space)
            rows.append({"ref": ref, "dim": space.dim, "pure_states": len(space.pure_states),
                         "effect_rays": len(space.effect_rays), "geometry": space.geometry,
                         "approximate": space.approximate, "valid": rep.ok})
        return rows


_CATALOG_REFS = ["builtin:classical:2", "builtin:classical:3", "builtin:classical:4",
                 "builtin:classical:5", "builtin:classical:6", "builtin:gbit", "builtin:bloch",
                 "builtin:classical:2*classical:2", "builtin:gbit*gbit"]


def catalog() -> ModelCatalog:
    return ModelCatalog({ref: (lambda r=ref: get_model(r)) for ref in _CATALOG_REFS})


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

def cnot_copy(k: int = 2, *, inputs=((1.0, 0.0), (0.0, 1.0)), j_max: int = 50,
              label: str = "cnot-copy"):
    """System bit copied onto ``k`` apparatus bits by controlled-NOT permutations."""
    from .chain import ChainScenario
    from .transforms import permutation_transformation

    bit = classical_simplex(2)
    pair = min_tensor_space(bit, bit)
    # vertex index s*2 + a; (s, a) -> (s, a xor s)
    gamma = permutation_transformation(pair, [0, 1, 3, 2], label="cnot")
    u, v = (bit.state(x) for x in inputs)
    return ChainScenario(bit, [bit] * k, [bit.vertex(0)] * k, [gamma] * k, (u, v),
                         j_max=j_max, label=label)


def oscillating_recorder(*, j_max: int = 50):
    """Trit system recorded on a trit apparatus {blank, U, V}.

    ``(0, blank) -> (1, U)``, ``(1, blank) -> (0, U)``, ``(2, blank) -> (2, V)``;
    the remaining points take the lowest free images in index order.
    """
    from .chain import ChainScenario
    from .transforms import permutation_transformation

    trit = classical_simplex(3)
    pair = min_tensor_space(trit, trit)
    gamma = permutation_transformation(pair, oscillating_permutation(), label="oscillate")
    return ChainScenario(trit, [trit], [trit.vertex(0)], [gamma], (trit.vertex(0), trit.vertex(2)),
                         j_max=j_max, label="oscillating-recorder")


def oscillating_permutation() -> list[int]:
    fixed = {0 * 3 + 0: 1 * 3 + 1, 1 * 3 + 0: 0 * 3 + 1, 2 * 3 + 0: 2 * 3 + 2}
    perm = [-1] * 9
    for src, dst in fixed.items():
        perm[src] = dst
    free = iter(sorted(set(range(9)) - set(fixed.values())))
    for src in range(9):
        if perm[src] < 0:
            perm[src] = next(free)
    return perm


def nonorthogonal_probe(*, j_max: int = 50):
    """cnot-copy with ``s^v`` the uniform mixture: the copy is correlated, not a product."""
    return cnot_copy(2, inputs=((1.0, 0.0), (0.5, 0.5)), j_max=j_max, label="nonorthogonal-probe")


_SCENARIOS = {
    "cnot-copy": cnot_copy,
    "oscillating-recorder": oscillating_recorder,
    "nonorthogonal-probe": nonorthogonal_probe,
}


def builtin_scenarios() -> list:
    return [make() for make in _SCENARIOS.values()]


def get_scenario(ref: str):
    name = ref[len("builtin:"):] if ref.startswith("builtin:") else ref
    if name not in _SCENARIOS:
        raise GPTError(f"unknown scenario {ref!r}; builtins: {', '.join(_SCENARIOS)}")
    return _SCENARIOS[name]()


def scenario_names() -> list[str]:
    return list(_SCENARIOS)
