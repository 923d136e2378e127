"""JSON reading and writing for models, transformations, states, scenarios and traces.

Floats are written with Python's shortest round-trip repr, so reloading
reproduces every coordinate bit for bit and output bytes depend only on the
values.
"""

from __future__ import annotations

import json
import math
import os
from pathlib import Path

import numpy as np

from .chain import ChainScenario, ChainTrace
from .core import State, StateSpace
from .errors import GPTError, SchemaError
from .models import get_model, get_scenario
from .tensor import MaxTensorState, MinTensorState, ProductState, min_tensor_space
from .transforms import Transformation, permutation_transformation


def plain(obj):
    """Recursively convert numpy types to JSON-compatible Python objects.

    Non-finite floats become ``None``.
    """
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def loads(text: str, source: str = "<input>"):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{source}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def read_json(path) -> object:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read {p}: {exc.strerror}") from exc
    return loads(text, str(p))


def _field(d, key: str, where: str):
    if not isinstance(d, dict):
        raise SchemaError(f"{where}: expected an object")
    if key not in d:
        raise SchemaError(f"{where}.{key}: missing required field")
    return d[key]


def _matrix(x, where: str) -> np.ndarray:
    try:
        a = np.array(x, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: expected a numeric matrix") from exc
    if a.ndim != 2:
        raise SchemaError(f"{where}: expected a list of equal-length numeric rows")
    return a


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------

def model_to_dict(space: StateSpace) -> dict:
    if space.factors:
        return {"label": space.label, "factors": [model_to_dict(f) for f in space.factors]}
    d = {"label": space.label, "dim": space.dim, "geometry": space.geometry,
         "pure_states": space.pure_states, "effect_rays": space.effect_rays,
         "metadata": space.metadata}
    return plain(d)


def model_from_dict(d, where: str = "model") -> StateSpace:
    if isinstance(d, str):
        return get_model(d)
    if not isinstance(d, dict):
        raise SchemaError(f"{where}: expected a model object or a builtin reference")
    if "factors" in d:
        factors = [model_from_dict(f, f"{where}.factors[{n}]") for n, f in enumerate(d["factors"])]
        return min_tensor_space(*factors)
    dim = _field(d, "dim", where)
    if not isinstance(dim, int) or dim < 1:
        raise SchemaError(f"{where}.dim: expected a positive integer")
    P = _matrix(_field(d, "pure_states", where), f"{where}.pure_states")
    if P.shape[1] == dim:
        P = np.hstack([P, np.ones((len(P), 1))])
    elif P.shape[1] != dim + 1:
        raise SchemaError(f"{where}.pure_states: rows need {dim} or {dim + 1} entries, got {P.shape[1]}")
    R = None
    if d.get("effect_rays") is not None:
        R = _matrix(d["effect_rays"], f"{where}.effect_rays")
        if R.shape[1] != dim + 1:
            raise SchemaError(f"{where}.effect_rays: rows need {dim + 1} entries, got {R.shape[1]}")
    return StateSpace(P, R, label=str(d.get("label", "")), geometry=d.get("geometry", "polytope"),
                      metadata=d.get("metadata") or {})


def load_model(source) -> StateSpace:
    """Model from a builtin reference or a JSON file, validated on load."""
    s = str(source)
    if s.startswith("builtin:"):
        return get_model(s)
    return model_from_dict(read_json(s), os.path.basename(s))


# ---------------------------------------------------------------------------
# states and transformations
# ---------------------------------------------------------------------------

def state_to_dict(s: State) -> dict:
    return {"coords": plain(s.coords)}


def state_from_dict(d, space: StateSpace, where: str = "state") -> State:
    """State from ``{"coords"}``, ``{"weights"}``, ``{"vertex"}`` or a bare coordinate list."""
    if isinstance(d, list):
        return space.state(d)
    if not isinstance(d, dict):
        raise SchemaError(f"{where}: expected coordinates or an object")
    if "coords" in d:
        return space.state(d["coords"])
    if "weights" in d:
        return space.state_from_weights(d["weights"])
    if "vertex" in d:
        k = d["vertex"]
        if not isinstance(k, int) or not 0 <= k < len(space.pure_states):
            raise SchemaError(f"{where}.vertex: index out of range")
        return space.vertex(k)
    raise SchemaError(f"{where}: expected one of coords, weights, vertex")


def transformation_to_dict(T: Transformation) -> dict:
    d = {"label": T.label}
    if T.permutation is not None:
        d["permutation"] = list(T.permutation)
    else:
        d["matrix"] = plain(T.matrix)
    return d


def transformation_from_dict(d, domain: StateSpace, codomain: StateSpace | None = None,
                             where: str = "transformation") -> Transformation:
    if not isinstance(d, dict):
        raise SchemaError(f"{where}: expected an object")
    if "domain" in d:
        domain = model_from_dict(d["domain"], f"{where}.domain")
    if "codomain" in d:
        codomain = model_from_dict(d["codomain"], f"{where}.codomain")
    label = str(d.get("label", ""))
    if "permutation" in d:
        perm = d["permutation"]
        if not isinstance(perm, list) or sorted(perm) != list(range(len(domain.pure_states))):
            raise SchemaError(f"{where}.permutation: expected a permutation of 0..{len(domain.pure_states) - 1}")
        return permutation_transformation(domain, perm, codomain=codomain, label=label)
    M = _matrix(_field(d, "matrix", where), f"{where}.matrix")
    return Transformation(M, domain, codomain, label=label)


# ---------------------------------------------------------------------------
# composite states
# ---------------------------------------------------------------------------

def composite_to_dict(c) -> dict:
    if isinstance(c, ProductState):
        return {"kind": "product", "spaces": [model_to_dict(s) for s in c.spaces],
                "factors": [state_to_dict(f) for f in c.factors]}
    if isinstance(c, MinTensorState):
        return {"kind": "min_mixture", "spaces": [model_to_dict(s) for s in c.spaces],
                "components": [{"weight": w, "factors": [state_to_dict(f) for f in p.factors]}
                               for w, p in c.components]}
    if isinstance(c, MaxTensorState):
        return {"kind": "max_table", "spaces": [model_to_dict(s) for s in c.spaces], "table": plain(c.table)}
    raise TypeError(f"not a composite state: {type(c).__name__}")


def composite_from_dict(d, where: str = "composite"):
    kind = _field(d, "kind", where)
    spaces = [model_from_dict(s, f"{where}.spaces[{n}]") for n, s in enumerate(_field(d, "spaces", where))]

    def factors(items, w):
        if len(items) != len(spaces):
            raise SchemaError(f"{w}: expected {len(spaces)} factor states")
        return [state_from_dict(x, s, f"{w}[{n}]") for n, (x, s) in enumerate(zip(items, spaces))]

    if kind == "product":
        return ProductState(factors(_field(d, "factors", where), f"{where}.factors"))
    if kind == "min_mixture":
        comps = []
        for n, item in enumerate(_field(d, "components", where)):
            w = f"{where}.components[{n}]"
            comps.append((float(_field(item, "weight", w)),
                          ProductState(factors(_field(item, "factors", w), w + ".factors"))))
        return MinTensorState(comps)
    if kind == "max_table":
        return MaxTensorState(_matrix(_field(d, "table", where), f"{where}.table"), spaces)
    raise SchemaError(f"{where}.kind: expected product, min_mixture or max_table, got {kind!r}")


# ---------------------------------------------------------------------------
# scenarios and traces
# ---------------------------------------------------------------------------

def scenario_to_dict(sc: ChainScenario) -> dict:
    return {"label": sc.label, "model": model_to_dict(sc.system_space),
            "apparatuses": [model_to_dict(A) for A in sc.apparatus_spaces],
            "blanks": [state_to_dict(a) for a in sc.blanks],
            "dynamics": [transformation_to_dict(G) for G in sc.dynamics],
            "inputs": {"u": state_to_dict(sc.inputs[0]), "v": state_to_dict(sc.inputs[1])},
            "j_max": sc.j_max, "tol": sc.tol}


def scenario_from_dict(d, where: str = "scenario") -> ChainScenario:
    system = model_from_dict(_field(d, "model", where), f"{where}.model")
    aps = [model_from_dict(a, f"{where}.apparatuses[{n}]")
           for n, a in enumerate(_field(d, "apparatuses", where))]
    blanks_raw = _field(d, "blanks", where)
    dyn_raw = _field(d, "dynamics", where)
    if len(blanks_raw) != len(aps) or len(dyn_raw) != len(aps):
        raise SchemaError(f"{where}: blanks and dynamics need one entry per apparatus ({len(aps)})")
    blanks = [state_from_dict(b, A, f"{where}.blanks[{n}]") for n, (b, A) in enumerate(zip(blanks_raw, aps))]
    dyn = [transformation_from_dict(g, min_tensor_space(system, A), where=f"{where}.dynamics[{n}]")
           for n, (g, A) in enumerate(zip(dyn_raw, aps))]
    inputs = _field(d, "inputs", where)
    u = state_from_dict(_field(inputs, "u", f"{where}.inputs"), system, f"{where}.inputs.u")
    v = state_from_dict(_field(inputs, "v", f"{where}.inputs"), system, f"{where}.inputs.v")
    return ChainScenario(system, aps, blanks, dyn, (u, v), j_max=int(d.get("j_max", 50)),
                         tol=d.get("tol"), label=str(d.get("label", "")))


def load_scenario(source) -> ChainScenario:
    s = str(source)
    if s.startswith("builtin:"):
        return get_scenario(s)
    return scenario_from_dict(read_json(s), os.path.basename(s))


def load_trace(source) -> ChainTrace:
    d = read_json(source)
    try:
        return ChainTrace.from_dict(d)
    except GPTError as exc:
        raise SchemaError(f"{source}: {exc}") from exc
