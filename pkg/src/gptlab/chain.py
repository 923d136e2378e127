"""Repeated-measurement chains: simulation, premise checks and audit.

A chain has a system ``S`` and apparatuses ``A_1..A_k`` prepared in blank
states.  Stage ``i`` applies ``Gamma_i`` (acting on ``S (x) A_i``) to the
current system state and a fresh blank, splits the product-form output into a
new system state and a record on ``A_i``, and repeats.  The carried state at
stage ``i`` is the system state tensored with the stage-0 records of the
earlier stages; its fidelity must obey

    F(c_0) <= F(c_j) * F_rec**j,    F_rec = F(a_i^u, a_i^v),

so records with ``F_rec < 1`` force the two inputs to be orthogonal.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .core import State, StateSpace, resolve_tol
from .errors import ChainInequalityError, NotInvertibleError, ScenarioError, TraceFormatError
from .fidelity import fidelity
from .tensor import is_product_form, min_tensor_space
from .transforms import Transformation, verify_invertible

OUTCOMES = ("CONSISTENT", "VIOLATION")
PREMISES = ("invertibility", "product-form", "weak-repeatability", "record-distinguishability",
            "orthogonality-chain", "none")
_FULL_CHECK_LIMIT = 4096


@dataclass(eq=False)
class ChainScenario:
    system_space: StateSpace
    apparatus_spaces: Sequence[StateSpace]
    blanks: Sequence[State]
    dynamics: Sequence[Transformation]
    inputs: tuple[State, State]
    j_max: int = 50
    tol: float | None = None
    label: str = ""

    def __post_init__(self):
        self.apparatus_spaces = tuple(self.apparatus_spaces)
        self.blanks = tuple(self.blanks)
        self.dynamics = tuple(self.dynamics)
        self.inputs = tuple(self.inputs)
        self.tol = resolve_tol(self.tol)
        k = len(self.apparatus_spaces)
        if k == 0:
            raise ScenarioError("a chain needs at least one apparatus")
        if len(self.blanks) != k or len(self.dynamics) != k:
            raise ScenarioError(f"need one blank and one transformation per apparatus ({k})")
        if len(self.inputs) != 2:
            raise ScenarioError("inputs must be a pair (u, v)")
        if int(self.j_max) < 1:
            raise ScenarioError("j_max must be >= 1")
        self.j_max = int(self.j_max)
        for w, s in zip("uv", self.inputs):
            if s.space != self.system_space:
                raise ScenarioError(f"input {w} does not belong to the system space")
        for i, (A, a, G) in enumerate(zip(self.apparatus_spaces, self.blanks, self.dynamics), start=1):
            if a.space != A:
                raise ScenarioError(f"blank {i} does not belong to apparatus {i}")
            pair = min_tensor_space(self.system_space, A)
            if G.domain != pair or G.codomain != pair:
                raise ScenarioError(f"dynamics {i} must map system (x) apparatus {i} to itself")
            if G.certificate is None:
                try:
                    verify_invertible(G, self.tol)
                except NotInvertibleError as exc:
                    raise ScenarioError(f"dynamics {i} is not invertible: {exc}") from exc

    @property
    def k(self) -> int:
        return len(self.apparatus_spaces)


@dataclass
class BranchStep:
    system: list[float]
    next_system: list[float]
    record: list[float]
    product_deviation: float
    record_residual: float
    system_change: float


@dataclass
class StepRecord:
    j: int
    u: BranchStep
    v: BranchStep
    f_record: float
    f_next_with_record: float
    preservation: float | None = None
    stability: float | None = None
    submultiplicativity_slack: float = 0.0


@dataclass
class StageTrace:
    stage: int
    f_record: float
    f_system: list[float]
    steps: list[StepRecord] = field(default_factory=list)
    cycle_start: int | None = None
    period: int | None = None
    records: dict = field(default_factory=dict)

    def f_system_at(self, j: int) -> float:
        """``F(c_j)``, extended periodically past a detected cycle; 1 when unknown."""
        if j < len(self.f_system):
            return self.f_system[j]
        if self.cycle_start is not None and self.period:
            return self.f_system[self.cycle_start + (j - self.cycle_start) % self.period]
        return 1.0


@dataclass
class Verdict:
    outcome: str
    violated_premise: str
    evidence: dict
    orthogonality_chain: list[float]
    epsilons: list[float] = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return self.outcome == "CONSISTENT"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ChainTrace:
    label: str
    j_max: int
    tol: float
    certificates: list[dict]
    stages: list[StageTrace]
    final_fidelity: float
    verdict: Verdict | None = None

    @property
    def f_initial(self) -> float:
        return self.stages[0].f_system[0]

    @property
    def orthogonality_chain(self) -> list[float]:
        return [st.f_system[0] for st in self.stages] + [self.final_fidelity]

    def to_dict(self) -> dict:
        return {"label": self.label, "j_max": self.j_max, "tol": self.tol,
                "certificates": self.certificates,
                "stages": [asdict(st) for st in self.stages],
                "final_fidelity": self.final_fidelity,
                "verdict": None if self.verdict is None else self.verdict.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "ChainTrace":
        try:
            return _trace_from_dict(d)
        except TraceFormatError:
            raise
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise TraceFormatError(f"malformed trace: {exc!r}") from exc

    def csv_rows(self) -> list[tuple]:
        """``(stage, j, F_system, F_record, bound)`` for ``j = 0..j_max``."""
        rows = []
        for st in self.stages:
            for j in range(self.j_max + 1):
                rows.append((st.stage, j, st.f_system_at(j), st.f_record, st.f_record ** j))
        return rows


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise TraceFormatError(f"missing field {where}.{key}")
    return d[key]


def _branch_from_dict(d: dict, where: str) -> BranchStep:
    return BranchStep(
        system=[float(x) for x in d.get("system", [])],
        next_system=[float(x) for x in d.get("next_system", [])],
        record=[float(x) for x in d.get("record", [])],
        product_deviation=float(_require(d, "product_deviation", where)),
        record_residual=float(_require(d, "record_residual", where)),
        system_change=float(d.get("system_change", 0.0)))


def _trace_from_dict(d: dict) -> ChainTrace:
    if not isinstance(d, dict):
        raise TraceFormatError("trace must be a JSON object")
    stages = []
    for n, sd in enumerate(_require(d, "stages", "trace")):
        where = f"stages[{n}]"
        steps = []
        for m, p in enumerate(sd.get("steps", [])):
            w = f"{where}.steps[{m}]"
            steps.append(StepRecord(
                j=int(_require(p, "j", w)),
                u=_branch_from_dict(_require(p, "u", w), w + ".u"),
                v=_branch_from_dict(_require(p, "v", w), w + ".v"),
                f_record=float(p.get("f_record", sd.get("f_record"))),
                f_next_with_record=float(p.get("f_next_with_record", 0.0)),
                preservation=p.get("preservation"),
                stability=p.get("stability"),
                submultiplicativity_slack=float(p.get("submultiplicativity_slack", 0.0))))
        f_sys = [float(x) for x in _require(sd, "f_system", where)]
        if not f_sys:
            raise TraceFormatError(f"{where}.f_system is empty")
        stages.append(StageTrace(stage=int(sd.get("stage", n + 1)),
                                 f_record=float(_require(sd, "f_record", where)),
                                 f_system=f_sys, steps=steps,
                                 cycle_start=sd.get("cycle_start"), period=sd.get("period"),
                                 records=sd.get("records", {})))
    if not stages:
        raise TraceFormatError("trace has no stages")
    for x in [s.f_record for s in stages] + [f for s in stages for f in s.f_system]:
        if not (-1e-9 <= x <= 1 + 1e-9):
            raise TraceFormatError(f"fidelity {x!r} outside [0, 1]")
    certs = d.get("certificates")
    if certs is None:
        raise TraceFormatError("missing field trace.certificates")
    vd = d.get("verdict")
    verdict = None if vd is None else Verdict(**vd)
    return ChainTrace(label=str(d.get("label", "")), j_max=int(_require(d, "j_max", "trace")),
                      tol=float(d.get("tol", resolve_tol(None))), certificates=list(certs),
                      stages=stages, final_fidelity=float(d.get("final_fidelity", stages[-1].f_system[0])),
                      verdict=verdict)


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

def _fid(xu: np.ndarray, xv: np.ndarray, spaces: Sequence[StateSpace]) -> float:
    space = min_tensor_space(*spaces)
    return fidelity(State(xu, space, check=False), State(xv, space, check=False)).value


def _kron(vectors) -> np.ndarray:
    out = np.ones(1)
    for v in vectors:
        out = np.kron(out, v)
    return out


def _embed(local: np.ndarray, S: StateSpace, aps: Sequence[StateSpace], i: int,
           others: Sequence[np.ndarray]) -> np.ndarray:
    """Joint vector on ``S, A_1..A_k`` from a state on ``S (x) A_i`` and the other factors."""
    t = local.reshape(S.size, aps[i].size)
    order = [0, i + 1]
    for n, vec in enumerate(others):
        t = np.multiply.outer(t, vec)
        order.append(n + 1 if n < i else n + 2)
    return np.transpose(t, np.argsort(order)).ravel()


def _split(out: np.ndarray, S: StateSpace, A: StateSpace, pair: StateSpace, t: float):
    form = is_product_form(State(out, pair, check=False), t)
    omega = out.reshape(S.size, A.size)
    return omega @ A.unit, S.unit @ omega, form.deviation


def run_chain(sc: ChainScenario, *, full_checks: bool | None = None) -> ChainTrace:
    """Simulate every stage for both branches and record the fidelity chain.

    ``full_checks`` computes fidelities on the whole composite (preservation
    and stability); by default only when it has at most 4096 pure states.
    """
    t = sc.tol
    S, aps = sc.system_space, sc.apparatus_spaces
    if full_checks is None:
        n_full = len(S.pure_states) * math.prod(len(A.pure_states) for A in aps)
        full_checks = n_full <= _FULL_CHECK_LIMIT
    certs = []
    for i, G in enumerate(sc.dynamics, start=1):
        c = G.certificate or verify_invertible(G, t)
        certs.append({"stage": i, "certified": True, "roundtrip_error": c.max_roundtrip_error,
                      "condition_number": c.condition_number})

    start = {w: s.coords.copy() for w, s in zip("uv", sc.inputs)}
    records: dict[str, list[np.ndarray]] = {"u": [], "v": []}
    stages = []
    for i in range(sc.k):
        A, blank, G = aps[i], sc.blanks[i].coords, sc.dynamics[i].matrix
        pair = min_tensor_space(S, A)
        carried = [S] + list(aps[:i])
        with_record = carried + [A]
        blanks_after = [b.coords for b in sc.blanks[i + 1:]]

        def carry(x, w):
            return _kron([x] + records[w])

        f_rec0 = None
        rec0 = {}
        cur = dict(start)
        f_sys = [_fid(carry(cur["u"], "u"), carry(cur["v"], "v"), carried)]
        history = [(cur["u"], cur["v"])]
        stage = StageTrace(stage=i + 1, f_record=0.0, f_system=f_sys)
        for j in range(sc.j_max):
            branch, nxt, rec, outs = {}, {}, {}, {}
            for w in "uv":
                out = G @ np.kron(cur[w], blank)
                nxt[w], rec[w], dev = _split(out, S, A, pair, t)
                outs[w] = out
                if j == 0:
                    rec0[w] = rec[w]
                res = 1.0 - _fid(rec[w], rec0[w], [A])
                change = 1.0 - _fid(nxt[w], cur[w], [S])
                branch[w] = BranchStep(cur[w].tolist(), nxt[w].tolist(), rec[w].tolist(),
                                       dev, max(res, 0.0), max(change, 0.0))
            f_r = _fid(rec["u"], rec["v"], [A])
            if j == 0:
                f_rec0 = f_r
            f_next = _fid(carry(nxt["u"], "u"), carry(nxt["v"], "v"), carried)
            f_nr = _fid(np.kron(carry(nxt["u"], "u"), rec["u"]),
                        np.kron(carry(nxt["v"], "v"), rec["v"]), with_record)
            step = StepRecord(j, branch["u"], branch["v"], f_r, f_nr,
                              submultiplicativity_slack=f_nr - f_next * f_r)
            if full_checks:
                full = [S] + list(aps)
                fin = _fid(_kron([carry(cur["u"], "u"), blank] + blanks_after),
                           _kron([carry(cur["v"], "v"), blank] + blanks_after), full)
                fout = [_embed(outs[w], S, aps, i, records[w] + blanks_after) for w in "uv"]
                step.preservation = abs(_fid(fout[0], fout[1], full) - fin)
                step.stability = abs(fin - f_sys[-1])
            stage.steps.append(step)
            f_sys.append(f_next)
            hit = None
            for m, (hu, hv) in enumerate(history):
                if np.abs(nxt["u"] - hu).max() <= t and np.abs(nxt["v"] - hv).max() <= t:
                    hit = m
                    break
            if hit is not None:
                f_sys.pop()
                stage.cycle_start, stage.period = hit, j + 1 - hit
                break
            history.append((nxt["u"], nxt["v"]))
            cur = nxt
        stage.f_record = f_rec0
        stage.records = {w: rec0[w].tolist() for w in "uv"}
        stages.append(stage)
        start = {w: np.asarray(getattr(stage.steps[0], w).next_system) for w in "uv"}
        for w in "uv":
            records[w].append(rec0[w])
    full = [S] + list(aps)
    final = _fid(_kron([start["u"]] + records["u"]), _kron([start["v"]] + records["v"]), full)
    trace = ChainTrace(sc.label, sc.j_max, t, certs, stages, final)
    trace.verdict = audit(trace)
    return trace


# ---------------------------------------------------------------------------
# analysis
# ---------------------------------------------------------------------------

@dataclass
class StageRepeatability:
    stage: int
    classification: str
    max_record_residual: dict
    max_system_change: dict
    worst_step: int | None = None


@dataclass
class RepeatabilityReport:
    stages: list[StageRepeatability]

    @property
    def ok(self) -> bool:
        return all(s.classification != "violating" for s in self.stages)

    def classification(self, stage: int = 1) -> str:
        return self.stages[stage - 1].classification


def check_weak_repeatability(trace: ChainTrace, tol: float | None = None) -> RepeatabilityReport:
    """Classify each stage as ``strict``, ``weak`` or ``violating``."""
    t = trace.tol if tol is None else tol
    out = []
    for st in trace.stages:
        res = {w: max((getattr(p, w).record_residual for p in st.steps), default=0.0) for w in "uv"}
        chg = {w: max((getattr(p, w).system_change for p in st.steps), default=0.0) for w in "uv"}
        worst = None
        if max(res.values()) > t:
            cls = "violating"
            worst = next(p.j for p in st.steps if max(p.u.record_residual, p.v.record_residual) > t)
        elif max(chg.values()) > t:
            cls = "weak"
        else:
            cls = "strict"
        out.append(StageRepeatability(st.stage, cls, res, chg, worst))
    return RepeatabilityReport(out)


@dataclass
class StageBound:
    stage: int
    f_record: float
    bounds: np.ndarray
    f_system: np.ndarray
    f_initial: float
    violations: list[int]
    no_information: bool

    def bound(self, j: int) -> float:
        return float(self.bounds[j])


def bound_sequence(trace: ChainTrace, *, strict: bool = False, tol: float | None = None) -> list[StageBound]:
    """Geometric bounds ``F_rec**j`` and the measured inequality per stage.

    Checks ``F(c_0) <= F(c_j) * F_rec**j + tol`` for ``j = 0..j_max``;
    ``strict=True`` raises ``ChainInequalityError`` on the first failure.
    """
    t = trace.tol if tol is None else tol
    out = []
    for st in trace.stages:
        js = np.arange(trace.j_max + 1)
        bounds = np.array([st.f_record ** int(j) for j in js])
        fs = np.array([st.f_system_at(int(j)) for j in js])
        f0 = st.f_system[0]
        bad = [int(j) for j in js if f0 > fs[j] * bounds[j] + t]
        if bad and strict:
            j = bad[0]
            raise ChainInequalityError(
                f"stage {st.stage}, j={j}: F(c_0)={f0!r} exceeds F(c_j)*F_rec^j={fs[j] * bounds[j]!r}")
        out.append(StageBound(st.stage, st.f_record, bounds, fs, f0, bad, st.f_record >= 1 - t))
    return out


def _violation(premise: str, evidence: dict, chain: list[float], eps: list[float]) -> Verdict:
    return Verdict("VIOLATION", premise, evidence, chain, eps)


def audit(claimed, *, tol: float | None = None) -> Verdict:
    """Check every premise of the chain argument, then the orthogonality chain.

    Premises are checked in the order invertibility, product form, weak
    repeatability, record distinguishability; the first failure decides the
    verdict. With all premises intact each chain entry must be at most
    ``eps_i = max(tol, F_rec_i**j_max)``.
    """
    trace = claimed if isinstance(claimed, ChainTrace) else ChainTrace.from_dict(claimed)
    t = trace.tol if tol is None else tol
    chain = trace.orthogonality_chain
    eps = [max(t, st.f_record ** trace.j_max) for st in trace.stages]

    stage_ids = {st.stage for st in trace.stages}
    certified = {int(c.get("stage", 0)) for c in trace.certificates if c.get("certified")}
    for st in trace.stages:
        if st.stage not in certified:
            return _violation("invertibility", {"stage": st.stage, "reason": "no invertibility certificate"},
                              chain, eps)
    for c in trace.certificates:
        if int(c.get("stage", 0)) in stage_ids and float(c.get("roundtrip_error", 0.0)) > t:
            return _violation("invertibility", {"stage": int(c["stage"]),
                                                "roundtrip_error": float(c["roundtrip_error"])}, chain, eps)
    for st in trace.stages:
        for p in st.steps:
            if p.preservation is not None and p.preservation > t:
                return _violation("invertibility", {"stage": st.stage, "j": p.j,
                                                    "fidelity_change": p.preservation}, chain, eps)

    for st in trace.stages:
        for p in st.steps:
            for w in "uv":
                dev = getattr(p, w).product_deviation
                if dev > t:
                    return _violation("product-form", {"stage": st.stage, "j": p.j, "branch": w,
                                                       "deviation": dev}, chain, eps)

    for st in trace.stages:
        for p in st.steps:
            for w in "uv":
                res = getattr(p, w).record_residual
                if res > t:
                    return _violation("weak-repeatability", {"stage": st.stage, "j": p.j, "branch": w,
                                                             "residual": res}, chain, eps)

    for st in trace.stages:
        if st.f_record >= 1 - t:
            return _violation("record-distinguishability", {"stage": st.stage, "f_record": st.f_record},
                              chain, eps)

    for sb in bound_sequence(trace, tol=t):
        if sb.violations:
            j = sb.violations[0]
            return _violation("orthogonality-chain", {
                "stage": sb.stage, "j": j, "f_initial": sb.f_initial, "f_system": float(sb.f_system[j]),
                "bound": float(sb.bounds[j]), "excess": float(sb.f_initial - sb.f_system[j] * sb.bounds[j])},
                chain, eps)
    for n, value in enumerate(chain):
        e = eps[min(n, len(eps) - 1)]
        if value > e:
            return _violation("orthogonality-chain", {"index": n, "fidelity": value, "epsilon": e},
                              chain, eps)
    return Verdict("CONSISTENT", "none", {"max_chain_value": max(chain), "epsilon": max(eps)}, chain, eps)


def verdict_exit_code(v: Verdict) -> int:
    return 0 if v.consistent else 2
