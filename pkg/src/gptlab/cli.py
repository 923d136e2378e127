"""``gptlab`` command line: fidelity, property sweeps, chain simulation and audit.

Exit codes: 0 success or CONSISTENT, 2 VIOLATION (or a failed sweep),
1 usage and validation errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import dataclass

import numpy as np

from . import serialize
from .chain import audit, check_weak_repeatability, run_chain
from .core import StateSpace, resolve_tol
from .errors import GPTError
from .fidelity import fidelity, verify_fidelity_properties
from .models import catalog, scenario_names

EXIT_OK, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2


@dataclass
class RunConfig:
    command: str
    tol: float
    seed: int
    fmt: str
    out: str | None


def _parse_vector(text: str, flag: str) -> np.ndarray:
    try:
        return np.array([float(x) for x in text.split(",")], dtype=np.float64)
    except ValueError as exc:
        raise GPTError(f"{flag}: expected comma-separated numbers, got {text!r}") from exc


def _state(space: StateSpace, text: str, kind: str, flag: str, tol: float):
    x = _parse_vector(text, flag)
    if kind == "bary":
        return space.state_from_weights(x, tol=tol)
    return space.state(x, tol=tol)


def _human(obj, indent: int = 0) -> str:
    pad = "  " * indent
    lines = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            if isinstance(v, (dict, list)) and v and not all(isinstance(x, (int, float)) for x in v):
                lines.append(f"{pad}{k}:")
                lines.append(_human(v, indent + 1))
            else:
                lines.append(f"{pad}{k}: {v}")
    elif isinstance(obj, list):
        for v in obj:
            lines.append(_human(v, indent) if isinstance(v, (dict, list)) else f"{pad}- {v}")
    else:
        lines.append(f"{pad}{obj}")
    return "\n".join(lines)


def _emit(cfg: RunConfig, payload, csv_rows=None, csv_header=None) -> None:
    if cfg.fmt == "csv":
        if csv_rows is None:
            raise GPTError("csv output is only available for simulate and audit")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(csv_header)
        for row in csv_rows:
            w.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])
        text = buf.getvalue()
    elif cfg.fmt == "human":
        text = _human(serialize.plain(payload)) + "\n"
    else:
        text = serialize.dumps(payload)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_fidelity(args, cfg: RunConfig) -> int:
    space = serialize.load_model(args.model)
    a = _state(space, args.state_a, args.coords, "--state-a", cfg.tol)
    b = _state(space, args.state_b, args.coords, "--state-b", cfg.tol)
    res = fidelity(a, b, rays=args.rays, method=args.method, n_samples=args.samples, seed=cfg.seed)
    M = res.optimal_measurement
    meas = None
    if M is not None:
        p, q = res.distributions(a, b)
        meas = {"labels": M.labels, "effects": M.matrix(), "p": p, "q": q}
    payload = {"value": res.value, "method": res.method, "gap_bound": res.gap_bound,
               "n_rays": res.n_rays, "optimal_measurement": meas}
    _emit(cfg, payload)
    return EXIT_OK


def _cmd_verify(args, cfg: RunConfig) -> int:
    spaces = [serialize.load_model(m) for m in (args.model or ["builtin:classical:2", "builtin:classical:3",
                                                               "builtin:gbit"])]
    rep = verify_fidelity_properties(spaces, n_trials=args.trials, seed=cfg.seed)
    payload = rep.to_dict()
    payload["passed"] = rep.passed(cfg.tol)
    payload["tol"] = cfg.tol
    _emit(cfg, payload)
    return EXIT_OK if payload["passed"] else EXIT_VIOLATION


_CSV_HEADER = ("stage", "j", "F_system", "F_record", "bound")


def _cmd_simulate(args, cfg: RunConfig) -> int:
    sc = serialize.load_scenario(args.scenario)
    if args.j_max is not None:
        sc.j_max = int(args.j_max)
    if args.tol is not None:
        sc.tol = cfg.tol
    trace = run_chain(sc)
    payload = trace.to_dict()
    payload["repeatability"] = [s.__dict__ for s in check_weak_repeatability(trace).stages]
    _emit(cfg, payload, trace.csv_rows(), _CSV_HEADER)
    return EXIT_OK if trace.verdict.consistent else EXIT_VIOLATION


def _cmd_audit(args, cfg: RunConfig) -> int:
    trace = serialize.load_trace(args.trace)
    verdict = audit(trace, tol=None if args.tol is None else cfg.tol)
    _emit(cfg, {"verdict": verdict.to_dict()}, trace.csv_rows(), _CSV_HEADER)
    return EXIT_OK if verdict.consistent else EXIT_VIOLATION


def _cmd_models(args, cfg: RunConfig) -> int:
    if args.action == "list":
        rows = catalog().describe()
        payload = {"models": rows, "scenarios": [f"builtin:{n}" for n in scenario_names()]}
        _emit(cfg, payload)
        return EXIT_OK
    if args.scenario:
        payload = serialize.scenario_to_dict(serialize.load_scenario(args.scenario))
    elif args.model:
        payload = serialize.model_to_dict(serialize.load_model(args.model))
    else:
        raise GPTError("models export needs --model or --scenario")
    _emit(cfg, payload)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=None, help="absolute tolerance (default GPTLAB_TOL or 1e-9)")
    common.add_argument("--seed", type=int, default=0, help="seed for every random choice")
    common.add_argument("--out", default=None, help="write output to this file")
    common.add_argument("--format", dest="fmt", choices=("json", "csv", "human"), default="json")

    p = argparse.ArgumentParser(prog="gptlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fidelity", parents=[common], help="fidelity of two states")
    f.add_argument("--model", required=True)
    f.add_argument("--state-a", required=True)
    f.add_argument("--state-b", required=True)
    f.add_argument("--coords", choices=("bary", "raw"), default="raw")
    f.add_argument("--rays", type=int, default=None, help="effect-ray count for the Bloch ball")
    f.add_argument("--method", choices=("lp", "sampled"), default="lp")
    f.add_argument("--samples", type=int, default=10_000)

    v = sub.add_parser("verify", parents=[common], help="property sweep of the fidelity")
    v.add_argument("--model", action="append", help="repeatable; default classical:2, classical:3, gbit")
    v.add_argument("--trials", type=int, default=100)

    s = sub.add_parser("simulate", parents=[common], help="run a measurement chain and audit it")
    s.add_argument("--scenario", required=True, help=f"file or builtin:{{{','.join(scenario_names())}}}")
    s.add_argument("--j-max", type=int, default=None)

    a = sub.add_parser("audit", parents=[common], help="audit a trace file")
    a.add_argument("trace")

    m = sub.add_parser("models", parents=[common], help="list or export builtin models and scenarios")
    m.add_argument("action", choices=("list", "export"))
    m.add_argument("--model", default=None)
    m.add_argument("--scenario", default=None)
    return p


_VECTOR_FLAGS = ("--state-a", "--state-b")


def _attach_vectors(argv: list[str]) -> list[str]:
    # "--state-b -0.1,0.4" would otherwise read as a flag; bind the value with "="
    out, it = [], iter(argv)
    for tok in it:
        if tok in _VECTOR_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = _attach_vectors(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    cfg = RunConfig(args.command, resolve_tol(args.tol), args.seed, args.fmt, args.out)
    handlers = {"fidelity": _cmd_fidelity, "verify": _cmd_verify, "simulate": _cmd_simulate,
                "audit": _cmd_audit, "models": _cmd_models}
    try:
        return handlers[args.command](args, cfg)
    except (GPTError, OSError) as exc:
        print(f"gptlab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
