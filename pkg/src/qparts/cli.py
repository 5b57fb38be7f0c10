"""Command-line interface: ``qparts <command> [options]``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import linalg as la
from . import suite
from .effects import make_effect, make_state, reduced_effect
from .errors import QuantumError
from .instruments import measured_observable, reduced_instr, tensor_instr
from .io import EntitySpec, SpecError, emit_report, entity_to_json, parse_spec
from .models import composite_mm, model_instrument, reduced_model_instrument
from .observables import distribution, reduced_obs, tensor_obs
from .parts import (
    DEFAULT_MAX_OUTCOMES,
    coexistence_witness,
    enumerate_parts,
    joint_for_commuting,
    part_of,
)


class UsageError(QuantumError):
    """Arguments that are individually valid but do not fit together."""


def _load(path: str, tol: float) -> EntitySpec:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc.strerror}", "$", "io") from None
    try:
        return parse_spec(text, tol)
    except SpecError as exc:
        exc.file = path
        raise


def _expect(spec: EntitySpec, *kinds: str) -> None:
    if spec.kind not in kinds:
        raise UsageError(f"command needs a {' or '.join(kinds)}, got {spec.kind}")


def _state(path: str | None, n: int, tol: float):
    if path is None:
        return None
    spec = _load(path, tol)
    _expect(spec, "state")
    if spec.value.dim != n:
        raise UsageError(f"state has dim {spec.value.dim}, entity has dim {n}")
    return spec.value.matrix


def _dims_pair(dims, spec: EntitySpec) -> tuple[int, int]:
    if dims is None:
        if len(spec.dims) != 2:
            raise UsageError("pass --dims N1 N2 or give the entity two factor dims")
        return spec.dims
    return tuple(dims)


# ---------------------------------------------------------------- commands

def cmd_validate(args) -> tuple[dict, int]:
    spec = _load(args.entity, args.tol)
    return {"command": "validate", "status": "pass", "kind": spec.kind, "dims": list(spec.dims)}, 0


def cmd_measure(args) -> tuple[dict, int]:
    spec = _load(args.entity, args.tol)
    _expect(spec, "observable", "instrument", "mm")
    if spec.kind == "instrument":
        obs = measured_observable(spec.value)
    elif spec.kind == "mm":
        obs = measured_observable(model_instrument(spec.value, args.tol))
    else:
        obs = spec.value
    out = {"command": "measure", "observable": entity_to_json(obs, spec.dims)}
    rho = _state(args.state, obs.dim, args.tol)
    if rho is not None:
        out["distribution"] = distribution(rho, obs, args.tol)
    return out, 0


def cmd_parts(args) -> tuple[dict, int]:
    spec = _load(args.entity, args.tol)
    _expect(spec, "observable", "instrument", "mm")
    obs = spec.value
    if spec.kind == "instrument":
        obs = measured_observable(obs)
    elif spec.kind == "mm":
        obs = measured_observable(model_instrument(obs, args.tol))
    reps = enumerate_parts(obs, args.tol, args.max_outcomes)
    return {
        "command": "parts",
        "count": len(reps),
        "parts": [
            {"map": f.as_dict(), "observable": entity_to_json(part, spec.dims)} for part, f in reps
        ],
    }, 0


def cmd_part_check(args) -> tuple[dict, int]:
    child = _load(args.child, args.tol)
    parent = _load(args.parent, args.tol)
    for s in (child, parent):
        _expect(s, "observable", "instrument", "mm")
    cert = part_of(child.value, parent.value, args.tol)
    if cert is None:
        return {"command": "part-check", "status": "fail", "map": None, "residual": None}, 1
    return {
        "command": "part-check",
        "status": "pass",
        "map": cert.map.as_dict(),
        "residual": cert.residual,
    }, 0


def cmd_coexist(args) -> tuple[dict, int]:
    members = [_load(p, args.tol) for p in args.members]
    for m in members:
        _expect(m, "observable", "instrument", "mm")
    if args.parent is not None:
        parent = _load(args.parent, args.tol)
        witness = coexistence_witness([m.value for m in members], parent.value, args.tol)
        if witness is None:
            return {"command": "coexist", "status": "fail", "witness": None}, 1
        return {
            "command": "coexist",
            "status": "pass",
            "witness": [{"map": c.map.as_dict(), "residual": c.residual} for c in witness.certificates],
        }, 0
    if len(members) != 2 or any(m.kind != "observable" for m in members):
        raise UsageError("without --parent, coexist takes exactly two commuting observables")
    joint = joint_for_commuting(members[0].value, members[1].value, args.tol)
    return {"command": "coexist", "status": "pass", "joint": entity_to_json(joint, members[0].dims)}, 0


def cmd_reduce(args) -> tuple[dict, int]:
    spec = _load(args.entity, args.tol)
    n1, n2 = _dims_pair(args.dims, spec)
    kept = n1 if args.side == 1 else n2
    v = spec.value
    if spec.kind == "effect":
        out = reduced_effect(v, (n1, n2), args.side)
    elif spec.kind == "state":
        traced = 2 if args.side == 1 else 1
        out = make_state(la.partial_trace(v.matrix, (n1, n2), traced), "full", args.tol)
    elif spec.kind == "observable":
        out = reduced_obs(v, (n1, n2), args.side)
    elif spec.kind == "instrument":
        out = reduced_instr(v, (n1, n2), args.side, args.tol)
    else:
        out = reduced_model_instrument(v, (n1, n2), args.side, args.tol)
    return {"command": "reduce", "side": args.side, "result": entity_to_json(out, [kept])}, 0


def cmd_tensor(args) -> tuple[dict, int]:
    a = _load(args.first, args.tol)
    b = _load(args.second, args.tol)
    if a.kind != b.kind:
        raise UsageError(f"cannot tensor a {a.kind} with a {b.kind}")
    x, y = a.value, b.value
    if a.kind == "effect":
        out = make_effect(np.kron(x.matrix, y.matrix), args.tol)
    elif a.kind == "state":
        out = make_state(np.kron(x.matrix, y.matrix), "full", args.tol)
    elif a.kind == "observable":
        out = tensor_obs(x, y)
    elif a.kind == "instrument":
        out = tensor_instr(x, y)
    else:
        out = composite_mm(x, y)
    return {"command": "tensor", "result": entity_to_json(out, [*a.dims, *b.dims])}, 0


def cmd_mm_run(args) -> tuple[dict, int]:
    spec = _load(args.entity, args.tol)
    _expect(spec, "mm")
    instr = model_instrument(spec.value, args.tol)
    obs = measured_observable(instr)
    out = {
        "command": "mm-run",
        "instrument": entity_to_json(instr, spec.dims),
        "observable": entity_to_json(obs, spec.dims),
    }
    rho = _state(args.state, obs.dim, args.tol)
    if rho is not None:
        out["distribution"] = distribution(rho, obs, args.tol)
    return out, 0


def cmd_theorem_suite(args) -> tuple[str, int]:
    only = None
    if args.only:
        unknown = sorted(set(args.only) - set(suite.CHECKS))
        if unknown:
            raise UsageError(f"unknown check id(s) {unknown}")
        only = set(args.only)
    report = suite.run_suite(args.seed, args.tol, only, args.timings)
    return emit_report(report), 0 if report.ok else 1


COMMANDS = {
    "validate": cmd_validate,
    "measure": cmd_measure,
    "parts": cmd_parts,
    "part-check": cmd_part_check,
    "coexist": cmd_coexist,
    "reduce": cmd_reduce,
    "tensor": cmd_tensor,
    "mm-run": cmd_mm_run,
    "theorem-suite": cmd_theorem_suite,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=1e-9, help="numerical tolerance (default 1e-9)")
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--out", default=None, help="output path (default stdout)")
    common.add_argument("--max-outcomes", type=int, default=DEFAULT_MAX_OUTCOMES,
                        help="outcome cap for part enumeration (default 8)")

    p = argparse.ArgumentParser(prog="qparts", description="Parts of quantum measurements.")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    s = sub.add_parser("validate", parents=[common], help="check an entity file")
    s.add_argument("entity")

    s = sub.add_parser("measure", parents=[common], help="observable measured by an entity")
    s.add_argument("entity")
    s.add_argument("--state", help="state file; also emit the outcome distribution")

    s = sub.add_parser("parts", parents=[common], help="enumerate parts up to equivalence")
    s.add_argument("entity")

    s = sub.add_parser("part-check", parents=[common], help="search for a part map")
    s.add_argument("child")
    s.add_argument("parent")

    s = sub.add_parser("coexist", parents=[common], help="coexistence witness or commuting joint")
    s.add_argument("members", nargs="+")
    s.add_argument("--parent", help="candidate common parent")

    s = sub.add_parser("reduce", parents=[common], help="reduce to one tensor factor")
    s.add_argument("entity")
    s.add_argument("--dims", type=int, nargs=2, metavar=("N1", "N2"))
    s.add_argument("--side", type=int, choices=(1, 2), default=1)

    s = sub.add_parser("tensor", parents=[common], help="tensor product of two entities")
    s.add_argument("first")
    s.add_argument("second")

    s = sub.add_parser("mm-run", parents=[common], help="instrument of a measurement model")
    s.add_argument("entity")
    s.add_argument("--state", help="state file; also emit the outcome distribution")

    s = sub.add_parser("theorem-suite", parents=[common], help="run the verification suite")
    s.add_argument("--timings", action="store_true", help="record per-check runtime")
    s.add_argument("--only", nargs="+", metavar="ID", help="run only these check ids")
    return p


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def run_command(name: str, argv: list[str]) -> tuple[str, int]:
    """Run one subcommand; returns ``(output text, exit code)``."""
    args = build_parser().parse_args([name, *argv])
    try:
        result, code = COMMANDS[args.command](args)
    except SpecError as exc:
        rej = exc.as_dict()
        if getattr(exc, "file", None):
            rej["file"] = exc.file
        return json.dumps(rej) + "\n", 1
    except QuantumError as exc:
        err = "usage" if isinstance(exc, UsageError) else type(exc).__name__
        return json.dumps({"status": "rejected", "error": err, "message": str(exc)}) + "\n", 1
    if isinstance(result, str):
        return result, code
    return json.dumps(result, default=_json_default) + "\n", code


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    # subcommands carry every option, so argv[0] is always the command name
    text, code = run_command(args.command, argv[1:])
    _write(text, args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
