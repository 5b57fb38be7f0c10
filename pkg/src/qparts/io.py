"""
JSON serialization of entities and verification reports.

An entity file is an object ``{"kind", "dims", "payload"}``:

* ``kind`` is one of ``effect``, ``state``, ``observable``, ``instrument``, ``mm``;
* ``dims`` lists the tensor-factor dimensions of the Hilbert space (their
  product must equal the matrix size; ``[n]`` for an unfactored space);
* ``payload`` holds the data. A matrix is a row-major nested array of
  ``[re, im]`` pairs. Observables map labels to matrices, instruments map
  labels to lists of Kraus matrices, and a model is an object with
  ``base_dim``, ``probe_dim``, ``eta``, ``nu`` (Kraus list) and ``F``.

Every failure surfaces as a :class:`SpecError` carrying a JSON path such as
``$.payload.F.0[1]`` to the offending field.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .effects import DensityState, Effect, make_effect, make_state
from .errors import QuantumError
from .instruments import Instrument, QuantumOperation, make_instrument, make_operation
from .models import MeasurementModel, make_model
from .observables import Observable, make_observable

KINDS = ("effect", "state", "observable", "instrument", "mm")


class SpecError(QuantumError):
    """Rejected entity file; ``path`` points at the offending field."""

    def __init__(self, message: str, path: str = "$", kind: str = "validation"):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.kind = kind
        self.reason = message

    def as_dict(self) -> dict:
        return {"status": "rejected", "error": self.kind, "path": self.path, "message": self.reason}


@dataclass(frozen=True, eq=False)
class EntitySpec:
    kind: str
    dims: tuple[int, ...]
    value: Any


# ------------------------------------------------------------------ parsing

def _matrix(node, path: str) -> np.ndarray:
    if not isinstance(node, list) or not node:
        raise SpecError("expected a non-empty array of rows", path, "type")
    rows = []
    width = None
    for i, row in enumerate(node):
        rpath = f"{path}[{i}]"
        if not isinstance(row, list) or not row:
            raise SpecError("expected a non-empty row of [re, im] pairs", rpath, "type")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise SpecError(f"row has {len(row)} entries, expected {width}", rpath, "shape")
        out = []
        for j, z in enumerate(row):
            zpath = f"{rpath}[{j}]"
            if (not isinstance(z, list) or len(z) != 2
                    or not all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in z)):
                raise SpecError("expected a [re, im] pair of numbers", zpath, "type")
            if not all(math.isfinite(t) for t in z):
                raise SpecError("non-finite number", zpath, "value")
            out.append(complex(z[0], z[1]))
        rows.append(out)
    return np.array(rows, dtype=np.complex128)


def _square(node, path: str, n: int | None = None) -> np.ndarray:
    m = _matrix(node, path)
    if m.shape[0] != m.shape[1]:
        raise SpecError(f"expected a square matrix, got {m.shape[0]}x{m.shape[1]}", path, "shape")
    if n is not None and m.shape[0] != n:
        raise SpecError(f"expected dimension {n}, got {m.shape[0]}", path, "shape")
    return m


def _label_map(node, path: str) -> dict:
    if not isinstance(node, dict) or not node:
        raise SpecError("expected a non-empty object of outcome label -> data", path, "type")
    return node


def _kraus_list(node, path: str, n: int) -> list[np.ndarray]:
    if not isinstance(node, list) or not node:
        raise SpecError("expected a non-empty list of Kraus matrices", path, "type")
    return [_square(k, f"{path}[{i}]", n) for i, k in enumerate(node)]


def _domain(fn, path: str, *args):
    # domain modules raise QuantumError subclasses; attach the JSON path
    try:
        return fn(*args)
    except SpecError:
        raise
    except QuantumError as exc:
        raise SpecError(str(exc), path) from None


def _observable(node, path: str, n: int, tol: float) -> Observable:
    effects = {x: _square(m, f"{path}.{x}", n) for x, m in _label_map(node, path).items()}
    return _domain(make_observable, path, effects, tol)


def _instrument(node, path: str, n: int, tol: float) -> Instrument:
    ops = {}
    for x, ks in _label_map(node, path).items():
        ops[x] = _domain(make_operation, f"{path}.{x}", _kraus_list(ks, f"{path}.{x}", n), tol)
    return _domain(make_instrument, path, ops, tol)


def _positive_int(node, path: str) -> int:
    if not isinstance(node, int) or isinstance(node, bool) or node < 1:
        raise SpecError("expected a positive integer", path, "type")
    return node


def _model(node, path: str, n: int, tol: float) -> MeasurementModel:
    if not isinstance(node, dict):
        raise SpecError("expected an object with base_dim, probe_dim, eta, nu, F", path, "type")
    missing = [k for k in ("base_dim", "probe_dim", "eta", "nu", "F") if k not in node]
    if missing:
        raise SpecError(f"missing field(s) {missing}", path, "missing")
    base = _positive_int(node["base_dim"], f"{path}.base_dim")
    probe = _positive_int(node["probe_dim"], f"{path}.probe_dim")
    if base != n:
        raise SpecError(f"base_dim {base} does not match dims product {n}", f"{path}.base_dim", "shape")
    eta = _domain(make_state, f"{path}.eta", _square(node["eta"], f"{path}.eta", probe), "full", tol).matrix
    nu = _domain(make_operation, f"{path}.nu", _kraus_list(node["nu"], f"{path}.nu", base * probe), tol)
    F = _observable(node["F"], f"{path}.F", probe, tol)
    return _domain(make_model, path, base, probe, eta, nu, F, tol)


def parse_entity(data, tol: float = 1e-9) -> EntitySpec:
    """Validate an already-decoded JSON document into a typed entity."""
    if not isinstance(data, dict):
        raise SpecError("top level must be an object", "$", "type")
    for key in ("kind", "dims", "payload"):
        if key not in data:
            raise SpecError(f"missing field {key!r}", "$", "missing")
    kind = data["kind"]
    if kind not in KINDS:
        raise SpecError(f"unknown kind {kind!r}; expected one of {list(KINDS)}", "$.kind", "value")
    dims = data["dims"]
    if not isinstance(dims, list) or not dims:
        raise SpecError("expected a non-empty list of factor dimensions", "$.dims", "type")
    dims = tuple(_positive_int(d, f"$.dims[{i}]") for i, d in enumerate(dims))
    n = int(np.prod(dims))
    payload = data["payload"]
    path = "$.payload"
    if kind == "effect":
        value = _domain(make_effect, path, _square(payload, path, n), tol)
    elif kind == "state":
        value = _domain(make_state, path, _square(payload, path, n), "full", tol)
    elif kind == "observable":
        value = _observable(payload, path, n, tol)
    elif kind == "instrument":
        value = _instrument(payload, path, n, tol)
    else:
        value = _model(payload, path, n, tol)
    return EntitySpec(kind, dims, value)


def parse_spec(text: str, tol: float = 1e-9) -> EntitySpec:
    """
    Parse JSON text into an :class:`EntitySpec`.

    Raises
    ------
    SpecError
        On malformed JSON (``error == "syntax"``) or any structural or domain
        validation failure, with ``path`` set to the offending field.
    """
    try:
        data = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SpecError(f"invalid JSON: {exc}", "$", "syntax") from None
    except RecursionError:
        raise SpecError("document nested too deeply", "$", "syntax") from None
    return parse_entity(data, tol)


# ------------------------------------------------------------ serialization

def matrix_to_json(m) -> list:
    m = np.asarray(getattr(m, "matrix", m), dtype=np.complex128)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def kind_of(value) -> str:
    if isinstance(value, Effect):
        return "effect"
    if isinstance(value, DensityState):
        return "state"
    if isinstance(value, Observable):
        return "observable"
    if isinstance(value, Instrument):
        return "instrument"
    if isinstance(value, MeasurementModel):
        return "mm"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _kraus_json(op: QuantumOperation) -> list:
    return [matrix_to_json(k) for k in op.kraus]


def entity_to_json(value, dims=None) -> dict:
    kind = kind_of(value)
    if kind in ("effect", "state"):
        payload = matrix_to_json(value)
        n = value.dim
    elif kind == "observable":
        payload = {x: matrix_to_json(m) for x, m in value.items()}
        n = value.dim
    elif kind == "instrument":
        payload = {x: _kraus_json(op) for x, op in value.items()}
        n = value.dim
    else:
        payload = {
            "base_dim": value.base_dim,
            "probe_dim": value.probe_dim,
            "eta": matrix_to_json(value.eta),
            "nu": _kraus_json(value.nu),
            "F": {x: matrix_to_json(m) for x, m in value.F.items()},
        }
        n = value.base_dim
    dims = [n] if dims is None else [int(d) for d in dims]
    if int(np.prod(dims)) != n:
        raise ValueError(f"dims {dims} do not multiply to {n}")
    return {"kind": kind, "dims": dims, "payload": payload}


def serialize(value, dims=None) -> str:
    """Entity (or :class:`EntitySpec`) to JSON text that :func:`parse_spec` reads back."""
    if isinstance(value, EntitySpec):
        value, dims = value.value, value.dims
    return json.dumps(entity_to_json(value, dims))


# ------------------------------------------------------------------ reports

def sci(x: float | None) -> str:
    """A JSON number in scientific notation with 6 significant digits (``null`` if not finite)."""
    if x is None or not math.isfinite(x):
        return "null"
    return f"{x:.5e}"


def emit_report(report) -> str:
    """
    Render a suite report as JSON with a fixed key order.

    Residuals and the tolerance are written as ``d.ddddde±XX``; ``runtime_ms``
    is ``null`` unless timings were requested, so reruns are byte-identical.
    """
    lines = [
        "{",
        f'  "seed": {json.dumps(report.seed)},',
        f'  "tolerance": {sci(report.tolerance)},',
        f'  "ok": {json.dumps(report.ok)},',
    ]
    if not report.checks:
        lines.append('  "checks": []')
    else:
        lines.append('  "checks": [')
        records = []
        for c in report.checks:
            runtime = "null" if c.runtime_ms is None else f"{c.runtime_ms:.3f}"
            records.append(
                "    {"
                f'"id": {json.dumps(c.id)}, '
                f'"citation": {json.dumps(c.citation)}, '
                f'"status": {json.dumps(c.status)}, '
                f'"residual": {sci(c.residual)}, '
                f'"runtime_ms": {runtime}, '
                f'"detail": {json.dumps(c.detail)}'
                "}"
            )
        lines.append(",\n".join(records))
        lines.append("  ]")
    lines.append("}")
    return "\n".join(lines) + "\n"
