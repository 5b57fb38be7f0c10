"""
Quantum operations and instruments.

An operation is stored twice: as a list of Kraus operators and as its Choi
matrix ``C = sum_ij E_ij (x) Phi(E_ij)`` (input factor first). The Choi matrix
is the canonical form, so two operations are equal iff their Choi matrices
agree; Kraus lists are not unique and are never compared directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import linalg as la
from .effects import DensityState, reduced_effect
from .errors import DimensionError, LabelError, ValidationError
from .linalg import DEFAULT_TOL, CMatrix
from .maps import Surjection, product_label
from .observables import Observable, random_measure


def kraus_to_choi(kraus: Sequence[np.ndarray]) -> CMatrix:
    # column-stacking each S_k along the input index gives |S_k>> with entries S[a, i] at (i, a)
    vecs = np.stack([k.T.reshape(-1) for k in kraus], axis=1)
    return vecs @ vecs.conj().T


def choi_to_kraus(choi, dim_in: int, dim_out: int, tol: float = DEFAULT_TOL) -> list[CMatrix]:
    """Kraus operators from the eigenvectors of a PSD Choi matrix (eigenvalues > tol)."""
    w, v = la.eigh_clamped(choi, tol)
    if w.size and w[0] < -tol:
        raise ValidationError(
            f"Choi matrix is not PSD (min eigenvalue {w[0]:.3e}); map is not completely positive",
            residual=-float(w[0]),
        )
    kraus = [
        (np.sqrt(lam) * v[:, i]).reshape(dim_in, dim_out).T
        for i, lam in enumerate(w)
        if lam > tol
    ]
    if not kraus:
        kraus = [np.zeros((dim_out, dim_in), dtype=np.complex128)]
    return kraus


def choi_of_map(fn: Callable[[CMatrix], CMatrix], dim_in: int) -> CMatrix:
    """Choi matrix of an arbitrary linear map given as a function on matrices."""
    blocks = {}
    for i, j, e in la.matrix_units(dim_in):
        blocks[i, j] = la.as_matrix(fn(e))
    dim_out = blocks[0, 0].shape[0]
    choi = np.zeros((dim_in * dim_out, dim_in * dim_out), dtype=np.complex128)
    for (i, j), b in blocks.items():
        choi[i * dim_out:(i + 1) * dim_out, j * dim_out:(j + 1) * dim_out] = b
    return choi


def apply_choi(choi, rho, dim_in: int) -> CMatrix:
    """Evaluate a map from its Choi matrix: ``Phi(rho) = tr_1[(rho^T (x) 1) C]``."""
    rho = la.as_matrix(rho)
    dim_out = choi.shape[0] // dim_in
    return la.partial_trace(np.kron(rho.T, np.eye(dim_out)) @ choi, (dim_in, dim_out), 1)


@dataclass(frozen=True, eq=False)
class QuantumOperation:
    """A completely positive, trace non-increasing map in Kraus and Choi form."""

    dim_in: int
    dim_out: int
    kraus: tuple
    choi: CMatrix = field(repr=False)

    def __call__(self, rho) -> CMatrix:
        r = la.as_matrix(getattr(rho, "matrix", rho))
        if r.shape != (self.dim_in, self.dim_in):
            raise DimensionError(f"operation expects dim {self.dim_in}, got {r.shape[0]}")
        return sum(s @ r @ s.conj().T for s in self.kraus)

    def effect(self) -> CMatrix:
        """``sum_i S_i^dagger S_i``, the effect this operation measures."""
        return sum(s.conj().T @ s for s in self.kraus)

    def __add__(self, other: "QuantumOperation") -> "QuantumOperation":
        _check_dims(self, other)
        return _op(self.kraus + other.kraus, self.choi + other.choi)

    def __rmul__(self, c: float) -> "QuantumOperation":
        if c < 0:
            raise ValidationError("operations can only be scaled by non-negative numbers")
        return _op(tuple(np.sqrt(c) * s for s in self.kraus), c * self.choi)

    def then(self, other: "QuantumOperation") -> "QuantumOperation":
        """Composite ``rho -> other(self(rho))`` with Kraus operators ``T_j S_i``."""
        if self.dim_out != other.dim_in:
            raise DimensionError("cannot compose operations with mismatched dims")
        return _op(tuple(t @ s for s in self.kraus for t in other.kraus))


def _check_dims(a: QuantumOperation, b: QuantumOperation):
    if (a.dim_in, a.dim_out) != (b.dim_in, b.dim_out):
        raise DimensionError("operations act between different spaces")


def _op(kraus, choi=None) -> QuantumOperation:
    kraus = tuple(la.as_matrix(k) for k in kraus)
    dim_out, dim_in = kraus[0].shape
    if choi is None:
        choi = kraus_to_choi(kraus)
    return QuantumOperation(dim_in, dim_out, kraus, choi)


def make_operation(kraus: Sequence, tol: float = DEFAULT_TOL) -> QuantumOperation:
    """
    Operation from Kraus operators.

    Raises
    ------
    ValidationError
        When ``sum S_i^dagger S_i`` is not below the identity within tol.
    """
    if len(kraus) == 0:
        raise ValidationError("a Kraus decomposition needs at least one operator")
    kraus = [la.as_matrix(k) for k in kraus]
    if len({k.shape for k in kraus}) != 1:
        raise DimensionError("Kraus operators have different shapes")
    op = _op(kraus)
    w = np.linalg.eigvalsh(la.hermitian_part(op.effect(), tol))
    if w[-1] > 1 + tol:
        raise ValidationError(
            f"sum of S^dagger S exceeds the identity by {w[-1] - 1:.3e}", residual=float(w[-1] - 1)
        )
    return op


def operation_from_choi(choi, dim_in: int, tol: float = DEFAULT_TOL) -> QuantumOperation:
    """Operation from a Choi matrix; a non-PSD Choi matrix signals a non-CP map."""
    choi = la.as_matrix(choi)
    if choi.shape[0] % dim_in:
        raise DimensionError(f"Choi size {choi.shape[0]} is not a multiple of dim_in {dim_in}")
    dim_out = choi.shape[0] // dim_in
    kraus = choi_to_kraus(choi, dim_in, dim_out, tol)
    op = QuantumOperation(dim_in, dim_out, tuple(kraus), la.hermitian_part(choi, tol))
    w = np.linalg.eigvalsh(la.hermitian_part(op.effect(), tol))
    if w[-1] > 1 + tol:
        raise ValidationError("map increases trace", residual=float(w[-1] - 1))
    return op


def operation_from_map(fn, dim_in: int, tol: float = DEFAULT_TOL) -> QuantumOperation:
    return operation_from_choi(choi_of_map(fn, dim_in), dim_in, tol)


def identity_operation(n: int) -> QuantumOperation:
    return _op([np.eye(n, dtype=np.complex128)])


def choi_distance(a: QuantumOperation, b: QuantumOperation) -> float:
    _check_dims(a, b)
    return la.frobenius(a.choi - b.choi)


def operations_close(a: QuantumOperation, b: QuantumOperation, tol: float = DEFAULT_TOL) -> bool:
    """Choi Frobenius distance at most ``tol * dim_in * dim_out``."""
    return choi_distance(a, b) <= tol * a.dim_in * a.dim_out


def apply_operation(op: QuantumOperation, rho) -> DensityState:
    """``A(rho) = sum_i S_i rho S_i^dagger``, returned as a partial state."""
    out = op(rho)
    return DensityState((out + la.dagger(out)) / 2, "partial")


def is_channel(op: QuantumOperation, tol: float = DEFAULT_TOL) -> bool:
    return op.dim_in == op.dim_out and la.approx_eq(op.effect(), np.eye(op.dim_in), tol)


class Instrument:
    """Outcome label -> operation map whose total is a channel."""

    __slots__ = ("dim", "_ops")

    def __init__(self, ops: Mapping[str, QuantumOperation]):
        if not ops:
            raise ValidationError("an instrument needs at least one outcome")
        store = {str(k): v for k, v in ops.items()}
        if len(store) != len(ops):
            raise LabelError("outcome labels collide after conversion to str")
        shapes = {(o.dim_in, o.dim_out) for o in store.values()}
        if len(shapes) != 1:
            raise DimensionError(f"operations act between different spaces: {sorted(shapes)}")
        self._ops = store
        self.dim = next(iter(store.values())).dim_in

    def __getitem__(self, label: str) -> QuantumOperation:
        try:
            return self._ops[label]
        except KeyError:
            raise LabelError(f"unknown outcome label {label!r}") from None

    def __len__(self):
        return len(self._ops)

    def __iter__(self):
        return iter(self._ops)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self._ops)

    def items(self):
        return self._ops.items()

    def event(self, X) -> QuantumOperation:
        """``I_X = sum_{x in X} I_x``."""
        X = list(dict.fromkeys(X))
        if not X:
            return 0.0 * next(iter(self._ops.values()))
        out = self[X[0]]
        for x in X[1:]:
            out = out + self[x]
        return out

    def total(self) -> QuantumOperation:
        return self.event(self.labels)

    def relabel(self, mapping: Mapping[str, str]) -> "Instrument":
        return Instrument({mapping[k]: v for k, v in self._ops.items()})

    def __repr__(self):
        return f"Instrument(dim={self.dim}, outcomes={list(self._ops)})"


def instrument_residual(I: Instrument) -> float:
    return la.scaled_distance(I.total().effect(), np.eye(I.dim))


def make_instrument(ops: Mapping[str, QuantumOperation], tol: float = DEFAULT_TOL) -> Instrument:
    """Validate that the operations sum to a channel (square, trace preserving)."""
    I = Instrument(ops)
    first = next(iter(ops.values()))
    if first.dim_in != first.dim_out:
        raise DimensionError("instrument operations must map a space to itself")
    residual = instrument_residual(I)
    if residual > tol:
        raise ValidationError(
            f"total operation is not trace preserving (residual {residual:.3e})", residual=residual
        )
    return I


def kraus_instrument(kraus: Mapping[str, Sequence], tol: float = DEFAULT_TOL) -> Instrument:
    """Instrument from ``label -> list of Kraus operators``."""
    return make_instrument({x: make_operation(ks, tol) for x, ks in kraus.items()}, tol)


def instruments_close(I: Instrument, J: Instrument, tol: float = DEFAULT_TOL) -> bool:
    return I.labels == J.labels and all(operations_close(I[x], J[x], tol) for x in I)


def instrument_distance(I: Instrument, J: Instrument) -> float:
    if set(I.labels) != set(J.labels):
        raise LabelError("instruments have different outcome sets")
    return max(choi_distance(I[x], J[x]) for x in I)


def measured_observable(I: Instrument) -> Observable:
    """The observable ``I^`` measured by ``I``: ``I^_x = sum_i S_xi^dagger S_xi``."""
    return Observable({x: op.effect() for x, op in I.items()})


def luders(A: Observable, tol: float = DEFAULT_TOL) -> Instrument:
    """Lueders instrument ``L_x(rho) = A_x^{1/2} rho A_x^{1/2}``."""
    return Instrument({x: _op([la.principal_sqrt(m, tol)]) for x, m in A.items()})


def trivial(A: Observable, delta, tol: float = DEFAULT_TOL) -> Instrument:
    """
    Trivial instrument ``I_x(rho) = tr(rho A_x) delta``.

    Its Choi matrix for outcome ``x`` is ``A_x^T (x) delta``.
    """
    d = la.as_matrix(getattr(delta, "matrix", delta))
    if d.shape[0] != A.dim:
        raise DimensionError("state and observable dims differ")
    return Instrument(
        {x: operation_from_choi(np.kron(m.T, d), A.dim, tol) for x, m in A.items()}
    )


def _same_dim(I: Instrument, J: Instrument):
    if I.dim != J.dim:
        raise DimensionError(f"instruments act on different dims: {I.dim} vs {J.dim}")


def product_instr(I: Instrument, J: Instrument) -> Instrument:
    """``(I o J)_(x,y)(rho) = J_y(I_x(rho))`` on ``Omega_I x Omega_J``."""
    _same_dim(I, J)
    return Instrument({product_label(x, y): I[x].then(J[y]) for x in I for y in J})


def condition_instr(J: Instrument, I: Instrument) -> Instrument:
    """``(J | I)_y = J_y o C_I`` where ``C_I`` is the total channel of ``I``."""
    _same_dim(I, J)
    total = I.total()
    return Instrument({y: total.then(J[y]) for y in J})


def tensor_operation(a: QuantumOperation, b: QuantumOperation) -> QuantumOperation:
    return _op(tuple(np.kron(s, t) for s in a.kraus for t in b.kraus))


def tensor_instr(I1: Instrument, I2: Instrument) -> Instrument:
    """``J_(x,y) = I1_x (x) I2_y`` with Kraus operators ``S (x) T``."""
    return Instrument(
        {product_label(x, y): tensor_operation(I1[x], I2[y]) for x in I1 for y in I2}
    )


def reduced_operation(op: QuantumOperation, dims, side: int, tol: float = DEFAULT_TOL):
    n1, n2 = dims
    if side == 1:
        fn = lambda r: la.partial_trace(op(np.kron(r, np.eye(n2))), dims, 2) / n2  # noqa: E731
        return operation_from_map(fn, n1, tol)
    if side == 2:
        fn = lambda r: la.partial_trace(op(np.kron(np.eye(n1), r)), dims, 1) / n1  # noqa: E731
        return operation_from_map(fn, n2, tol)
    raise ValueError(f"side must be 1 or 2, got {side}")


def reduced_instr(I: Instrument, dims, side: int, tol: float = DEFAULT_TOL) -> Instrument:
    """
    Reduced instrument on one factor.

    ``I^1_x(rho1) = tr_2[I_x(rho1 (x) 1_2)] / n2`` (and symmetrically for
    ``side=2``), materialized through its Choi matrix.
    """
    n1, n2 = dims
    if I.dim != n1 * n2:
        raise DimensionError(f"instrument dim {I.dim} does not factor as {n1}x{n2}")
    return Instrument({x: reduced_operation(op, dims, side, tol) for x, op in I.items()})


def instr_random_measure(I: Instrument) -> dict[str, float]:
    """``mu^I(x) = tr[I_x(1)] / n``."""
    eye = np.eye(I.dim)
    return {x: float(np.trace(op(eye)).real) / I.dim for x, op in I.items()}


def coarse_grain_instr(I: Instrument, f: Surjection | Mapping) -> Instrument:
    """``f(I)_x = I_{f^{-1}(x)}``; Kraus lists are concatenated per fiber."""
    if not isinstance(f, Surjection):
        f = Surjection.from_mapping(f)
    if set(f.domain) != set(I.labels):
        raise LabelError("surjection domain does not match the instrument's outcomes")
    return Instrument({x: I.event(f.fiber(x)) for x in f.codomain})


def trivial_data(I: Instrument, tol: float = DEFAULT_TOL):
    """
    Recover ``(A, delta)`` if ``I`` is trivial, i.e. ``I_x(rho) = tr(rho A_x) delta``.

    Returns ``None`` when no single output state works for every outcome.
    """
    A = measured_observable(I)
    delta = I.total()(np.eye(I.dim) / I.dim)
    tr = float(np.trace(delta).real)
    if tr <= tol:
        return None
    delta = delta / tr
    for x, op in I.items():
        if not la.approx_eq(op.choi, np.kron(A[x].T, delta), tol):
            return None
    return A, (delta + la.dagger(delta)) / 2


def trivial_distance(I: Instrument, A: Observable, delta) -> float:
    """Largest scaled Choi distance between ``I`` and ``trivial(A, delta)``."""
    d = la.as_matrix(delta)
    return max(la.scaled_distance(op.choi, np.kron(A[x].T, d)) for x, op in I.items())


@dataclass
class TrivialCompositeReport:
    """Residuals of the structural claims about composites of trivial instruments."""

    residuals: dict = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())


def trivial_composites(I1: Instrument, I2: Instrument, tol: float = DEFAULT_TOL) -> TrivialCompositeReport:
    """
    Check the structure of the tensor product of two trivial instruments.

    With ``I1_x(rho) = tr(rho A_x) alpha`` and ``I2_y(rho) = tr(rho B_y) beta``
    the product must be trivial with observable ``A (x) B`` and state
    ``alpha (x) beta``, and its reductions must be trivial with observables
    ``mu^B(y) A_x`` (state ``alpha``) and ``mu^A(x) B_y`` (state ``beta``).
    """
    d1, d2 = trivial_data(I1, tol), trivial_data(I2, tol)
    if d1 is None or d2 is None:
        raise ValidationError("trivial_composites needs two trivial instruments")
    (A, alpha), (B, beta) = d1, d2
    dims = (I1.dim, I2.dim)
    J = tensor_instr(I1, I2)
    AB = Observable({product_label(x, y): np.kron(A[x], B[y]) for x in A for y in B})
    muA, muB = random_measure(A), random_measure(B)
    red1 = Observable({product_label(x, y): muB[y] * A[x] for x in A for y in B})
    red2 = Observable({product_label(x, y): muA[x] * B[y] for x in A for y in B})
    return TrivialCompositeReport({
        "tensor": trivial_distance(J, AB, np.kron(alpha, beta)),
        "tensor-reduced-1": trivial_distance(reduced_instr(J, dims, 1, tol), red1, alpha),
        "tensor-reduced-2": trivial_distance(reduced_instr(J, dims, 2, tol), red2, beta),
    })


def reduced_trivial_residuals(I: Instrument, dims, tol: float = DEFAULT_TOL) -> dict[str, float]:
    """
    Reductions of a trivial instrument on ``H_1 (x) H_2``.

    For ``I_x(rho) = tr(rho A_x) alpha`` each reduction must be trivial with
    the reduced observable and the partial trace of ``alpha``.
    """
    data = trivial_data(I, tol)
    if data is None:
        raise ValidationError("instrument is not trivial")
    A, alpha = data
    out = {}
    for side, traced in ((1, 2), (2, 1)):
        red = reduced_instr(I, dims, side, tol)
        A_red = Observable({x: reduced_effect(m, dims, side).matrix for x, m in A.items()})
        out[f"reduced-{side}"] = trivial_distance(red, A_red, la.partial_trace(alpha, dims, traced))
    return out
