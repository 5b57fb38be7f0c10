"""
Measurement models: a base system coupled to a probe that is then read out.

A model is the tuple ``(n, k, eta, nu, F)``: base dimension, probe dimension,
initial probe state, interaction channel on ``H (x) K`` (base factor first),
and probe observable. It measures the model instrument

    M^_x(rho) = tr_K[ nu(rho (x) eta) (1 (x) F_x) ]
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg as la
from .errors import DimensionError, ValidationError
from .instruments import (
    Instrument,
    QuantumOperation,
    _op,
    is_channel,
    measured_observable,
    operation_from_map,
)
from .linalg import DEFAULT_TOL, CMatrix
from .observables import Observable, tensor_obs


@dataclass(frozen=True, eq=False)
class MeasurementModel:
    base_dim: int
    probe_dim: int
    eta: CMatrix
    nu: QuantumOperation
    F: Observable


def make_model(base_dim: int, probe_dim: int, eta, nu: QuantumOperation, F: Observable,
               tol: float = DEFAULT_TOL) -> MeasurementModel:
    """Validate and assemble a measurement model."""
    from .effects import make_state

    eta = make_state(eta, "full", tol).matrix
    if eta.shape[0] != probe_dim:
        raise DimensionError(f"probe state has dim {eta.shape[0]}, expected {probe_dim}")
    if F.dim != probe_dim:
        raise DimensionError(f"probe observable has dim {F.dim}, expected {probe_dim}")
    if nu.dim_in != base_dim * probe_dim:
        raise DimensionError(
            f"interaction acts on dim {nu.dim_in}, expected {base_dim}*{probe_dim}"
        )
    if not is_channel(nu, tol):
        raise ValidationError("interaction is not a channel (not trace preserving)")
    return MeasurementModel(base_dim, probe_dim, eta, nu, F)


def _readout(state: CMatrix, effect: CMatrix, n: int, k: int) -> CMatrix:
    # tr_K[X (1 (x) F)]
    return la.partial_trace(state @ np.kron(np.eye(n), effect), (n, k), 2)


def model_instrument(M: MeasurementModel, tol: float = DEFAULT_TOL) -> Instrument:
    """
    The instrument measured by ``M``, assembled through Choi matrices.

    Raises
    ------
    ValidationError
        If a per-outcome map fails the complete-positivity check beyond tol.
    """
    n, k = M.base_dim, M.probe_dim

    def outcome_map(effect):
        return lambda r: _readout(M.nu(np.kron(r, M.eta)), effect, n, k)

    return Instrument({x: operation_from_map(outcome_map(f), n, tol) for x, f in M.F.items()})


def model_observable(M: MeasurementModel, tol: float = DEFAULT_TOL) -> Observable:
    return measured_observable(model_instrument(M, tol))


def reduced_model_instrument(M: MeasurementModel, dims, side: int,
                             tol: float = DEFAULT_TOL) -> Instrument:
    """
    Instrument of the reduced model on one factor of the base.

    Evaluates ``tr_K{ tr_2[nu(rho1 (x) 1_2 (x) eta)] (1_1 (x) F_x) } / n2``
    directly, tracing the other base factor before the probe readout. The
    reduced interaction is only defined on inputs ``rho1 (x) eta`` and is never
    built as a standalone channel.
    """
    n1, n2 = dims
    k = M.probe_dim
    if M.base_dim != n1 * n2:
        raise DimensionError(f"base dim {M.base_dim} does not factor as {n1}x{n2}")
    if side == 1:
        keep, other, traced = n1, n2, 2
        embed = lambda r: np.kron(np.kron(r, np.eye(n2)), M.eta)  # noqa: E731
    elif side == 2:
        keep, other, traced = n2, n1, 1
        embed = lambda r: np.kron(np.kron(np.eye(n1), r), M.eta)  # noqa: E731
    else:
        raise ValueError(f"side must be 1 or 2, got {side}")

    def outcome_map(effect):
        def fn(r):
            local = la.partial_trace(M.nu(embed(r)), (n1, n2, k), traced) / other
            return _readout(local, effect, keep, k)
        return fn

    return Instrument({x: operation_from_map(outcome_map(f), keep, tol) for x, f in M.F.items()})


@dataclass(frozen=True, eq=False)
class SwapOperator:
    """Permutation ``H1 (x) H2 (x) K1 (x) K2 -> H1 (x) K1 (x) H2 (x) K2``."""

    dims: tuple[int, int, int, int]
    matrix: CMatrix


def swap_operator(dims) -> SwapOperator:
    n1, n2, k1, k2 = (int(d) for d in dims)
    if min(n1, n2, k1, k2) < 1:
        raise DimensionError(f"invalid dims {dims}")
    total = n1 * n2 * k1 * k2
    # column c is basis vector (i1, i2, j1, j2); rows[c] is the index of (i1, j1, i2, j2)
    rows = np.arange(total).reshape(n1, k1, n2, k2).transpose(0, 2, 1, 3).reshape(-1)
    U = np.zeros((total, total), dtype=np.complex128)
    U[rows, np.arange(total)] = 1.0
    return SwapOperator((n1, n2, k1, k2), U)


def composite_mm(M1: MeasurementModel, M2: MeasurementModel) -> MeasurementModel:
    """
    Composite model on base ``H1 (x) H2`` with probe ``K1 (x) K2``.

    The interaction is ``U^dagger [nu1 (x) nu2] U`` with ``U`` the swap operator;
    its Kraus operators are ``U^dagger (S_i (x) T_j) U`` in lexicographic
    ``(i, j)`` order.
    """
    U = swap_operator((M1.base_dim, M2.base_dim, M1.probe_dim, M2.probe_dim)).matrix
    Ud = la.dagger(U)
    kraus = [Ud @ np.kron(s, t) @ U for s in M1.nu.kraus for t in M2.nu.kraus]
    return MeasurementModel(
        M1.base_dim * M2.base_dim,
        M1.probe_dim * M2.probe_dim,
        np.kron(M1.eta, M2.eta),
        _op(kraus),
        tensor_obs(M1.F, M2.F),
    )
