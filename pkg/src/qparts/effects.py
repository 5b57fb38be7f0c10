"""
Effects, states and their reductions to tensor factors.

An effect is a Hermitian operator with spectrum in ``[0, 1]``. Every function
here accepts either an :class:`Effect`/:class:`DensityState` or a bare matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import linalg as la
from .errors import DimensionError, ValidationError
from .linalg import DEFAULT_TOL, CMatrix


def _mat(x) -> CMatrix:
    return la.as_matrix(getattr(x, "matrix", x))


@dataclass(frozen=True, eq=False)
class Effect:
    matrix: CMatrix
    dim: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "dim", self.matrix.shape[0])
        self.matrix.setflags(write=False)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


@dataclass(frozen=True, eq=False)
class DensityState:
    matrix: CMatrix
    kind: str = "full"
    dim: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "dim", self.matrix.shape[0])
        self.matrix.setflags(write=False)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


@dataclass(frozen=True)
class AtomCheck:
    is_atom: bool
    unit_vector: Optional[np.ndarray] = None


def effect_violation(m, tol: float = DEFAULT_TOL) -> tuple[float, str]:
    """Largest violation of ``0 <= m <= 1`` and which bound it is."""
    w = np.linalg.eigvalsh(la.hermitian_part(m, tol))
    low, high = -float(w[0]), float(w[-1]) - 1.0
    if low >= high:
        return max(low, 0.0), "lower bound 0"
    return max(high, 0.0), "upper bound 1"


def make_effect(m, tol: float = DEFAULT_TOL) -> Effect:
    """
    Validate ``m`` as an effect, ``0 <= m <= 1``.

    Raises
    ------
    ValidationError
        Naming the violated bound when an eigenvalue lies below ``-tol`` or
        above ``1 + tol``, or when ``m`` is not Hermitian.
    """
    m = la.as_matrix(m)
    la.require_square(m)
    h = la.hermitian_part(m, tol)
    violation, bound = effect_violation(h, tol)
    if violation > tol:
        raise ValidationError(
            f"not an effect: {bound} violated by {violation:.3e}", residual=violation
        )
    return Effect(h.copy())


def make_state(m, kind: str = "full", tol: float = DEFAULT_TOL) -> DensityState:
    """Validate a (partial) density operator."""
    if kind not in ("full", "partial"):
        raise ValueError(f"unknown state kind {kind!r}")
    m = la.as_matrix(m)
    la.require_square(m)
    h = la.hermitian_part(m, tol)
    w = np.linalg.eigvalsh(h)
    if w[0] < -tol:
        raise ValidationError(f"state is not PSD (min eigenvalue {w[0]:.3e})", residual=-w[0])
    tr = float(np.trace(h).real)
    if kind == "full" and abs(tr - 1) > tol:
        raise ValidationError(f"state trace is {tr:.12g}, expected 1", residual=abs(tr - 1))
    if kind == "partial" and tr > 1 + tol:
        raise ValidationError(f"partial state trace {tr:.12g} exceeds 1", residual=tr - 1)
    return DensityState(h.copy(), kind)


def maximally_mixed(n: int) -> DensityState:
    return DensityState(np.eye(n, dtype=np.complex128) / n)


def identity_effect(n: int) -> Effect:
    return Effect(np.eye(n, dtype=np.complex128))


def zero_effect(n: int) -> Effect:
    return Effect(np.zeros((n, n), dtype=np.complex128))


def complement(a) -> Effect:
    m = _mat(a)
    return Effect(np.eye(m.shape[0]) - m)


def seq_prod(a, b, tol: float = DEFAULT_TOL) -> Effect:
    """Sequential product ``a o b = a^{1/2} b a^{1/2}`` (measure a, then b)."""
    a, b = _mat(a), _mat(b)
    if a.shape != b.shape:
        raise DimensionError(f"effects act on different spaces: {a.shape} vs {b.shape}")
    r = la.principal_sqrt(a, tol)
    out = r @ b @ r
    return Effect((out + la.dagger(out)) / 2)


def clip_probability(p: float, tol: float = DEFAULT_TOL) -> float:
    if p < -tol or p > 1 + tol:
        raise ValidationError(f"probability {p:.12g} outside [0, 1]", residual=max(-p, p - 1))
    return min(max(p, 0.0), 1.0)


def occurrence_prob(rho, a, tol: float = DEFAULT_TOL) -> float:
    """Probability ``tr(rho a)`` that effect ``a`` occurs in the state ``rho``."""
    if isinstance(rho, DensityState) and rho.kind != "full":
        raise ValidationError("occurrence probability needs a full state")
    r, m = _mat(rho), _mat(a)
    if r.shape != m.shape:
        raise DimensionError(f"state and effect dims differ: {r.shape} vs {m.shape}")
    return clip_probability(float(np.trace(r @ m).real), tol)


def reduced_effect(a, dims, side: int) -> Effect:
    """
    Normalized partial trace onto one factor.

    ``side=1`` gives ``tr_2(a) / n2`` on ``H_1``; ``side=2`` gives
    ``tr_1(a) / n1`` on ``H_2``.
    """
    n1, n2 = dims
    m = _mat(a)
    if m.shape[0] != n1 * n2:
        raise DimensionError(f"effect dim {m.shape[0]} does not factor as {n1}x{n2}")
    if side == 1:
        return Effect(la.partial_trace(m, (n1, n2), 2) / n2)
    if side == 2:
        return Effect(la.partial_trace(m, (n1, n2), 1) / n1)
    raise ValueError(f"side must be 1 or 2, got {side}")


def factorization_test(a, dims, tol: float = DEFAULT_TOL):
    """
    Decide whether ``a = b (x) c`` for effects ``b``, ``c`` on the factors.

    Uses the fact that a nonzero factorized effect equals
    ``(n1 n2 / tr a) a^1 (x) a^2``. Returns ``(b, c)`` or ``None``. The factor
    gauge is fixed by scaling ``b`` to unit operator norm, which keeps both
    factors inside the effect bounds.
    """
    n1, n2 = dims
    m = _mat(a)
    if m.shape[0] != n1 * n2:
        raise DimensionError(f"effect dim {m.shape[0]} does not factor as {n1}x{n2}")
    tr = float(np.trace(m).real)
    if tr <= tol * n1 * n2:
        if la.frobenius(m) <= tol * np.sqrt(n1 * n2):
            return zero_effect(n1), zero_effect(n2)
        return None
    a1 = reduced_effect(m, dims, 1).matrix
    a2 = reduced_effect(m, dims, 2).matrix
    candidate = (n1 * n2 / tr) * np.kron(a1, a2)
    if not la.approx_eq(m, candidate, tol):
        return None
    top = float(np.linalg.eigvalsh(a1)[-1])
    b = a1 / top
    c = (n1 * n2 / tr) * top * a2
    return Effect(b), Effect(c)


def numerical_rank(a, tol: float = DEFAULT_TOL) -> int:
    w = np.linalg.eigvalsh(la.hermitian_part(_mat(a), tol))
    return int(np.sum(np.abs(w) > tol))


def is_indecomposable(a, tol: float = DEFAULT_TOL) -> bool:
    """True iff ``a = lam * P_phi`` for an atom ``P_phi`` and ``0 <= lam <= 1``.

    The zero effect counts (``lam = 0``).
    """
    return numerical_rank(a, tol) <= 1


def atom_check(a, tol: float = DEFAULT_TOL) -> AtomCheck:
    m = la.hermitian_part(_mat(a), tol)
    w, v = np.linalg.eigh(m)
    if numerical_rank(m, tol) != 1 or abs(w[-1] - 1) > tol:
        return AtomCheck(False)
    phi = v[:, -1]
    # fix the global phase so the first significant entry is real positive
    k = int(np.argmax(np.abs(phi) > np.sqrt(tol)))
    phi = phi * np.exp(-1j * np.angle(phi[k]))
    return AtomCheck(True, phi)


def atom_reduction_spectrum(a, dims, tol: float = DEFAULT_TOL):
    """
    Nonzero eigenvalues of both reductions of an atom, paired by size.

    For an atom ``P_psi`` the reductions have eigenvalues ``lam_i^2 / n2`` and
    ``lam_i^2 / n1`` for the Schmidt coefficients ``lam_i``, so the pairs
    satisfy ``alpha_i = (n1 / n2) beta_i``. Both arrays are descending.
    """
    check = atom_check(a, tol)
    if not check.is_atom:
        raise ValidationError("atom_reduction_spectrum needs an atom (rank-1 projection)")
    a1 = reduced_effect(a, dims, 1).matrix
    a2 = reduced_effect(a, dims, 2).matrix
    alphas = np.sort(np.linalg.eigvalsh(a1))[::-1]
    betas = np.sort(np.linalg.eigvalsh(a2))[::-1]
    alphas, betas = alphas[alphas > tol], betas[betas > tol]
    if alphas.size != betas.size:
        raise ValidationError("reductions have different numbers of nonzero eigenvalues")
    return alphas, betas
