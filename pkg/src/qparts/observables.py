"""
Finite observables (POVMs) and the operations that build new ones.

Outcome labels are strings and observables keep insertion order, so every
derived object and every report iterates deterministically.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from . import linalg as la
from .effects import DensityState, clip_probability, effect_violation, reduced_effect, seq_prod
from .errors import DimensionError, LabelError, ValidationError
from .linalg import DEFAULT_TOL
from .maps import Surjection, product_label


class Observable:
    """
    Outcome label -> effect map whose effects sum to the identity.

    Build validated instances with :func:`make_observable`; the constructor
    itself only normalizes storage.
    """

    __slots__ = ("dim", "_effects")

    def __init__(self, effects: Mapping[str, np.ndarray]):
        if not effects:
            raise ValidationError("an observable needs at least one outcome")
        store = {}
        for label, m in effects.items():
            m = la.as_matrix(getattr(m, "matrix", m))
            m = (m + la.dagger(m)) / 2
            m.setflags(write=False)
            store[str(label)] = m
        if len(store) != len(effects):
            raise LabelError("outcome labels collide after conversion to str")
        dims = {m.shape for m in store.values()}
        if len(dims) != 1:
            raise DimensionError(f"effects have different shapes: {sorted(dims)}")
        self._effects = store
        self.dim = next(iter(store.values())).shape[0]

    def __getitem__(self, label: str) -> np.ndarray:
        try:
            return self._effects[label]
        except KeyError:
            raise LabelError(f"unknown outcome label {label!r}") from None

    def __len__(self):
        return len(self._effects)

    def __iter__(self):
        return iter(self._effects)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self._effects)

    def items(self):
        return self._effects.items()

    def matrices(self) -> list[np.ndarray]:
        return list(self._effects.values())

    def relabel(self, mapping: Mapping[str, str]) -> "Observable":
        return Observable({mapping[k]: v for k, v in self._effects.items()})

    def __repr__(self):
        return f"Observable(dim={self.dim}, outcomes={list(self._effects)})"


def observable_residual(effects: Mapping[str, np.ndarray], tol: float = DEFAULT_TOL) -> float:
    """Max of per-effect bound violation and the scaled sum-to-identity error."""
    mats = [la.as_matrix(getattr(m, "matrix", m)) for m in effects.values()]
    n = mats[0].shape[0]
    worst = max(effect_violation(m, tol)[0] for m in mats)
    total = la.scaled_distance(sum(mats), np.eye(n))
    return max(worst, total)


def make_observable(effects: Mapping[str, np.ndarray], tol: float = DEFAULT_TOL) -> Observable:
    """
    Validate a POVM.

    Raises
    ------
    ValidationError
        If any member is not an effect, or ``sum_x A_x`` misses the identity by
        more than ``tol`` (scaled Frobenius). The exception's ``residual`` is
        the max of both violations.
    """
    for label, m in effects.items():
        try:
            la.hermitian_part(getattr(m, "matrix", m), tol)
        except ValidationError as exc:
            raise ValidationError(f"outcome {label!r}: {exc}") from None
    obs = Observable(effects)
    for label, m in obs.items():
        violation, bound = effect_violation(m, tol)
        if violation > tol:
            raise ValidationError(
                f"outcome {label!r} is not an effect: {bound} violated by {violation:.3e}",
                residual=observable_residual(effects, tol),
            )
    total = la.scaled_distance(sum(obs.matrices()), np.eye(obs.dim))
    if total > tol:
        raise ValidationError(
            f"effects do not sum to the identity (residual {total:.3e})",
            residual=observable_residual(effects, tol),
        )
    return obs


def observables_close(a: Observable, b: Observable, tol: float = DEFAULT_TOL) -> bool:
    """Same labels in the same order and effect-wise ``approx_eq``."""
    return a.labels == b.labels and all(la.approx_eq(a[x], b[x], tol) for x in a)


def observable_distance(a: Observable, b: Observable) -> float:
    """Largest scaled Frobenius distance over matching labels."""
    if set(a.labels) != set(b.labels):
        raise LabelError("observables have different outcome sets")
    return max(la.scaled_distance(a[x], b[x]) for x in a)


def trivial_observable(n: int, label: str = "1") -> Observable:
    return Observable({label: np.eye(n)})


def event_effect(A: Observable, X: Iterable[str]) -> np.ndarray:
    """``A_X = sum_{x in X} A_x``; the empty event gives the zero effect."""
    out = np.zeros((A.dim, A.dim), dtype=np.complex128)
    for x in dict.fromkeys(X):
        out = out + A[x]
    return out


def _same_dim(A, B):
    if A.dim != B.dim:
        raise DimensionError(f"observables act on different dims: {A.dim} vs {B.dim}")


def seq_prod_obs(A: Observable, B: Observable, tol: float = DEFAULT_TOL) -> Observable:
    """``A o B`` on ``Omega_A x Omega_B`` with ``(A o B)_(x,y) = A_x o B_y``."""
    _same_dim(A, B)
    return Observable(
        {product_label(x, y): seq_prod(A[x], B[y], tol).matrix for x in A for y in B}
    )


def condition_obs(B: Observable, A: Observable, tol: float = DEFAULT_TOL) -> Observable:
    """``(B | A)_y = sum_x A_x o B_y``."""
    _same_dim(A, B)
    roots = [la.principal_sqrt(A[x], tol) for x in A]
    return Observable({y: sum(r @ B[y] @ r for r in roots) for y in B})


def distribution(rho, A: Observable, tol: float = DEFAULT_TOL) -> dict[str, float]:
    """Outcome probabilities ``tr(rho A_x)`` as an ordered ``label -> p`` dict."""
    if isinstance(rho, DensityState) and rho.kind != "full":
        raise ValidationError("distribution needs a full state")
    r = la.as_matrix(getattr(rho, "matrix", rho))
    if r.shape[0] != A.dim:
        raise DimensionError(f"state dim {r.shape[0]} does not match observable dim {A.dim}")
    return {x: clip_probability(float(np.trace(r @ m).real), tol) for x, m in A.items()}


def then_probability(rho, A: Observable, X, B: Observable, Y, tol: float = DEFAULT_TOL) -> float:
    """Joint probability of ``A_X`` then ``B_Y``: ``tr[rho (A o B)_{X x Y}]``."""
    for lab in X:
        A[lab]
    for lab in Y:
        B[lab]
    AB = seq_prod_obs(A, B, tol)
    event = [product_label(x, y) for x in X for y in Y]
    r = la.as_matrix(getattr(rho, "matrix", rho))
    return clip_probability(float(np.trace(r @ event_effect(AB, event)).real), tol)


@dataclass(frozen=True, eq=False)
class StochasticMatrix:
    """Transition probabilities ``entries[i, j] = nu(rows[i] -> cols[j])``."""

    rows: tuple[str, ...]
    cols: tuple[str, ...]
    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        if e.shape != (len(self.rows), len(self.cols)):
            raise DimensionError(f"entries shape {e.shape} does not match labels")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    def __getitem__(self, key) -> float:
        x, y = key
        return float(self.entries[self.rows.index(x), self.cols.index(y)])


def make_stochastic(rows, cols, entries, tol: float = DEFAULT_TOL) -> StochasticMatrix:
    nu = StochasticMatrix(tuple(map(str, rows)), tuple(map(str, cols)), entries)
    if np.any(nu.entries < -tol):
        raise ValidationError("stochastic matrix has negative entries")
    sums = nu.entries.sum(axis=1)
    bad = np.abs(sums - 1) > tol
    if np.any(bad):
        raise ValidationError(f"rows {[r for r, b in zip(nu.rows, bad) if b]} do not sum to 1")
    return nu


def post_process(nu: StochasticMatrix, A: Observable) -> Observable:
    """``(nu . A)_y = sum_x nu_xy A_x``."""
    if set(nu.rows) != set(A.labels):
        raise LabelError("stochastic matrix rows do not match the observable's outcomes")
    return Observable({y: sum(nu[x, y] * A[x] for x in A) for y in nu.cols})


def random_measure(A: Observable) -> dict[str, float]:
    """Distribution of ``A`` in the maximally mixed state: ``tr(A_x) / n``."""
    return {x: float(np.trace(m).real) / A.dim for x, m in A.items()}


def tensor_obs(A1: Observable, A2: Observable) -> Observable:
    """Composite observable ``B_(x,y) = A1_x (x) A2_y`` on ``H_1 (x) H_2``."""
    return Observable({product_label(x, y): np.kron(A1[x], A2[y]) for x in A1 for y in A2})


def reduced_obs(A: Observable, dims, side: int) -> Observable:
    """Outcome-wise reduced effects of an observable on ``H_1 (x) H_2``."""
    n1, n2 = dims
    if A.dim != n1 * n2:
        raise DimensionError(f"observable dim {A.dim} does not factor as {n1}x{n2}")
    return Observable({x: reduced_effect(m, dims, side).matrix for x, m in A.items()})


def coarse_grain(B: Observable, f: Surjection | Mapping) -> Observable:
    """
    Push ``B`` forward along a surjection: ``A_x = sum_{f(y) = x} B_y``.

    ``f`` may be a :class:`Surjection` or a plain ``label -> label`` mapping
    (codomain ordered by first appearance).
    """
    if not isinstance(f, Surjection):
        f = Surjection.from_mapping(f)
    if set(f.domain) != set(B.labels):
        raise LabelError("surjection domain does not match the observable's outcomes")
    fibers = {x: [] for x in f.codomain}
    for y, x in zip(f.domain, f.assignment):
        fibers[x].append(B[y])
    return Observable({x: sum(ms) for x, ms in fibers.items()})


def pushforward(dist: Mapping[str, float], f: Surjection) -> dict[str, float]:
    out = {x: 0.0 for x in f.codomain}
    for y, x in zip(f.domain, f.assignment):
        out[x] += dist[y]
    return out


def product_outcomes(*observables: Observable) -> list[str]:
    return [product_label(*t) for t in itertools.product(*(o.labels for o in observables))]
