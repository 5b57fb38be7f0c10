"""
The "part of" relation between observables, instruments and measurement models.

``alpha`` is a part of ``beta`` when some surjection ``f`` of outcome sets gives
``alpha_x = beta_{f^{-1}(x)}``. Deciding this is a set-partition search: each
outcome of ``beta`` is assigned to one outcome of ``alpha`` and every fiber sum
must reproduce the child. The search is exact and prunes with the Loewner
order, since a partial fiber sum can only grow.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence, Union

import numpy as np

from . import linalg as la
from .errors import DimensionError, LabelError, QuantumError, ValidationError
from .instruments import Instrument, coarse_grain_instr, measured_observable
from .linalg import DEFAULT_TOL
from .maps import Surjection, product_label, projection_maps
from .models import MeasurementModel, model_instrument
from .observables import (
    Observable,
    coarse_grain,
    product_outcomes,
    seq_prod_obs,
)

Entity = Union[Observable, Instrument, MeasurementModel]

DEFAULT_MAX_OUTCOMES = 8


class StaleWitnessError(QuantumError):
    """A stored certificate no longer replays within tolerance."""


def entity_type(e) -> int:
    """1 for observables, 2 for instruments, 3 for measurement models."""
    if isinstance(e, Observable):
        return 1
    if isinstance(e, Instrument):
        return 2
    if isinstance(e, MeasurementModel):
        return 3
    raise TypeError(f"not an entity: {type(e).__name__}")


def base_dim(e) -> int:
    return e.base_dim if isinstance(e, MeasurementModel) else e.dim


def lower(e, to_type: int, tol: float = DEFAULT_TOL):
    """Apply the hat map until ``e`` has type ``to_type``."""
    t = entity_type(e)
    if to_type > t:
        raise ValueError("cannot raise an entity to a higher type")
    if t == 3 and to_type < 3:
        e, t = model_instrument(e, tol), 2
    if t == 2 and to_type < 2:
        e = measured_observable(e)
    return e


@dataclass(frozen=True, eq=False)
class PartCertificate:
    """Proof that ``child = f(parent)`` (after lowering the parent if needed)."""

    child: Entity
    parent: Entity
    map: Surjection
    residual: float

    def replay(self, tol: float = DEFAULT_TOL) -> float:
        """Recompute the residual from scratch."""
        return part_residual(self.child, self.parent, self.map, tol)


@dataclass(frozen=True, eq=False)
class CoexistenceWitness:
    parent: Entity
    certificates: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if any(c.parent is not self.parent for c in self.certificates):
            raise ValidationError("all certificates must share the witness parent")


def _obs_fiber_residual(child: Observable, parent: Observable, f: Surjection) -> float:
    pushed = coarse_grain(parent, f)
    if set(pushed.labels) != set(child.labels):
        raise LabelError("map codomain does not match the child's outcomes")
    return max(la.scaled_distance(child[x], pushed[x]) for x in child)


def _instr_fiber_residual(child: Instrument, parent: Instrument, f: Surjection) -> float:
    pushed = coarse_grain_instr(parent, f)
    if set(pushed.labels) != set(child.labels):
        raise LabelError("map codomain does not match the child's outcomes")
    # Choi residual per unit of dim_in * dim_out
    return max(la.frobenius(child[x].choi - pushed[x].choi) / child.dim ** 2 for x in child)


def part_residual(child, parent, f: Surjection, tol: float = DEFAULT_TOL) -> float:
    """Residual of ``child = f(parent)`` at the child's type."""
    tc, tp = entity_type(child), entity_type(parent)
    if tc == 3 and tp == 3:
        return _obs_fiber_residual(child.F, parent.F, f)
    p = lower(parent, tc, tol)
    if tc == 1:
        return _obs_fiber_residual(child, p, f)
    return _instr_fiber_residual(child, p, f)


def _search(
    child: list[np.ndarray],
    parent: list[np.ndarray],
    loewner_tol: float,
    close: Callable[[np.ndarray, np.ndarray], bool],
) -> list[int] | None:
    """
    Depth-first assignment of parent blocks to child blocks.

    Parent blocks are visited in descending trace order (large blocks fail the
    Loewner test first). Returns ``assignment[j] = child index`` for every
    parent block ``j``, or ``None``.
    """
    n_child, n_parent = len(child), len(parent)
    if n_parent < n_child:
        return None
    traces = [float(np.trace(m).real) for m in parent]
    order = sorted(range(n_parent), key=lambda j: -traces[j])
    sums = [np.zeros_like(child[0]) for _ in range(n_child)]
    counts = [0] * n_child
    assignment = [-1] * n_parent

    def fits(c: int, candidate: np.ndarray) -> bool:
        gap = child[c] - candidate
        return float(np.linalg.eigvalsh((gap + gap.conj().T) / 2)[0]) >= -loewner_tol

    def rec(pos: int) -> bool:
        if pos == n_parent:
            return all(counts) and all(close(child[c], sums[c]) for c in range(n_child))
        if sum(1 for k in counts if k == 0) > n_parent - pos:
            return False
        j = order[pos]
        for c in range(n_child):
            candidate = sums[c] + parent[j]
            if not fits(c, candidate):
                continue
            previous = sums[c]
            sums[c], counts[c], assignment[j] = candidate, counts[c] + 1, c
            if rec(pos + 1):
                return True
            sums[c], counts[c], assignment[j] = previous, counts[c] - 1, -1
        return False

    return assignment if rec(0) else None


def find_part_map(child: Observable, parent: Observable, tol: float = DEFAULT_TOL):
    """
    Search for ``f`` with ``child_x = sum_{f(y) = x} parent_y``.

    Returns a :class:`PartCertificate` or ``None``. The search is exhaustive,
    so ``None`` means no surjection works within ``tol``.
    """
    if child.dim != parent.dim:
        raise DimensionError(f"observables act on different dims: {child.dim} vs {parent.dim}")
    c_labels, p_labels = child.labels, parent.labels
    found = _search(
        [child[x] for x in c_labels],
        [parent[y] for y in p_labels],
        tol,
        lambda a, b: la.approx_eq(a, b, tol),
    )
    if found is None:
        return None
    f = Surjection(p_labels, c_labels, tuple(c_labels[i] for i in found))
    return PartCertificate(child, parent, f, _obs_fiber_residual(child, parent, f))


def find_part_map_instr(child: Instrument, parent: Instrument, tol: float = DEFAULT_TOL):
    """As :func:`find_part_map`, comparing Choi matrices fiber by fiber."""
    if child.dim != parent.dim:
        raise DimensionError(f"instruments act on different dims: {child.dim} vs {parent.dim}")
    n = child.dim
    c_labels, p_labels = child.labels, parent.labels
    found = _search(
        [child[x].choi for x in c_labels],
        [parent[y].choi for y in p_labels],
        tol * n,
        lambda a, b: la.frobenius(a - b) <= tol * n * n,
    )
    if found is None:
        return None
    f = Surjection(p_labels, c_labels, tuple(c_labels[i] for i in found))
    return PartCertificate(child, parent, f, _instr_fiber_residual(child, parent, f))


def _models_share_setup(M1: MeasurementModel, M2: MeasurementModel, tol: float) -> bool:
    if (M1.base_dim, M1.probe_dim) != (M2.base_dim, M2.probe_dim):
        return False
    if not la.approx_eq(M1.eta, M2.eta, tol):
        return False
    return la.frobenius(M1.nu.choi - M2.nu.choi) <= tol * M1.nu.dim_in ** 2


def part_of(alpha, beta, tol: float = DEFAULT_TOL):
    """
    Decide ``alpha -> beta`` for entities of any types.

    A lower-type ``alpha`` is compared with the hat (or double hat) of
    ``beta``. Two models are comparable only when they share base, probe,
    probe state and interaction; then their probe observables are compared.
    A higher-type entity is never part of a lower-type one.
    """
    ta, tb = entity_type(alpha), entity_type(beta)
    if base_dim(alpha) != base_dim(beta):
        raise DimensionError("entities act on different base dims")
    if ta > tb:
        return None
    if ta == 3:
        if not _models_share_setup(alpha, beta, tol):
            return None
        cert = find_part_map(alpha.F, beta.F, tol)
    elif ta == 1:
        cert = find_part_map(alpha, lower(beta, 1, tol), tol)
    else:
        cert = find_part_map_instr(alpha, lower(beta, 2, tol), tol)
    if cert is None:
        return None
    return PartCertificate(alpha, beta, cert.map, cert.residual)


def equivalent(alpha, beta, tol: float = DEFAULT_TOL) -> bool:
    """``alpha`` and ``beta`` are relabelings of each other (bijective part map)."""
    if entity_type(alpha) != entity_type(beta):
        return False
    a = alpha.F if isinstance(alpha, MeasurementModel) else alpha
    b = beta.F if isinstance(beta, MeasurementModel) else beta
    if len(a) != len(b):
        return False
    return part_of(alpha, beta, tol) is not None


def compose_certificates(outer: PartCertificate, inner: PartCertificate) -> PartCertificate:
    """From ``A = g(B)`` and ``B = f(C)`` build ``A = (g o f)(C)``."""
    if outer.parent is not inner.child:
        raise ValidationError("certificates do not chain: outer parent is not inner child")
    h = inner.map.then(outer.map)
    cert = PartCertificate(outer.child, inner.parent, h, 0.0)
    return PartCertificate(outer.child, inner.parent, h, cert.replay())


def restricted_growth_strings(n: int) -> Iterator[list[int]]:
    """All set partitions of ``range(n)`` as restricted growth strings, lexicographically."""
    if n == 0:
        yield []
        return
    a = [0] * n
    while True:
        yield list(a)
        # rightmost position that can still grow
        i = n - 1
        while i > 0 and a[i] > max(a[:i]):
            i -= 1
        if i == 0:
            return
        a[i] += 1
        for k in range(i + 1, n):
            a[k] = 0


def enumerate_parts(parent: Observable, tol: float = DEFAULT_TOL,
                    max_outcomes: int = DEFAULT_MAX_OUTCOMES) -> list[tuple[Observable, Surjection]]:
    """
    All parts of ``parent`` up to equivalence, each with its inducing surjection.

    Set partitions are visited in restricted-growth-string order; the first
    partition of each equivalence class is kept. Child outcomes are labelled
    ``"1", "2", ...`` by block index.
    """
    if len(parent) > max_outcomes:
        raise ValidationError(
            f"parent has {len(parent)} outcomes, above the enumeration cap {max_outcomes}"
        )
    labels = parent.labels
    reps: list[tuple[Observable, Surjection]] = []
    for rgs in restricted_growth_strings(len(labels)):
        k = max(rgs) + 1
        codomain = tuple(str(i + 1) for i in range(k))
        f = Surjection(labels, codomain, tuple(str(b + 1) for b in rgs))
        part = coarse_grain(parent, f)
        if any(len(r) == k and find_part_map(part, r, tol) is not None for r, _ in reps):
            continue
        reps.append((part, f))
    return reps


def marginal_residual(B: Observable, members: Sequence[Observable]) -> float:
    """Largest distance between each member and the matching marginal of ``B``."""
    expected = product_outcomes(*members)
    if set(B.labels) != set(expected) or len(B) != len(expected):
        raise LabelError("joint outcome space is not the product of the members' outcome spaces")
    worst = 0.0
    for member, proj in zip(members, projection_maps(*(m.labels for m in members))):
        marginal = coarse_grain(B, proj)
        worst = max(worst, max(la.scaled_distance(member[x], marginal[x]) for x in member))
    return worst


def marginal_check(B: Observable, members: Sequence[Observable], tol: float = DEFAULT_TOL) -> bool:
    """True iff every member is the corresponding marginal of ``B`` within tol."""
    return marginal_residual(B, members) <= tol


def joint_from_common(C: Observable, maps: Sequence[Surjection]) -> Observable:
    """
    Joint observable on the product space from a common refinement ``C``.

    ``B_t = sum{C_y : (f_1(y), ..., f_n(y)) = t}``. Tuples never hit by ``C``
    get the zero effect so the outcome space is the full product.
    """
    for f in maps:
        if set(f.domain) != set(C.labels):
            raise LabelError("every map must have the common observable's outcomes as domain")
    import itertools

    zero = np.zeros((C.dim, C.dim), dtype=np.complex128)
    joint = {product_label(*t): zero for t in itertools.product(*(f.codomain for f in maps))}
    images = [f.as_dict() for f in maps]
    for y in C.labels:
        key = product_label(*(g[y] for g in images))
        joint[key] = joint[key] + C[y]
    return Observable(joint)


def joint_for_commuting(A: Observable, B: Observable, tol: float = DEFAULT_TOL) -> Observable:
    """
    ``A o B`` as a joint observable for commuting ``A`` and ``B``.

    Raises
    ------
    ValidationError
        If some ``A_x, B_y`` fail to commute; ``residual`` is the largest
        commutator norm.
    """
    worst = max(la.commutator_norm(A[x], B[y]) for x in A for y in B)
    if worst > tol * np.sqrt(A.dim):
        raise ValidationError(f"observables do not commute (max commutator norm {worst:.3e})",
                              residual=worst)
    return seq_prod_obs(A, B, tol)


def coexistence_witness(members: Sequence, parent, tol: float = DEFAULT_TOL):
    """Certificates that every member is a part of ``parent``, or ``None``."""
    certs = []
    for m in members:
        cert = part_of(m, parent, tol)
        if cert is None:
            return None
        certs.append(cert)
    return CoexistenceWitness(parent, tuple(certs))


def joint_distribution(witness: CoexistenceWitness, rho, events: Sequence, tol: float = DEFAULT_TOL) -> float:
    """
    Joint probability that every member lands in its event.

    This is the probability of the intersection fiber
    ``Z = f_1^{-1}(X_1) & ... & f_n^{-1}(X_n)`` under the parent.
    """
    if len(events) != len(witness.certificates):
        raise ValidationError("need exactly one event per certificate")
    for cert in witness.certificates:
        r = cert.replay(tol)
        if r > tol:
            raise StaleWitnessError(f"certificate no longer replays (residual {r:.3e})")
    parent = witness.parent
    domain = set(witness.certificates[0].map.domain) if witness.certificates else set()
    Z = set(domain)
    for cert, X in zip(witness.certificates, events):
        unknown = set(X) - set(cert.map.codomain)
        if unknown:
            raise LabelError(f"event labels {sorted(unknown)} are not outcomes of the member")
        Z &= cert.map.preimage(X)
    r = la.as_matrix(getattr(rho, "matrix", rho))
    if isinstance(parent, MeasurementModel):
        parent = model_instrument(parent, tol)
    if isinstance(parent, Instrument):
        ordered = [y for y in parent.labels if y in Z]
        out = parent.event(ordered)(r)
        return float(np.trace(out).real)
    ordered = [y for y in parent.labels if y in Z]
    return float(sum(np.trace(r @ parent[y]).real for y in ordered))
