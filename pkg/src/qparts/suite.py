"""
Theorem suite: numerical verification of the measurement calculus on random instances.

Each check draws its own instances from ``default_rng([seed, crc32(id)])`` so a
check's result depends only on the seed and its id, never on which other
checks ran. A check returns a residual; the registry turns it into a status
by comparing against the check's threshold (``at_most`` for identities,
``above`` for generic strict inequalities). Flagged checks report a residual
for a claim that is known not to hold as literally stated, after their
must-hold part has passed.
"""

from __future__ import annotations

import itertools
import time
import zlib
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import linalg as la
from . import random as qr
from .effects import (
    atom_reduction_spectrum,
    factorization_test,
    reduced_effect,
)
from .instruments import (
    Instrument,
    _op,
    coarse_grain_instr,
    condition_instr,
    instr_random_measure,
    instrument_distance,
    kraus_instrument,
    luders,
    measured_observable,
    product_instr,
    reduced_instr,
    tensor_instr,
    trivial,
    trivial_composites,
    trivial_distance,
    reduced_trivial_residuals,
)
from .linalg import DEFAULT_TOL
from .maps import Surjection, product_label
from .models import composite_mm, model_instrument, model_observable, reduced_model_instrument
from .observables import (
    Observable,
    coarse_grain,
    condition_obs,
    distribution,
    event_effect,
    make_observable,
    make_stochastic,
    observable_distance,
    post_process,
    pushforward,
    random_measure,
    reduced_obs,
    seq_prod_obs,
    tensor_obs,
)
from .parts import (
    compose_certificates,
    enumerate_parts,
    find_part_map,
    find_part_map_instr,
    joint_from_common,
    marginal_residual,
    part_of,
)


class CheckError(Exception):
    """A check could not produce a residual (e.g. a generic draw degenerated twice)."""


@dataclass
class CheckResult:
    id: str
    citation: str
    status: str
    residual: float
    runtime_ms: float | None = None
    detail: str = ""


@dataclass
class Check:
    id: str
    citation: str
    fn: Callable
    threshold: float
    mode: str = "at_most"
    flagged: bool = False


@dataclass
class Report:
    seed: int
    tolerance: float
    checks: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.status in ("pass", "flagged") for c in self.checks)


CHECKS: dict[str, Check] = {}


def check(id: str, citation: str, threshold: float = 1e-9, mode: str = "at_most", flagged: bool = False):
    def register(fn):
        CHECKS[id] = Check(id, citation, fn, threshold, mode, flagged)
        return fn
    return register


def check_rng(seed: int, id: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(id.encode())])


def run_check(id: str, seed: int = 0, tol: float = DEFAULT_TOL, timings: bool = False) -> CheckResult:
    c = CHECKS[id]
    start = time.perf_counter()
    try:
        out = c.fn(check_rng(seed, id), tol)
    except CheckError as exc:
        return CheckResult(c.id, c.citation, "fail", float("nan"), None, str(exc))
    elapsed = (time.perf_counter() - start) * 1e3 if timings else None
    detail = ""
    if isinstance(out, tuple):
        # flagged checks return (must-hold residual, reported residual)
        must, reported = out
        status = "flagged" if must <= c.threshold else "fail"
        detail = f"must-hold residual {must:.6e}"
        return CheckResult(c.id, c.citation, status, float(reported), elapsed, detail)
    residual = float(out)
    if c.mode == "at_most":
        ok = residual <= c.threshold
    else:
        ok = residual > c.threshold
    return CheckResult(c.id, c.citation, "pass" if ok else "fail", residual, elapsed, detail)


def run_suite(seed: int = 0, tol: float = DEFAULT_TOL, only=None, timings: bool = False) -> Report:
    report = Report(seed, tol)
    for id in CHECKS:
        if only and id not in only:
            continue
        report.checks.append(run_check(id, seed, tol, timings))
    return report


# ---------------------------------------------------------------- helpers

def _dim(rng, lo=2, hi=4) -> int:
    return int(rng.integers(lo, hi + 1))


def _random_event(rng, labels):
    mask = rng.integers(0, 2, len(labels)).astype(bool)
    return [x for x, m in zip(labels, mask) if m]


def _obs_labels(prefix: str, k: int) -> list[str]:
    return [f"{prefix}{i}" for i in range(k)]


def _generic(draw, test, what: str):
    """Draw an instance; if the generic property fails, redraw once, then give up."""
    for _ in range(2):
        inst = draw()
        value = test(inst)
        if value is not None:
            return value
    raise CheckError(f"{what}: generic condition failed on two draws")


def _instr_choi_residual(I: Instrument, J: Instrument) -> float:
    return max(la.frobenius(I[x].choi - J[x].choi) / I.dim for x in I)


# ------------------------------------------------------- hats and parts

@check("hat-duality", "tr[I_X(rho)] = tr(rho I^_X) for every state and event", 1e-10)
def _hat_duality(rng, tol):
    worst = 0.0
    for _ in range(100):
        n, k = _dim(rng), _dim(rng, 2, 4)
        I = qr.instrument(rng, n, k, int(rng.integers(1, 3)))
        A = measured_observable(I)
        for _ in range(50):
            rho = qr.state(rng, n)
            X = _random_event(rng, I.labels)
            lhs = np.trace(I.event(X)(rho)).real if X else 0.0
            rhs = np.trace(rho @ event_effect(A, X)).real
            worst = max(worst, abs(lhs - rhs))
    return worst


@check("coarse-grain-hat", "f(I^) = f(I)^ for every surjection f", 1e-10)
def _coarse_grain_hat(rng, tol):
    worst = 0.0
    for _ in range(100):
        n, k = _dim(rng), _dim(rng, 2, 5)
        I = qr.instrument(rng, n, k)
        f = Surjection.from_mapping(qr.surjection_labels(rng, list(I.labels), int(rng.integers(1, k + 1))))
        worst = max(worst, observable_distance(coarse_grain(measured_observable(I), f),
                                               measured_observable(coarse_grain_instr(I, f))))
    return worst


@check("instrument-part-hat", "I -> J with map f implies I^ = f(J^)", 1e-10)
def _instrument_part_hat(rng, tol):
    worst = 0.0
    for _ in range(30):
        n, k = _dim(rng, 2, 3), _dim(rng, 2, 4)
        J = qr.instrument(rng, n, k)
        g = Surjection.from_mapping(qr.surjection_labels(rng, list(J.labels), int(rng.integers(1, k + 1))))
        I = coarse_grain_instr(J, g)
        cert = find_part_map_instr(I, J, tol)
        if cert is None:
            return float("inf")
        worst = max(worst, observable_distance(measured_observable(I),
                                               coarse_grain(measured_observable(J), cert.map)))
    return worst


@check("part-transitivity", "A = g(B), B = f(C) implies A = (g o f)(C)", 1e-10)
def _part_transitivity(rng, tol):
    worst = 0.0
    for _ in range(30):
        n = _dim(rng, 2, 3)
        C = qr.observable(rng, n, int(rng.integers(3, 6)))
        B = coarse_grain(C, qr.surjection_labels(rng, list(C.labels), 3))
        A = coarse_grain(B, qr.surjection_labels(rng, list(B.labels), 2))
        inner, outer = find_part_map(B, C, tol), find_part_map(A, B, tol)
        if inner is None or outer is None:
            return float("inf")
        outer = type(outer)(outer.child, inner.child, outer.map, outer.residual)
        worst = max(worst, compose_certificates(outer, inner).replay(tol))
    return worst


@check("cross-type-part-lift", "A -> I gives I1 = f(I) with A = I1^", 1e-10)
def _cross_type_lift(rng, tol):
    worst = 0.0
    for _ in range(30):
        n, k = _dim(rng, 2, 3), _dim(rng, 2, 4)
        I = qr.instrument(rng, n, k)
        A = coarse_grain(measured_observable(I), qr.surjection_labels(rng, list(I.labels), 2))
        cert = part_of(A, I, tol)
        if cert is None:
            return float("inf")
        I1 = coarse_grain_instr(I, cert.map)
        worst = max(worst, observable_distance(A, measured_observable(I1)))
    return worst


@check("pushforward-distribution", "distribution of f(B) is the push-forward of B's", 1e-12)
def _pushforward(rng, tol):
    worst = 0.0
    for _ in range(100):
        n, k = _dim(rng), _dim(rng, 2, 5)
        B = qr.observable(rng, n, k)
        f = Surjection.from_mapping(qr.surjection_labels(rng, list(B.labels), int(rng.integers(1, k + 1))))
        rho = qr.state(rng, n)
        got = distribution(rho, coarse_grain(B, f))
        want = pushforward(distribution(rho, B), f)
        worst = max(worst, max(abs(got[x] - want[x]) for x in got))
    return worst


def _product_maps(A: Observable, B: Observable, h: dict):
    pairs = [(x, y) for x in A.labels for y in B.labels]
    dom = [product_label(x, y) for x, y in pairs]
    f = Surjection(tuple(dom), A.labels, tuple(x for x, _ in pairs))
    g = Surjection(tuple(dom), B.labels, tuple(y for _, y in pairs))
    h_cod = tuple(dict.fromkeys(h.values()))
    u_cod = tuple(product_label(x, z) for x in A.labels for z in h_cod)
    u = Surjection(tuple(dom), u_cod, tuple(product_label(x, h[y]) for x, y in pairs))
    return f, g, u


@check("sequential-product-parts", "A, (B|A) and A o h(B) are parts of A o B via f, g, u", 1e-10)
def _seq_parts(rng, tol):
    worst = 0.0
    for _ in range(50):
        n = _dim(rng, 2, 3)
        A = qr.observable(rng, n, 2, ["a0", "a1"])
        B = qr.observable(rng, n, 3, ["b0", "b1", "b2"])
        h = {"b0": "c0", "b1": "c1", "b2": "c1"}
        AB = seq_prod_obs(A, B, tol)
        hB = coarse_grain(B, h)
        f, g, u = _product_maps(A, B, h)
        targets = [(A, f), (condition_obs(B, A, tol), g), (seq_prod_obs(A, hB, tol), u)]
        for child, expected_map in targets:
            cert = find_part_map(child, AB, tol)
            if cert is None or cert.map.as_dict() != expected_map.as_dict():
                return float("inf")
            worst = max(worst, cert.replay(tol))
    return worst


# nine named coarse-grainings of a binary sequential product, as maps on
# outcomes (0,0), (0,1), (1,0), (1,1) in the same column order
NAMED_MAPS = {
    "f1": (1, 2, 3, 4), "f2": (1, 2, 2, 2), "f3": (2, 2, 1, 2),
    "f4": (2, 1, 2, 2), "f5": (2, 2, 2, 1), "f6": (1, 2, 1, 2),
    "f7": (1, 1, 2, 2), "f8": (1, 2, 2, 1), "f9": (1, 1, 1, 1),
}
BINARY_OUTCOMES = ("(0,0)", "(0,1)", "(1,0)", "(1,1)")


def named_surjection(name: str) -> Surjection:
    values = NAMED_MAPS[name]
    return Surjection.from_mapping(dict(zip(BINARY_OUTCOMES, map(str, values))),
                                   sorted(set(map(str, values))))


def binary_pair(rng, n: int = 2):
    return qr.observable(rng, n, 2, ["0", "1"]), qr.observable(rng, n, 2, ["0", "1"])


@check("binary-product-named-parts", "the nine named maps f1..f9 give parts of A o B, incl. A (f7) and (B|A) (f6)", 1e-10)
def _named_parts(rng, tol):
    worst = 0.0
    for _ in range(20):
        A, B = binary_pair(rng)
        AB = seq_prod_obs(A, B, tol)
        classes = enumerate_parts(AB, tol)
        for name in NAMED_MAPS:
            part = coarse_grain(AB, named_surjection(name))
            if not any(len(r) == len(part) and find_part_map(part, r, tol) for r, _ in classes):
                return float("inf")
        f6, f7 = coarse_grain(AB, named_surjection("f6")), coarse_grain(AB, named_surjection("f7"))
        worst = max(worst, observable_distance(f7, A.relabel({"0": "1", "1": "2"})),
                    observable_distance(f6, condition_obs(B, A, tol).relabel({"0": "1", "1": "2"})))
    return worst


@check("binary-product-part-count", "a generic binary A o B has exactly nine parts up to equivalence",
       flagged=True)
def _part_count(rng, tol):
    # every set partition of the four outcomes gives a distinct class for generic A, B:
    # Bell(4) = 15, while the nine named maps omit the six three-outcome parts
    counts = []
    for _ in range(20):
        A, B = binary_pair(rng)
        counts.append(len(enumerate_parts(seq_prod_obs(A, B, tol), tol)))
    must = 0.0 if len(set(counts)) == 1 else float("inf")
    return must, float(max(counts) - 9)


@check("instrument-conditioned-part", "(J|I) is a part of I o J; I is generically not", 1e-9)
def _instrument_example(rng, tol):
    worst = 0.0
    for _ in range(10):
        I, J = qr.instrument(rng, 2, 2, 2, ["0", "1"]), qr.instrument(rng, 2, 2, 2, ["0", "1"])
        IJ = product_instr(I, J)
        cert = find_part_map_instr(condition_instr(J, I), IJ, tol)
        if cert is None:
            return float("inf")
        if cert.map.as_dict() != {"(0,0)": "0", "(0,1)": "1", "(1,0)": "0", "(1,1)": "1"}:
            return float("inf")
        if find_part_map_instr(I, IJ, tol) is not None:
            return float("inf")
        worst = max(worst, cert.residual)
    return worst


@check("coexistence-joint-measurability", "coexistence <=> joint measurability, both directions", 1e-10)
def _coexistence(rng, tol):
    worst = 0.0
    for _ in range(30):
        n = _dim(rng, 2, 3)
        C = qr.observable(rng, n, int(rng.integers(3, 6)))
        maps = [Surjection.from_mapping(qr.surjection_labels(rng, list(C.labels), int(rng.integers(2, 4))))
                for _ in range(2)]
        members = [coarse_grain(C, f) for f in maps]
        B = joint_from_common(C, maps)
        worst = max(worst, marginal_residual(B, members))
        for m in members:
            cert = find_part_map(m, B, tol)
            if cert is None:
                return float("inf")
            worst = max(worst, cert.replay(tol))
    return worst


# ------------------------------------------------------------- Lueders

@check("luders-measures-observable", "(L^A)^ = A", 1e-10)
def _luders_hat(rng, tol):
    worst = 0.0
    for _ in range(50):
        A = qr.observable(rng, _dim(rng), _dim(rng, 2, 4))
        worst = max(worst, observable_distance(measured_observable(luders(A, tol)), A))
    return worst


@check("luders-product-commuting", "L^{A o B} = L^A o L^B for commuting A, B", 1e-9)
def _luders_commuting(rng, tol):
    worst = 0.0
    for _ in range(50):
        A, B = qr.commuting_pair(rng, _dim(rng), _dim(rng, 2, 3), _dim(rng, 2, 3))
        lhs = luders(seq_prod_obs(A, B, tol), tol)
        rhs = product_instr(luders(A, tol), luders(B, tol))
        worst = max(worst, instrument_distance(lhs, rhs))
    return worst


@check("luders-product-noncommuting", "L^{A o B} != L^A o L^B for non-commuting A, B", 1e-6, "above")
def _luders_noncommuting(rng, tol):
    def draw():
        n = _dim(rng, 2, 3)
        return qr.observable(rng, n, 2), qr.observable(rng, n, 2)

    def test(pair):
        A, B = pair
        lhs = luders(seq_prod_obs(A, B, tol), tol)
        rhs = product_instr(luders(A, tol), luders(B, tol))
        d = instrument_distance(lhs, rhs)
        return d if d > 1e3 * tol else None

    return min(_generic(draw, test, "non-commuting pair") for _ in range(50))


@check("luders-product-hat", "(L^A o L^B)^ = A o B", 1e-10)
def _luders_product_hat(rng, tol):
    worst = 0.0
    for _ in range(100):
        n = _dim(rng)
        A, B = qr.observable(rng, n, _dim(rng, 2, 3)), qr.observable(rng, n, _dim(rng, 2, 3))
        hat = measured_observable(product_instr(luders(A, tol), luders(B, tol)))
        worst = max(worst, observable_distance(hat, seq_prod_obs(A, B, tol)))
    return worst


def atomic_luders_residuals(A: Observable, B: Observable, rho, tol: float = DEFAULT_TOL):
    """Residuals of the two atomic Lueders identities and of sum(lambda) = 1."""
    LAB = luders(seq_prod_obs(A, B, tol), tol)
    LAoLB = product_instr(luders(A, tol), luders(B, tol))
    phis = {x: np.linalg.eigh(A[x])[1][:, -1] for x in A}
    psis = {y: np.linalg.eigh(B[y])[1][:, -1] for y in B}
    worst, total = 0.0, 0.0
    for x in A:
        for y in B:
            lam = abs(np.vdot(phis[x], psis[y])) ** 2 * np.vdot(phis[x], rho @ phis[x]).real
            total += lam
            k = product_label(x, y)
            worst = max(worst, la.scaled_distance(LAB[k](rho), lam * A[x]),
                        la.scaled_distance(LAoLB[k](rho), lam * B[y]))
    return worst, abs(total - 1)


@check("atomic-luders-weights", "L^{AoB}(rho) = lam A_x and (L^A o L^B)(rho) = lam B_y, sum lam = 1", 1e-9)
def _atomic_luders(rng, tol):
    worst = 0.0
    for _ in range(50):
        n = _dim(rng)
        A, B = qr.projective_observable(rng, n), qr.projective_observable(rng, n)
        res, sum_err = atomic_luders_residuals(A, B, qr.state(rng, n), tol)
        if sum_err > 1e-10:
            return float("inf")
        worst = max(worst, res)
    return worst


def trivial_hat_deviation(I: Instrument, J: Instrument, tol: float = DEFAULT_TOL) -> float:
    lhs = measured_observable(product_instr(I, J))
    rhs = seq_prod_obs(measured_observable(I), measured_observable(J), tol)
    make_observable(dict(lhs.items()), tol)
    make_observable(dict(rhs.items()), tol)
    return max(la.frobenius(lhs[k] - rhs[k]) for k in lhs)


@check("trivial-product-hat-differs", "(I o J)^ != I^ o J^ for generic trivial I, J", 1e-6, "above")
def _trivial_differs(rng, tol):
    def draw():
        n = _dim(rng, 2, 3)
        return qr.trivial_instrument(rng, n, 2), qr.trivial_instrument(rng, n, 2)

    def test(pair):
        d = trivial_hat_deviation(*pair, tol)
        return d if d > 1e3 * tol else None

    return min(_generic(draw, test, "trivial pair") for _ in range(30))


@check("trivial-product-hat-formula", "(I o J)^_(x,y) = tr(delta B_y) A_x for trivial I, J", 1e-10)
def _trivial_formula(rng, tol):
    worst = 0.0
    for _ in range(30):
        n = _dim(rng)
        A, B = qr.observable(rng, n, 2), qr.observable(rng, n, 3)
        delta, gamma = qr.state(rng, n), qr.state(rng, n)
        I, J = trivial(A, delta, tol), trivial(B, gamma, tol)
        worst = max(worst, observable_distance(measured_observable(I), A))
        hat = measured_observable(product_instr(I, J))
        for x in A:
            for y in B:
                want = np.trace(delta @ B[y]).real * A[x]
                worst = max(worst, la.scaled_distance(hat[product_label(x, y)], want))
    return worst


# ----------------------------------------------------- effects on composites

@check("factorization", "a is factorized iff a = (n1 n2 / tr a) a1 (x) a2; a = a1 (x) a2 iff a in {0, 1}", 1e-9)
def _factorization(rng, tol):
    worst = 0.0
    bell = la.projector(np.array([1, 0, 0, 1]) / np.sqrt(2))
    if factorization_test(bell, (2, 2), tol) is not None:
        return float("inf")
    for _ in range(50):
        n1, n2 = _dim(rng, 2, 3), _dim(rng, 2, 3)
        b, c = qr.effect(rng, n1), qr.effect(rng, n2)
        a = np.kron(b, c)
        found = factorization_test(a, (n1, n2), tol)
        if found is None:
            return float("inf")
        worst = max(worst, la.scaled_distance(np.kron(found[0].matrix, found[1].matrix), a))
        # a = a1 (x) a2 only for 0 and 1
        r = qr.effect(rng, n1 * n2)
        for m, expect in ((r, False), (np.zeros((n1 * n2,) * 2), True), (np.eye(n1 * n2), True)):
            a1, a2 = reduced_effect(m, (n1, n2), 1).matrix, reduced_effect(m, (n1, n2), 2).matrix
            if la.approx_eq(m, np.kron(a1, a2), tol) != expect:
                return float("inf")
    return worst


@check("atom-reduction-spectra", "reductions of an atom have paired eigenvalues alpha_i = (n1/n2) beta_i", 1e-9)
def _atom_spectra(rng, tol):
    worst = 0.0
    for n1, n2 in ((2, 2), (2, 3), (3, 2)):
        for _ in range(20):
            a = qr.pure_state(rng, n1 * n2)
            alphas, betas = atom_reduction_spectrum(a, (n1, n2), tol)
            worst = max(worst, float(np.max(np.abs(alphas - (n1 / n2) * betas))))
    return worst


@check("atom-reduction-schmidt", "a1 = (1/n2) sum lam_i^2 P_psi_i from the Schmidt decomposition", 1e-9)
def _atom_schmidt(rng, tol):
    worst = 0.0
    for n1, n2 in ((2, 2), (2, 3), (3, 2), (3, 3)):
        for _ in range(20):
            psi = qr.unit_vector(rng, n1 * n2)
            lam, left, right = la.schmidt(psi, (n1, n2), tol)
            a = la.projector(psi)
            want1 = sum(l ** 2 * la.projector(left[:, i]) for i, l in enumerate(lam)) / n2
            want2 = sum(l ** 2 * la.projector(right[:, i]) for i, l in enumerate(lam)) / n1
            worst = max(worst, la.scaled_distance(reduced_effect(a, (n1, n2), 1).matrix, want1),
                        la.scaled_distance(reduced_effect(a, (n1, n2), 2).matrix, want2))
    return worst


# ------------------------------------------------- observables on composites

def _dims_pair(rng):
    return _dim(rng, 2, 3), _dim(rng, 2, 3)


@check("reduced-observable-distribution", "distribution of A1 at rho1 = distribution of A at rho1 (x) 1/n2", 1e-9)
def _reduced_distribution(rng, tol):
    worst = 0.0
    for _ in range(50):
        n1, n2 = _dims_pair(rng)
        A = qr.observable(rng, n1 * n2, _dim(rng, 2, 4))
        r1, r2 = qr.state(rng, n1), qr.state(rng, n2)
        for side, local, full in ((1, r1, np.kron(r1, np.eye(n2) / n2)),
                                  (2, r2, np.kron(np.eye(n1) / n1, r2))):
            got = distribution(local, reduced_obs(A, (n1, n2), side))
            want = distribution(full, A)
            worst = max(worst, max(abs(got[x] - want[x]) for x in got))
    return worst


@check("composite-observable-reduction", "B1_{XxY} = mu^{A2}(Y) A1_X for B = A1 (x) A2", 1e-9)
def _composite_reduction(rng, tol):
    worst = 0.0
    for _ in range(50):
        n1, n2 = _dims_pair(rng)
        A1, A2 = qr.observable(rng, n1, 2, ["x0", "x1"]), qr.observable(rng, n2, 3, ["y0", "y1", "y2"])
        B = tensor_obs(A1, A2)
        X, Y = _random_event(rng, A1.labels), _random_event(rng, A2.labels)
        event = [product_label(x, y) for x in X for y in Y]
        BXY = event_effect(B, event)
        mu1, mu2 = random_measure(A1), random_measure(A2)
        want1 = sum(mu2[y] for y in Y) * event_effect(A1, X)
        want2 = sum(mu1[x] for x in X) * event_effect(A2, Y)
        worst = max(worst, la.scaled_distance(reduced_effect(BXY, (n1, n2), 1).matrix, want1),
                    la.scaled_distance(reduced_effect(BXY, (n1, n2), 2).matrix, want2))
    return worst


def _random_stochastic(rng, rows, cols):
    e = rng.uniform(0, 1, (len(rows), len(cols)))
    return make_stochastic(rows, cols, e / e.sum(axis=1, keepdims=True))


@check("post-processing-tensor", "(nu.A) (x) (mu.B) = alpha.(A (x) B) with alpha = nu mu", 1e-9)
def _post_tensor(rng, tol):
    worst = 0.0
    for _ in range(50):
        n1, n2 = _dims_pair(rng)
        A, B = qr.observable(rng, n1, 3), qr.observable(rng, n2, 2)
        nu = _random_stochastic(rng, A.labels, ["p", "q"])
        mu = _random_stochastic(rng, B.labels, ["r", "s", "t"])
        lhs = tensor_obs(post_process(nu, A), post_process(mu, B))
        AB = tensor_obs(A, B)
        rows = [product_label(x, r) for x in A for r in B]
        cols = [product_label(y, s) for y in nu.cols for s in mu.cols]
        alpha = np.array([[nu[x, y] * mu[r, s] for y in nu.cols for s in mu.cols] for x in A for r in B])
        rhs = post_process(make_stochastic(rows, cols, alpha, tol), AB)
        worst = max(worst, observable_distance(lhs, rhs))
    return worst


@check("post-processing-reduction", "(nu.A)^i = nu.A^i", 1e-9)
def _post_reduction(rng, tol):
    worst = 0.0
    for _ in range(50):
        n1, n2 = _dims_pair(rng)
        A = qr.observable(rng, n1 * n2, 3)
        nu = _random_stochastic(rng, A.labels, ["p", "q"])
        for side in (1, 2):
            worst = max(worst, observable_distance(reduced_obs(post_process(nu, A), (n1, n2), side),
                                                   post_process(nu, reduced_obs(A, (n1, n2), side))))
    return worst


def _random_joint(rng, n, ka=2, kb=2):
    """A joint observable with its two marginals, built from a random common refinement."""
    C = qr.observable(rng, n, int(rng.integers(max(ka, kb) + 1, 6)))
    f = Surjection.from_mapping(qr.surjection_labels(rng, list(C.labels), ka))
    g = Surjection.from_mapping(qr.surjection_labels(rng, list(C.labels), kb))
    return joint_from_common(C, [f, g]), coarse_grain(C, f), coarse_grain(C, g)


@check("joint-tensor", "joints C1, C2 for (A1, B1), (A2, B2) give joint C1 (x) C2 for A1 (x) A2, B1 (x) B2", 1e-9)
def _joint_tensor(rng, tol):
    worst = 0.0
    for _ in range(50):
        n1, n2 = _dims_pair(rng)
        C1, A1, B1 = _random_joint(rng, n1)
        C2, A2, B2 = _random_joint(rng, n2)
        C = tensor_obs(C1, C2)
        keys1 = list(itertools.product(A1.labels, B1.labels))
        keys2 = list(itertools.product(A2.labels, B2.labels))
        lab = lambda k1, k2: product_label(product_label(*k1), product_label(*k2))  # noqa: E731
        for (x, xp) in itertools.product(A1.labels, A2.labels):
            s = sum(C[lab(k1, k2)] for k1 in keys1 for k2 in keys2 if k1[0] == x and k2[0] == xp)
            worst = max(worst, la.scaled_distance(s, np.kron(A1[x], A2[xp])))
        for (y, yp) in itertools.product(B1.labels, B2.labels):
            s = sum(C[lab(k1, k2)] for k1 in keys1 for k2 in keys2 if k1[1] == y and k2[1] == yp)
            worst = max(worst, la.scaled_distance(s, np.kron(B1[y], B2[yp])))
    return worst


@check("joint-reduction", "a joint C for (A, B) reduces to a joint C^i for (A^i, B^i)", 1e-9)
def _joint_reduction(rng, tol):
    worst = 0.0
    for _ in range(50):
        n1, n2 = _dims_pair(rng)
        C, A, B = _random_joint(rng, n1 * n2)
        for side in (1, 2):
            red = lambda o: reduced_obs(o, (n1, n2), side)  # noqa: E731
            worst = max(worst, marginal_residual(red(C), [red(A), red(B)]))
    return worst


# ------------------------------------------------- instruments on composites

@check("reduced-instrument-hat", "(I^i)^ = (I^)^i", 1e-9)
def _reduced_instr_hat(rng, tol):
    worst = 0.0
    for _ in range(50):
        n1, n2 = _dims_pair(rng)
        I = qr.instrument(rng, n1 * n2, _dim(rng, 2, 3))
        for side in (1, 2):
            worst = max(worst, observable_distance(measured_observable(reduced_instr(I, (n1, n2), side, tol)),
                                                   reduced_obs(measured_observable(I), (n1, n2), side)))
    return worst


@check("tensor-instrument-reduction", "(I1 (x) I2)^1_(x,y) = mu^{I2}(y) I1_x", 1e-9)
def _tensor_instr_reduction(rng, tol):
    worst = 0.0
    for _ in range(50):
        n1, n2 = _dims_pair(rng)
        I1, I2 = qr.instrument(rng, n1, 2), qr.instrument(rng, n2, 2)
        J = tensor_instr(I1, I2)
        mu1, mu2 = instr_random_measure(I1), instr_random_measure(I2)
        R1, R2 = reduced_instr(J, (n1, n2), 1, tol), reduced_instr(J, (n1, n2), 2, tol)
        for x in I1:
            for y in I2:
                k = product_label(x, y)
                worst = max(worst, la.frobenius(R1[k].choi - mu2[y] * I1[x].choi) / n1,
                            la.frobenius(R2[k].choi - mu1[x] * I2[y].choi) / n2)
    return worst


@check("tensor-instrument-hat", "(I1 (x) I2)^ = I1^ (x) I2^", 1e-9)
def _tensor_instr_hat(rng, tol):
    worst = 0.0
    for _ in range(50):
        n1, n2 = _dims_pair(rng)
        I1, I2 = qr.instrument(rng, n1, 2), qr.instrument(rng, n2, 3)
        worst = max(worst, observable_distance(measured_observable(tensor_instr(I1, I2)),
                                               tensor_obs(measured_observable(I1), measured_observable(I2))))
    return worst


@check("kraus-tensor", "I1 (x) I2 is Kraus with operators S1_x (x) S2_y", 1e-9)
def _kraus_tensor(rng, tol):
    worst = 0.0
    for _ in range(50):
        n1, n2 = _dims_pair(rng)
        I1, I2 = qr.kraus_instrument(rng, n1, 2), qr.kraus_instrument(rng, n2, 2)
        J = tensor_instr(I1, I2)
        K = kraus_instrument({product_label(x, y): [np.kron(I1[x].kraus[0], I2[y].kraus[0])]
                              for x in I1 for y in I2}, tol)
        worst = max(worst, _instr_choi_residual(J, K))
    return worst


@check("kraus-tensor-reduction", "(I1 (x) I2)^1 is Kraus with T = [tr(S2 S2^dagger)/n2]^{1/2} S1", 1e-9)
def _kraus_tensor_reduction(rng, tol):
    worst = 0.0
    for _ in range(50):
        n1, n2 = _dims_pair(rng)
        I1, I2 = qr.kraus_instrument(rng, n1, 2), qr.kraus_instrument(rng, n2, 2)
        J = tensor_instr(I1, I2)
        for side, n_other in ((1, n2), (2, n1)):
            ops = {}
            for x in I1:
                for y in I2:
                    s1, s2 = I1[x].kraus[0], I2[y].kraus[0]
                    if side == 1:
                        ops[product_label(x, y)] = [np.sqrt(np.trace(s2 @ s2.conj().T).real / n2) * s1]
                    else:
                        ops[product_label(x, y)] = [np.sqrt(np.trace(s1 @ s1.conj().T).real / n1) * s2]
            worst = max(worst, _instr_choi_residual(reduced_instr(J, (n1, n2), side, tol),
                                                    kraus_instrument(ops, tol)))
    return worst


@check("luders-tensor", "L^A_x (x) L^B_y = L^{A (x) B}_(x,y)", 1e-9)
def _luders_tensor(rng, tol):
    worst = 0.0
    for _ in range(50):
        n1, n2 = _dims_pair(rng)
        A, B = qr.observable(rng, n1, 2), qr.observable(rng, n2, 3)
        worst = max(worst, _instr_choi_residual(tensor_instr(luders(A, tol), luders(B, tol)),
                                                luders(tensor_obs(A, B), tol)))
    return worst


@check("luders-tensor-reduction",
       "(L^A_x (x) L^B_y)^2 = L^D with D = tr(A_x) B_y / n2 (the general reduction gives 1/n1)",
       flagged=True)
def _luders_tensor_reduction(rng, tol):
    must, stated = 0.0, 0.0
    for _ in range(50):
        n1, n2 = (2, 3) if rng.integers(0, 2) else (3, 2)
        A, B = qr.observable(rng, n1, 2), qr.observable(rng, n2, 2)
        J = tensor_instr(luders(A, tol), luders(B, tol))
        R1, R2 = reduced_instr(J, (n1, n2), 1, tol), reduced_instr(J, (n1, n2), 2, tol)
        C = Observable({product_label(x, y): np.trace(B[y]).real / n2 * A[x] for x in A for y in B})
        D = Observable({product_label(x, y): np.trace(A[x]).real / n1 * B[y] for x in A for y in B})
        D_stated = {product_label(x, y): np.trace(A[x]).real / n2 * B[y] for x in A for y in B}
        LC, LD = luders(C, tol), luders(D, tol)
        must = max(must, _instr_choi_residual(R1, LC), _instr_choi_residual(R2, LD))
        for k, m in D_stated.items():
            LDp = _op([la.principal_sqrt(m, tol)])
            stated = max(stated, la.frobenius(R2[k].choi - LDp.choi) / n2)
    return must, stated


@check("factorized-kraus-reduction", "factorized Kraus R_x = S_x (x) T_x reduces to Kraus [tr(T T^dagger)/n2]^{1/2} S_x", 1e-9)
def _factorized_kraus(rng, tol):
    worst = 0.0
    for _ in range(50):
        n1, n2 = _dims_pair(rng)
        I1, I2 = qr.kraus_instrument(rng, n1, 2), qr.kraus_instrument(rng, n2, 2)
        R = {product_label(x, y): (I1[x].kraus[0], I2[y].kraus[0]) for x in I1 for y in I2}
        I = kraus_instrument({k: [np.kron(s, t)] for k, (s, t) in R.items()}, tol)
        red1 = kraus_instrument({k: [np.sqrt(np.trace(t @ t.conj().T).real / n2) * s] for k, (s, t) in R.items()}, tol)
        red2 = kraus_instrument({k: [np.sqrt(np.trace(s @ s.conj().T).real / n1) * t] for k, (s, t) in R.items()}, tol)
        worst = max(worst, _instr_choi_residual(reduced_instr(I, (n1, n2), 1, tol), red1),
                    _instr_choi_residual(reduced_instr(I, (n1, n2), 2, tol), red2))
    return worst


@check("trivial-tensor", "I1 (x) I2 of trivial instruments is trivial with A (x) B and alpha (x) beta", 1e-9)
def _trivial_tensor(rng, tol):
    worst = 0.0
    for _ in range(50):
        n1, n2 = _dims_pair(rng)
        rep = trivial_composites(qr.trivial_instrument(rng, n1, 2), qr.trivial_instrument(rng, n2, 3), tol)
        worst = max(worst, rep.residuals["tensor"])
    return worst


@check("trivial-tensor-reduction", "(I1 (x) I2)^1 is trivial with observable mu^B(y) A_x and state alpha", 1e-9)
def _trivial_tensor_reduction(rng, tol):
    worst = 0.0
    for _ in range(50):
        n1, n2 = _dims_pair(rng)
        rep = trivial_composites(qr.trivial_instrument(rng, n1, 2), qr.trivial_instrument(rng, n2, 3), tol)
        worst = max(worst, rep.residuals["tensor-reduced-1"], rep.residuals["tensor-reduced-2"])
    return worst


@check("trivial-reduction", "reductions of a trivial instrument are trivial with A^i and tr_j(alpha)", 1e-9)
def _trivial_reduction(rng, tol):
    worst = 0.0
    for _ in range(50):
        n1, n2 = _dims_pair(rng)
        I = qr.trivial_instrument(rng, n1 * n2, 3)
        worst = max(worst, max(reduced_trivial_residuals(I, (n1, n2), tol).values()))
    return worst


@check("trivial-reduced-tensor",
       "J = I^1 (x) I^2 satisfies J^1_(x,y) = I^1_x pointwise (holds only after summing over y)",
       flagged=True)
def _trivial_reduced_tensor(rng, tol):
    from .instruments import trivial_data

    must, pointwise = 0.0, 0.0
    for _ in range(50):
        n1, n2 = _dims_pair(rng)
        I = qr.trivial_instrument(rng, n1 * n2, 2)
        A, alpha = trivial_data(I, tol)
        I1, I2 = reduced_instr(I, (n1, n2), 1, tol), reduced_instr(I, (n1, n2), 2, tol)
        J = tensor_instr(I1, I2)
        AB = Observable({product_label(x, y): np.kron(reduced_effect(A[x], (n1, n2), 1).matrix,
                                                      reduced_effect(A[y], (n1, n2), 2).matrix)
                         for x in A for y in A})
        state = np.kron(la.partial_trace(alpha, (n1, n2), 2), la.partial_trace(alpha, (n1, n2), 1))
        must = max(must, trivial_distance(J, AB, state))
        J1 = reduced_instr(J, (n1, n2), 1, tol)
        for x in I1:
            summed = J1.event([product_label(x, y) for y in I2])
            must = max(must, la.frobenius(summed.choi - I1[x].choi) / n1)
            for y in I2:
                pointwise = max(pointwise, la.frobenius(J1[product_label(x, y)].choi - I1[x].choi) / n1)
    return must, pointwise


# ---------------------------------------------------------- measurement models

@check("model-instrument-channel", "model instruments have outcome probabilities in [0, 1] and a channel total", 1e-9)
def _model_channel(rng, tol):
    worst = 0.0
    for _ in range(20):
        n, k = _dim(rng, 2, 3), _dim(rng, 2, 3)
        M = qr.model(rng, n, k, _dim(rng, 2, 3))
        I = model_instrument(M, tol)
        worst = max(worst, la.scaled_distance(I.total().effect(), np.eye(n)))
        for _ in range(10):
            rho = qr.state(rng, n)
            for x in I:
                p = np.trace(I[x](rho)).real
                worst = max(worst, -p, p - 1)
        worst = max(worst, observable_distance(model_observable(M, tol), measured_observable(I)))
    return worst


def partial_trace_interchange_residual(A, B, dims) -> float:
    n1, n2, n3 = dims
    lhs = la.partial_trace(la.partial_trace(A @ np.kron(np.eye(n1 * n2), B), dims, 3), (n1, n2), 2)
    rhs = la.partial_trace(la.partial_trace(A, dims, 2) @ np.kron(np.eye(n1), B), (n1, n3), 2)
    return la.frobenius(lhs - rhs)


@check("partial-trace-interchange", "tr_2[tr_3(A (1 (x) 1 (x) B))] = tr_3[(tr_2 A)(1 (x) B)]", 1e-9)
def _ptrace_interchange(rng, tol):
    worst = 0.0
    for dims in ((2, 2, 2), (2, 3, 2)):
        for _ in range(100):
            A = qr.ginibre(rng, int(np.prod(dims)))
            B = qr.ginibre(rng, dims[2])
            worst = max(worst, partial_trace_interchange_residual(A, B, dims))
    return worst


@check("reduced-model-instrument", "the reduced model measures the reduced model instrument", 1e-9)
def _reduced_model(rng, tol):
    worst = 0.0
    for n1, n2 in ((2, 2), (2, 3)):
        for _ in range(10):
            M = qr.model(rng, n1 * n2, 2)
            full = model_instrument(M, tol)
            for side in (1, 2):
                worst = max(worst, _instr_choi_residual(reduced_instr(full, (n1, n2), side, tol),
                                                        reduced_model_instrument(M, (n1, n2), side, tol)))
    return worst


@check("composite-model-factorization", "composite model instrument on rho1 (x) rho2 factorizes", 1e-9)
def _composite_model(rng, tol):
    worst = 0.0
    for _ in range(5):
        M1, M2 = qr.model(rng, 2, 2), qr.model(rng, 2, 2)
        M = composite_mm(M1, M2)
        I, I1, I2 = model_instrument(M, tol), model_instrument(M1, tol), model_instrument(M2, tol)
        for _ in range(10):
            r1, r2 = qr.state(rng, 2), qr.state(rng, 2)
            for x in I1:
                for y in I2:
                    got = I[product_label(x, y)](np.kron(r1, r2))
                    worst = max(worst, la.frobenius(got - np.kron(I1[x](r1), I2[y](r2))))
    return worst


@check("composite-model-reduction", "composite reduction M^1_(x,y) = tr[M2^_y(1)]/n2 M1^_x", 1e-9)
def _composite_model_reduction(rng, tol):
    worst = 0.0
    for _ in range(10):
        M1, M2 = qr.model(rng, 2, 2), qr.model(rng, 2, 2)
        I = model_instrument(composite_mm(M1, M2), tol)
        I1, I2 = model_instrument(M1, tol), model_instrument(M2, tol)
        R1, R2 = reduced_instr(I, (2, 2), 1, tol), reduced_instr(I, (2, 2), 2, tol)
        for x in I1:
            for y in I2:
                k = product_label(x, y)
                w2 = np.trace(I2[y](np.eye(2))).real / 2
                w1 = np.trace(I1[x](np.eye(2))).real / 2
                worst = max(worst, la.frobenius(R1[k].choi - w2 * I1[x].choi) / 2,
                            la.frobenius(R2[k].choi - w1 * I2[y].choi) / 2)
    return worst


# ------------------------------------------------------------ search oracle

def brute_force_part_map(child: Observable, parent: Observable, tol: float = DEFAULT_TOL):
    """Independent oracle: every set partition of the parent, every block-to-label matching."""
    from sympy.utilities.iterables import multiset_partitions

    labels = list(parent.labels)
    k = len(child)
    if k > len(labels):
        return None
    for blocks in multiset_partitions(labels, k):
        sums = [sum(parent[y] for y in b) for b in blocks]
        for perm in itertools.permutations(child.labels):
            if all(la.approx_eq(s, child[x], tol) for s, x in zip(sums, perm)):
                return {y: x for b, x in zip(blocks, perm) for y in b}
    return None


def oracle_case(rng, tol: float = DEFAULT_TOL):
    """One random (parent, child) pair, roughly half positive."""
    n = _dim(rng, 2, 3)
    p = int(rng.integers(2, 7))
    parent = qr.observable(rng, n, p)
    k = int(rng.integers(1, p + 1))
    child = coarse_grain(parent, qr.surjection_labels(rng, list(parent.labels), k))
    if rng.integers(0, 2):
        # perturb two outcomes in opposite directions: still an observable, no longer a part
        if k >= 2:
            d = 1e-3 * qr.effect(rng, n)
            labs = child.labels
            mats = dict(child.items())
            mats[labs[0]] = mats[labs[0]] + d
            mats[labs[1]] = mats[labs[1]] - d
            if min(np.linalg.eigvalsh(m)[0] for m in mats.values()) >= 0:
                child = Observable(mats)
        else:
            child = qr.observable(rng, n, 2)
    return parent, child


@check("part-search-oracle", "find_part_map agrees with brute-force set-partition enumeration", 0.0)
def _oracle(rng, tol):
    disagreements = 0
    for _ in range(100):
        parent, child = oracle_case(rng, tol)
        fast = find_part_map(child, parent, tol)
        slow = brute_force_part_map(child, parent, tol)
        if (fast is None) != (slow is None):
            disagreements += 1
        elif fast is not None and fast.replay(tol) > tol:
            disagreements += 1
    return float(disagreements)
