"""
Acceptance criteria, each at its stated tolerance.

Every test carries a ``criterion`` marker; the conftest prints one PASS/FAIL
line per criterion at the end of the run.
"""

import itertools
import os
import subprocess
import sys

import numpy as np
import pytest

from qparts import linalg as la
from qparts import random as qr
from qparts.effects import atom_reduction_spectrum, factorization_test, make_effect, reduced_effect
from qparts.instruments import (
    coarse_grain_instr,
    luders,
    measured_observable,
    product_instr,
)
from qparts.maps import Surjection, product_label
from qparts.observables import coarse_grain, condition_obs, seq_prod_obs
from qparts.parts import enumerate_parts, find_part_map
from qparts.suite import (
    NAMED_MAPS,
    atomic_luders_residuals,
    brute_force_part_map,
    named_surjection,
    oracle_case,
    partial_trace_interchange_residual,
    run_check,
    trivial_hat_deviation,
)

criterion = pytest.mark.criterion


def seeded(number):
    return np.random.default_rng([2024, number])


def random_event(rng, labels):
    return [x for x in labels if rng.integers(0, 2)]


@criterion(1, "hat duality tr[I_X(rho)] = tr(rho I^_X) <= 1e-10")
def test_hat_duality():
    rng = seeded(1)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 5))
        I = qr.instrument(rng, n, int(rng.integers(2, 5)))
        hat = measured_observable(I)
        for _ in range(50):
            rho = qr.state(rng, n)
            X = random_event(rng, I.labels)
            lhs = np.trace(I.event(X)(rho)).real
            rhs = np.trace(rho @ sum((hat[x] for x in X), np.zeros((n, n)))).real
            worst = max(worst, abs(lhs - rhs))
    assert worst <= 1e-10


@criterion(2, "f(I^) = f(I)^ <= 1e-10")
def test_coarse_grain_commutes_with_hat():
    rng = seeded(2)
    worst = 0.0
    for _ in range(100):
        n, k = int(rng.integers(2, 5)), int(rng.integers(2, 6))
        I = qr.instrument(rng, n, k)
        f = Surjection.from_mapping(qr.surjection_labels(rng, list(I.labels), int(rng.integers(1, k + 1))))
        lhs = coarse_grain(measured_observable(I), f)
        rhs = measured_observable(coarse_grain_instr(I, f))
        worst = max(worst, max(la.frobenius(lhs[x] - rhs[x]) for x in lhs))
    assert worst <= 1e-10


@criterion(3, "f, g, u found by find_part_map on A o B; replay <= 1e-10")
def test_sequential_product_maps():
    rng = seeded(3)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 4))
        A = qr.observable(rng, n, 2, ["a0", "a1"])
        B = qr.observable(rng, n, 3, ["b0", "b1", "b2"])
        h = {"b0": "c0", "b1": "c1", "b2": "c1"}
        AB = seq_prod_obs(A, B)
        pairs = list(itertools.product(A.labels, B.labels))
        f = {product_label(x, y): x for x, y in pairs}
        g = {product_label(x, y): y for x, y in pairs}
        u = {product_label(x, y): product_label(x, h[y]) for x, y in pairs}
        for child, expected in [(A, f), (condition_obs(B, A), g), (seq_prod_obs(A, coarse_grain(B, h)), u)]:
            cert = find_part_map(child, AB)
            assert cert is not None
            assert cert.map.as_dict() == expected
            worst = max(worst, cert.replay())
    assert worst <= 1e-10


@criterion(4, "generic binary A o B has exactly 9 part classes incl. A (f7), (B|A) (f6)")
def test_binary_product_has_nine_parts():
    rng = seeded(4)
    for _ in range(20):
        A, B = qr.observable(rng, 2, 2), qr.observable(rng, 2, 2)
        AB = seq_prod_obs(A, B)
        classes = enumerate_parts(AB)
        for name, target in (("f7", A), ("f6", condition_obs(B, A))):
            part = coarse_grain(AB, named_surjection(name))
            assert any(len(r) == len(part) and find_part_map(part, r) for r, _ in classes)
            assert find_part_map(target, part) is not None
        assert len(classes) == 9, f"found {len(classes)} equivalence classes"


@criterion(5, "L^{AoB} = L^A o L^B for commuting (<= 1e-9), differs for non-commuting (> 1e-6)")
def test_luders_product():
    rng = seeded(5)
    commuting, generic = 0.0, np.inf
    for _ in range(50):
        n = int(rng.integers(2, 5))
        A, B = qr.commuting_pair(rng, n, 2, 3)
        lhs, rhs = luders(seq_prod_obs(A, B)), product_instr(luders(A), luders(B))
        commuting = max(commuting, max(la.frobenius(lhs[k].choi - rhs[k].choi) for k in lhs))
        P, Q = qr.observable(rng, n, 2), qr.observable(rng, n, 2)
        lhs, rhs = luders(seq_prod_obs(P, Q)), product_instr(luders(P), luders(Q))
        generic = min(generic, max(la.frobenius(lhs[k].choi - rhs[k].choi) for k in lhs))
    assert commuting <= 1e-9
    assert generic > 1e-6


@criterion(6, "(L^A o L^B)^ = A o B <= 1e-10")
def test_luders_product_hat():
    rng = seeded(6)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 5))
        A, B = qr.observable(rng, n, 2), qr.observable(rng, n, 3)
        hat = measured_observable(product_instr(luders(A), luders(B)))
        AB = seq_prod_obs(A, B)
        worst = max(worst, max(la.frobenius(hat[k] - AB[k]) for k in AB))
    assert worst <= 1e-10


@criterion(7, "atomic Lueders identities <= 1e-9, sum lambda = 1 +- 1e-10")
def test_atomic_luders():
    rng = seeded(7)
    worst, total = 0.0, 0.0
    for _ in range(50):
        n = int(rng.integers(2, 5))
        A, B = qr.projective_observable(rng, n), qr.projective_observable(rng, n)
        res, sum_err = atomic_luders_residuals(A, B, qr.state(rng, n))
        worst, total = max(worst, res), max(total, sum_err)
    assert worst <= 1e-9
    assert total <= 1e-10


@criterion(8, "trivial I, J: (I o J)^ differs from I^ o J^ by > 1e-6, both valid observables")
def test_trivial_product_hat_differs():
    rng = seeded(8)
    smallest = np.inf
    for _ in range(30):
        n = int(rng.integers(2, 4))
        I, J = qr.trivial_instrument(rng, n, 2), qr.trivial_instrument(rng, n, 2)
        # trivial_hat_deviation validates both sides as observables before comparing
        smallest = min(smallest, trivial_hat_deviation(I, J))
    assert smallest > 1e-6


@criterion(9, "factorization accepts b (x) c, rejects Bell atoms; a = a1 (x) a2 only for 0, 1")
def test_factorization():
    rng = seeded(9)
    for _ in range(50):
        n1, n2 = int(rng.integers(2, 4)), int(rng.integers(2, 4))
        b, c = qr.effect(rng, n1), qr.effect(rng, n2)
        found = factorization_test(np.kron(b, c), (n1, n2))
        assert found is not None
        assert la.approx_eq(np.kron(found[0].matrix, found[1].matrix), np.kron(b, c))
    s = 2 ** -0.5
    bells = [[s, 0, 0, s], [s, 0, 0, -s], [0, s, s, 0], [0, s, -s, 0]]
    for v in bells:
        assert factorization_test(la.projector(v), (2, 2)) is None

    def self_product(a, dims):
        a1, a2 = reduced_effect(a, dims, 1).matrix, reduced_effect(a, dims, 2).matrix
        return la.approx_eq(a, np.kron(a1, a2))

    scan = [np.zeros((4, 4)), np.eye(4)] + [qr.effect(rng, 4) for _ in range(50)]
    scan += [np.kron(qr.effect(rng, 2), qr.effect(rng, 2)) for _ in range(10)]
    scan += [la.projector(v) for v in bells] + [np.eye(4) / 2]
    for a in scan:
        make_effect(a)
        trivial = la.approx_eq(a, np.zeros((4, 4))) or la.approx_eq(a, np.eye(4))
        assert self_product(a, (2, 2)) == trivial


@criterion(10, "atom reductions: alpha_i = (n1/n2) beta_i to 1e-9 on 2x2, 2x3, 3x2")
def test_atom_reduction_spectra():
    rng = seeded(10)
    for n1, n2 in ((2, 2), (2, 3), (3, 2)):
        for _ in range(30):
            alphas, betas = atom_reduction_spectrum(qr.pure_state(rng, n1 * n2), (n1, n2))
            assert alphas.size == betas.size == min(n1, n2)
            assert np.max(np.abs(alphas - n1 / n2 * betas)) <= 1e-9


COMPOSITE_IDENTITIES = [
    "reduced-observable-distribution",
    "composite-observable-reduction",
    "post-processing-tensor",
    "post-processing-reduction",
    "joint-tensor",
    "joint-reduction",
    "reduced-instrument-hat",
    "tensor-instrument-reduction",
    "tensor-instrument-hat",
    "kraus-tensor",
    "kraus-tensor-reduction",
    "luders-tensor",
    "factorized-kraus-reduction",
    "trivial-tensor",
    "trivial-tensor-reduction",
    "trivial-reduction",
]
COMPOSITE_FLAGGED = ["luders-tensor-reduction", "trivial-reduced-tensor"]


@criterion(11, "composite/reduction identities <= 1e-9 on 50 instances; two flagged checks")
def test_composite_identities():
    failures = []
    for id in COMPOSITE_IDENTITIES:
        r = run_check(id, seed=11)
        if r.status != "pass" or not r.residual <= 1e-9:
            failures.append((id, r.status, r.residual))
    for id in COMPOSITE_FLAGGED:
        # the summed identity must hold; the pointwise residual is only reported
        r = run_check(id, seed=11)
        must = float(r.detail.split()[-1])
        if r.status != "flagged" or not must <= 1e-9:
            failures.append((id, r.status, r.detail))
    assert not failures


@criterion(12, "partial-trace interchange and reduced model instrument <= 1e-9")
def test_model_reduction():
    rng = seeded(12)
    worst = 0.0
    for dims in ((2, 2, 2), (2, 3, 2)):
        for _ in range(50):
            A, B = qr.ginibre(rng, int(np.prod(dims))), qr.ginibre(rng, dims[2])
            worst = max(worst, partial_trace_interchange_residual(A, B, dims))
    assert worst <= 1e-9
    r = run_check("reduced-model-instrument", seed=12)
    assert r.status == "pass" and r.residual <= 1e-9


@criterion(13, "composite model factorization and reduction coefficients <= 1e-9")
def test_composite_model():
    for id in ("composite-model-factorization", "composite-model-reduction"):
        r = run_check(id, seed=13)
        assert r.status == "pass" and r.residual <= 1e-9


@criterion(14, "find_part_map agrees with brute-force oracle on 100 cases")
def test_oracle_agreement():
    rng = seeded(14)
    disagreements = 0
    positives = 0
    for _ in range(100):
        parent, child = oracle_case(rng)
        assert len(parent) <= 6
        fast, slow = find_part_map(child, parent), brute_force_part_map(child, parent)
        positives += slow is not None
        if (fast is None) != (slow is None):
            disagreements += 1
    assert disagreements == 0
    assert 20 <= positives <= 80


@criterion(15, "theorem-suite --seed 42 is byte-identical across runs")
def test_determinism():
    cmd = [sys.executable, "-m", "qparts", "theorem-suite", "--seed", "42"]
    # distinct hash seeds expose any dependence on set or dict iteration order
    runs = [
        subprocess.run(cmd, capture_output=True, timeout=600,
                       env={**os.environ, "PYTHONHASHSEED": h})
        for h in ("1", "2")
    ]
    first, second = runs
    assert first.returncode == 0
    assert first.stdout and first.stdout == second.stdout


def test_named_maps_are_surjections():
    # sanity for criterion 4's map table
    for name in NAMED_MAPS:
        f = named_surjection(name)
        assert len(f.domain) == 4
        assert len(set(f.assignment)) == len(f.codomain)
