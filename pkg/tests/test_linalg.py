import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qparts import linalg as la
from qparts import random as qr
from qparts.errors import DimensionError, ValidationError


def test_as_matrix_rejects_bad_input():
    with pytest.raises(DimensionError):
        la.as_matrix(np.zeros((2, 2, 2)))
    with pytest.raises(ValidationError):
        la.as_matrix([[np.nan, 0], [0, 1]])
    assert la.as_matrix(3.0).shape == (1, 1)


def test_hermitian_part_threshold():
    m = np.array([[1, 1e-12j], [0, 1]])
    assert la.is_hermitian(m)
    assert not la.is_hermitian(np.array([[1, 1j], [0, 1]]))
    with pytest.raises(ValidationError):
        la.hermitian_part(np.array([[0, 1], [0, 0]]))


def test_is_psd_edges():
    assert la.is_psd(np.diag([1.0, -1e-12]))
    assert not la.is_psd(np.diag([1.0, -1e-6]))
    assert la.is_psd(np.zeros((3, 3)))
    with pytest.raises(DimensionError):
        la.is_psd(np.zeros((2, 3)))


def test_principal_sqrt_known_values():
    np.testing.assert_allclose(la.principal_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))
    # sqrt of a rank-one projector is itself
    p = la.projector([1, 1j]) / 2
    np.testing.assert_allclose(la.principal_sqrt(p), p, atol=1e-15)
    with pytest.raises(ValidationError):
        la.principal_sqrt(np.diag([1.0, -0.1]))


def test_principal_sqrt_random(rng):
    for _ in range(200):
        n = int(rng.integers(1, 7))
        rank = int(rng.integers(1, n + 1))
        m = qr.psd(rng, n, rank)
        r = la.principal_sqrt(m)
        assert la.is_psd(r)
        assert la.scaled_distance(r @ r, m) <= 1e-9 * max(1.0, np.linalg.norm(m))


def test_principal_sqrt_rank_one_has_no_noise(rng):
    for _ in range(50):
        p = qr.pure_state(rng, 4)
        r = la.principal_sqrt(p)
        # sqrt(P) = P for a projector, with no sqrt(eps) leakage
        assert la.scaled_distance(r, p) <= 1e-12


def test_inverse_sqrt(rng):
    m = qr.psd(rng, 4) + np.eye(4)
    s = la.inverse_sqrt(m)
    np.testing.assert_allclose(s @ m @ s, np.eye(4), atol=1e-12)
    with pytest.raises(ValidationError):
        la.inverse_sqrt(np.diag([1.0, 0.0]))


def test_tensor_is_kron():
    a, b, c = np.eye(2), np.diag([1, 2]), np.ones((1, 1)) * 3
    np.testing.assert_array_equal(la.tensor(a, b, c), 3 * np.kron(a, b))
    assert la.tensor().shape == (1, 1)


def test_partial_trace_of_product(rng):
    for _ in range(30):
        n1, n2 = rng.integers(1, 5, 2)
        a, b = qr.ginibre(rng, n1), qr.ginibre(rng, n2)
        m = np.kron(a, b)
        np.testing.assert_allclose(la.partial_trace(m, (n1, n2), 2), np.trace(b) * a, atol=1e-12)
        np.testing.assert_allclose(la.partial_trace(m, (n1, n2), 1), np.trace(a) * b, atol=1e-12)


def test_partial_trace_three_factors(rng):
    a, b, c = qr.ginibre(rng, 2), qr.ginibre(rng, 3), qr.ginibre(rng, 2)
    m = la.tensor(a, b, c)
    np.testing.assert_allclose(la.partial_trace(m, (2, 3, 2), 2), np.trace(b) * np.kron(a, c), atol=1e-12)
    np.testing.assert_allclose(la.partial_trace(m, (2, 3, 2), (1, 3)), np.trace(a) * np.trace(c) * b, atol=1e-12)
    assert la.partial_trace(m, (2, 3, 2), (1, 2, 3))[0, 0] == pytest.approx(np.trace(m))


def test_partial_trace_matches_loop(rng):
    # index-by-index oracle
    n1, n2 = 3, 2
    m = qr.ginibre(rng, n1 * n2)
    ref = np.zeros((n1, n1), dtype=complex)
    for i in range(n1):
        for j in range(n1):
            ref[i, j] = sum(m[i * n2 + k, j * n2 + k] for k in range(n2))
    np.testing.assert_allclose(la.partial_trace(m, (n1, n2), 2), ref)


def test_partial_trace_errors():
    with pytest.raises(DimensionError):
        la.partial_trace(np.eye(5), (2, 3), 1)
    with pytest.raises(DimensionError):
        la.partial_trace(np.eye(6), (2, 3), 3)


def test_approx_eq_scaling():
    n = 16
    a = np.eye(n)
    b = a + 0.9e-9 * np.eye(n)
    assert la.approx_eq(a, b)
    assert not la.approx_eq(a, a + 2e-9 * np.eye(n))


def test_schmidt_reconstructs(rng):
    for n1, n2 in [(2, 2), (2, 3), (3, 2), (4, 3)]:
        psi = qr.unit_vector(rng, n1 * n2)
        c, u, v = la.schmidt(psi, (n1, n2))
        assert np.all(np.diff(c) <= 0)
        assert c.size == min(n1, n2)
        np.testing.assert_allclose(np.sum(c ** 2), 1.0, atol=1e-12)
        rebuilt = sum(c[i] * np.kron(u[:, i], v[:, i]) for i in range(c.size))
        np.testing.assert_allclose(rebuilt, psi, atol=1e-12)


def test_schmidt_product_and_bell():
    c, _, _ = la.schmidt(np.kron([1, 0], [0, 1]), (2, 2))
    np.testing.assert_allclose(c, [1.0])
    c, _, _ = la.schmidt(np.array([1, 0, 0, 1]) / np.sqrt(2), (2, 2))
    np.testing.assert_allclose(c, [2 ** -0.5] * 2)
    with pytest.raises(ValidationError):
        la.schmidt([1, 1, 0, 0], (2, 2))


def test_matrix_units_span():
    units = list(la.matrix_units(3))
    assert len(units) == 9
    np.testing.assert_array_equal(sum(e for _, _, e in units), np.ones((3, 3)))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2 ** 32 - 1))
def test_partial_trace_preserves_trace(n1, n2, seed):
    m = qr.ginibre(np.random.default_rng(seed), n1 * n2)
    for side in (1, 2):
        assert np.trace(la.partial_trace(m, (n1, n2), side)) == pytest.approx(np.trace(m))
