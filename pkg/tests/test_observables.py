import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qparts import linalg as la
from qparts import random as qr
from qparts.errors import LabelError, ValidationError
from qparts.maps import Surjection, product_label, projection_maps
from qparts.observables import (
    Observable,
    coarse_grain,
    condition_obs,
    distribution,
    event_effect,
    make_observable,
    make_stochastic,
    observable_residual,
    post_process,
    pushforward,
    random_measure,
    reduced_obs,
    seq_prod_obs,
    tensor_obs,
    then_probability,
    trivial_observable,
)


def test_make_observable_identity():
    A = make_observable({"1": np.eye(2)})
    assert A.labels == ("1",)
    assert A.dim == 2


def test_make_observable_rejections():
    with pytest.raises(ValidationError, match="sum to the identity"):
        make_observable({"a": np.eye(2) / 2})
    with pytest.raises(ValidationError, match="'b'"):
        make_observable({"a": np.diag([1.0, 0.5]), "b": np.diag([-0.0, 0.5]) - 0.1 * np.eye(2)})
    with pytest.raises(ValidationError, match="Hermitian"):
        make_observable({"a": np.array([[1, 0.2], [0, 0]]), "b": np.array([[0, -0.2], [0, 1]])})
    with pytest.raises(LabelError):
        make_observable({1: np.eye(2), "1": np.zeros((2, 2))})


def test_observable_residual_reports_worst():
    r = observable_residual({"a": np.diag([1.2, 0.0]), "b": np.diag([0.0, 1.0])})
    assert r == pytest.approx(0.2)


def test_observable_is_read_only(rng):
    A = qr.observable(rng, 2, 2)
    with pytest.raises(ValueError):
        A["0"][0, 0] = 3
    with pytest.raises(LabelError):
        A["missing"]


def test_random_observables_valid(rng):
    for _ in range(50):
        n, k = int(rng.integers(2, 5)), int(rng.integers(2, 5))
        A = qr.observable(rng, n, k)
        make_observable(dict(A.items()))


def test_seq_prod_obs_labels_and_validity(rng):
    A, B = qr.observable(rng, 3, 2, "ab"), qr.observable(rng, 3, 3, "xyz")
    AB = seq_prod_obs(A, B)
    assert AB.labels == tuple(product_label(x, y) for x in "ab" for y in "xyz")
    make_observable(dict(AB.items()))


def test_marginals_of_seq_prod(rng):
    # first marginal of A o B is A; second is (B | A)
    for _ in range(20):
        A, B = qr.observable(rng, 3, 2), qr.observable(rng, 3, 3)
        AB = seq_prod_obs(A, B)
        p1, p2 = projection_maps(A.labels, B.labels)
        first, second = coarse_grain(AB, p1), coarse_grain(AB, p2)
        assert max(la.scaled_distance(first[x], A[x]) for x in A) <= 1e-12
        BA = condition_obs(B, A)
        assert max(la.scaled_distance(second[y], BA[y]) for y in B) <= 1e-12


def test_condition_by_trivial_is_identity(rng):
    B = qr.observable(rng, 3, 3)
    BA = condition_obs(B, trivial_observable(3))
    assert max(la.scaled_distance(BA[y], B[y]) for y in B) <= 1e-12


def test_distribution_sums_to_one(rng):
    for _ in range(30):
        A = qr.observable(rng, 4, 3)
        p = distribution(qr.state(rng, 4), A)
        assert list(p) == list(A.labels)
        assert sum(p.values()) == pytest.approx(1.0, abs=1e-12)


def test_then_probability(rng):
    A, B = qr.observable(rng, 2, 2), qr.observable(rng, 2, 2)
    rho = qr.state(rng, 2)
    total = sum(then_probability(rho, A, [x], B, [y]) for x in A for y in B)
    assert total == pytest.approx(1.0)
    assert then_probability(rho, A, ["0"], B, ["0", "1"]) == pytest.approx(np.trace(rho @ A["0"]).real)
    with pytest.raises(LabelError):
        then_probability(rho, A, ["7"], B, ["0"])


def test_post_process_identity_and_constant(rng):
    A = qr.observable(rng, 3, 3)
    eye = make_stochastic(A.labels, A.labels, np.eye(3))
    out = post_process(eye, A)
    assert max(la.scaled_distance(out[x], A[x]) for x in A) <= 1e-15
    const = make_stochastic(A.labels, ["only"], np.ones((3, 1)))
    assert la.approx_eq(post_process(const, A)["only"], np.eye(3))
    with pytest.raises(ValidationError):
        make_stochastic(["a"], ["b", "c"], [[0.5, 0.6]])


def test_post_process_equals_coarse_grain_for_deterministic(rng):
    A = qr.observable(rng, 2, 4)
    f = Surjection.from_mapping({"0": "u", "1": "v", "2": "u", "3": "v"})
    nu = make_stochastic(A.labels, f.codomain,
                         [[1.0 if f(x) == y else 0.0 for y in f.codomain] for x in A.labels])
    pp, cg = post_process(nu, A), coarse_grain(A, f)
    assert max(la.scaled_distance(pp[x], cg[x]) for x in cg) <= 1e-15


def test_random_measure(rng):
    A = qr.observable(rng, 4, 3)
    rm = random_measure(A)
    rho = np.eye(4) / 4
    assert rm == pytest.approx(distribution(rho, A))


def test_tensor_and_reduce_roundtrip(rng):
    A1, A2 = qr.observable(rng, 2, 2), qr.observable(rng, 3, 2)
    B = tensor_obs(A1, A2)
    make_observable(dict(B.items()))
    # reducing a product observable returns the tr-weighted factor effects
    R = reduced_obs(B, (2, 3), 1)
    for x in A1:
        for y in A2:
            expect = A1[x] * np.trace(A2[y]).real / 3
            assert la.approx_eq(R[product_label(x, y)], expect)


def test_coarse_grain_with_mapping(rng):
    A = qr.observable(rng, 2, 3)
    C = coarse_grain(A, {"0": "a", "1": "a", "2": "b"})
    assert C.labels == ("a", "b")
    assert la.approx_eq(C["a"], A["0"] + A["1"])
    with pytest.raises(LabelError):
        coarse_grain(A, {"0": "a"})


def test_event_effect(rng):
    A = qr.observable(rng, 3, 3)
    assert np.all(event_effect(A, []) == 0)
    assert la.approx_eq(event_effect(A, A.labels), np.eye(3))


def test_pushforward_matches_coarse_grained_distribution(rng):
    A = qr.observable(rng, 3, 4)
    rho = qr.state(rng, 3)
    f = Surjection.from_mapping(qr.surjection_labels(rng, list(A.labels), 2))
    lhs = pushforward(distribution(rho, A), f)
    rhs = distribution(rho, coarse_grain(A, f))
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_surjection_validation():
    with pytest.raises(LabelError, match="surjective"):
        Surjection(("a", "b"), ("x", "y", "z"), ("x", "y"))
    with pytest.raises(LabelError):
        Surjection(("a", "b"), ("x",), ("x",))
    f = Surjection.from_mapping({"a": "x", "b": "y", "c": "x"})
    g = Surjection.from_mapping({"x": "1", "y": "1"})
    assert f.then(g).as_dict() == {"a": "1", "b": "1", "c": "1"}
    assert f.preimage(["x"]) == {"a", "c"}
    assert not f.is_bijection()
    assert Surjection.identity("ab").is_bijection()


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.integers(2, 5), st.integers(0, 2 ** 32 - 1))
def test_coarse_grain_preserves_normalization(n, k, seed):
    rng = np.random.default_rng(seed)
    A = qr.observable(rng, n, k)
    m = int(rng.integers(1, k + 1))
    f = Surjection.from_mapping(qr.surjection_labels(rng, list(A.labels), m))
    C = coarse_grain(A, f)
    assert len(C) == m
    make_observable(dict(C.items()))
