import numpy as np
import pytest

from qparts import linalg as la
from qparts import random as qr
from qparts.errors import DimensionError, ValidationError
from qparts.instruments import (
    Instrument,
    apply_choi,
    apply_operation,
    choi_of_map,
    choi_to_kraus,
    coarse_grain_instr,
    condition_instr,
    identity_operation,
    instr_random_measure,
    instrument_distance,
    is_channel,
    kraus_instrument,
    kraus_to_choi,
    luders,
    make_instrument,
    make_operation,
    measured_observable,
    operation_from_choi,
    operation_from_map,
    operations_close,
    product_instr,
    reduced_instr,
    reduced_trivial_residuals,
    tensor_instr,
    trivial,
    trivial_composites,
    trivial_data,
)
from qparts.maps import product_label
from qparts.observables import (
    Observable,
    condition_obs,
    observable_distance,
    random_measure,
    reduced_obs,
    seq_prod_obs,
    tensor_obs,
)


def test_choi_convention_matches_definition(rng):
    # C = sum_ij E_ij (x) Phi(E_ij), input factor first
    ks = qr.kraus_family(rng, 3, 2, 2)
    via_kraus = kraus_to_choi(ks)
    via_map = choi_of_map(lambda r: sum(k @ r @ k.conj().T for k in ks), 2)
    np.testing.assert_allclose(via_kraus, via_map, atol=1e-14)


def test_choi_kraus_roundtrip(rng):
    for _ in range(30):
        n_in, n_out = rng.integers(1, 4, 2)
        op = make_operation(qr.kraus_family(rng, n_out, n_in, 3))
        back = operation_from_choi(op.choi, int(n_in))
        assert operations_close(op, back)
        rho = qr.state(rng, int(n_in))
        np.testing.assert_allclose(back(rho), op(rho), atol=1e-12)
        np.testing.assert_allclose(apply_choi(op.choi, rho, int(n_in)), op(rho), atol=1e-12)


def test_choi_to_kraus_rejects_non_cp():
    # transpose map is positive but not completely positive
    choi = choi_of_map(lambda r: r.T, 2)
    with pytest.raises(ValidationError, match="not completely positive"):
        choi_to_kraus(choi, 2, 2)


def test_make_operation_checks_trace():
    with pytest.raises(ValidationError):
        make_operation([np.eye(2), np.eye(2)])
    with pytest.raises(ValidationError):
        make_operation([])
    with pytest.raises(DimensionError):
        make_operation([np.eye(2), np.eye(3)])


def test_apply_operation_partial_state(rng):
    op = make_operation([np.diag([1.0, 0.0])])
    out = apply_operation(op, np.eye(2) / 2)
    assert out.kind == "partial"
    assert np.trace(out.matrix).real == pytest.approx(0.5)


def test_operation_algebra(rng):
    a = make_operation(qr.kraus_family(rng, 2, 2, 2))
    b = 0.5 * a
    assert la.frobenius(b.choi - 0.5 * a.choi) < 1e-14
    assert la.frobenius((a + a).choi - 2 * a.choi) < 1e-14
    ident = identity_operation(2)
    assert operations_close(ident.then(a), a)
    with pytest.raises(ValidationError):
        -1.0 * a


def test_luders_measures_observable(rng):
    for _ in range(30):
        A = qr.observable(rng, 3, 3)
        L = luders(A)
        assert observable_distance(measured_observable(L), A) <= 1e-12
        assert is_channel(L.total())


def test_luders_of_projective_is_projection(rng):
    A = qr.projective_observable(rng, 3)
    rho = qr.state(rng, 3)
    for x in A:
        np.testing.assert_allclose(luders(A)[x](rho), A[x] @ rho @ A[x], atol=1e-12)


def test_instrument_validation(rng):
    ok = qr.instrument(rng, 2, 3)
    make_instrument(dict(ok.items()))
    with pytest.raises(ValidationError):
        make_instrument({"a": make_operation([np.eye(2) * 0.5])})
    with pytest.raises(DimensionError):
        Instrument({"a": identity_operation(2), "b": identity_operation(3)})


def test_kraus_instrument(rng):
    ks = qr.kraus_family(rng, 2, 2, 2)
    I = kraus_instrument({"u": [ks[0]], "v": [ks[1]]})
    assert I.labels == ("u", "v")
    assert la.approx_eq(measured_observable(I)["u"], ks[0].conj().T @ ks[0])


def test_event_operations(rng):
    I = qr.instrument(rng, 2, 3)
    assert la.frobenius(I.event([]).choi) == 0
    assert la.frobenius(I.event(["0", "1"]).choi - (I["0"].choi + I["1"].choi)) < 1e-14
    assert is_channel(I.total())


def test_product_instrument_measures_seq_product(rng):
    # for Lueders instruments the product measures A o B
    A, B = qr.observable(rng, 3, 2), qr.observable(rng, 3, 2)
    P = product_instr(luders(A), luders(B))
    assert observable_distance(measured_observable(P), seq_prod_obs(A, B)) <= 1e-12


def test_condition_instrument(rng):
    I, J = qr.instrument(rng, 2, 2), qr.instrument(rng, 2, 3)
    C = condition_instr(J, I)
    assert C.labels == J.labels
    rho = qr.state(rng, 2)
    for y in J:
        expect = sum(J[y](I[x](rho)) for x in I)
        np.testing.assert_allclose(C[y](rho), expect, atol=1e-12)


def test_condition_luders_hat_is_conditioned_observable(rng):
    A, B = qr.observable(rng, 2, 2), qr.observable(rng, 2, 2)
    C = measured_observable(condition_instr(luders(B), luders(A)))
    assert observable_distance(C, condition_obs(B, A)) <= 1e-12


def test_tensor_instrument(rng):
    I1, I2 = qr.instrument(rng, 2, 2), qr.instrument(rng, 3, 2)
    T = tensor_instr(I1, I2)
    assert T.dim == 6
    assert observable_distance(measured_observable(T),
                               tensor_obs(measured_observable(I1), measured_observable(I2))) <= 1e-12
    r1, r2 = qr.state(rng, 2), qr.state(rng, 3)
    x, y = "0", "1"
    np.testing.assert_allclose(T[product_label(x, y)](np.kron(r1, r2)),
                               np.kron(I1[x](r1), I2[y](r2)), atol=1e-12)


def test_reduced_instrument(rng):
    I = qr.instrument(rng, 4, 2)
    R = reduced_instr(I, (2, 2), 1)
    assert R.dim == 2
    assert is_channel(R.total())
    assert observable_distance(measured_observable(R), reduced_obs(measured_observable(I), (2, 2), 1)) <= 1e-12
    rho = qr.state(rng, 2)
    for x in I:
        expect = la.partial_trace(I[x](np.kron(rho, np.eye(2))), (2, 2), 2) / 2
        np.testing.assert_allclose(R[x](rho), expect, atol=1e-12)


def test_random_measure_of_instrument(rng):
    I = qr.instrument(rng, 3, 3)
    assert instr_random_measure(I) == pytest.approx(random_measure(measured_observable(I)))


def test_coarse_grain_instrument(rng):
    I = qr.instrument(rng, 2, 3)
    C = coarse_grain_instr(I, {"0": "a", "1": "b", "2": "a"})
    assert la.frobenius(C["a"].choi - I["0"].choi - I["2"].choi) < 1e-14


def test_trivial_instrument(rng):
    A = qr.observable(rng, 3, 2)
    delta = qr.state(rng, 3)
    T = trivial(A, delta)
    rho = qr.state(rng, 3)
    for x in A:
        np.testing.assert_allclose(T[x](rho), np.trace(rho @ A[x]) * delta, atol=1e-12)
    data = trivial_data(T)
    assert data is not None
    assert observable_distance(data[0], A) <= 1e-9
    assert la.approx_eq(data[1], delta)
    assert trivial_data(luders(A)) is None


def test_trivial_composites(rng):
    I1, I2 = qr.trivial_instrument(rng, 2, 2), qr.trivial_instrument(rng, 3, 2)
    report = trivial_composites(I1, I2)
    assert set(report.residuals) == {"tensor", "tensor-reduced-1", "tensor-reduced-2"}
    assert report.max_residual <= 1e-9
    res = reduced_trivial_residuals(qr.trivial_instrument(rng, 4, 2), (2, 2))
    assert max(res.values()) <= 1e-9


def test_instrument_distance(rng):
    I = qr.instrument(rng, 2, 2)
    assert instrument_distance(I, I) == 0
    assert instrument_distance(I, qr.instrument(rng, 2, 2)) > 1e-3


def test_operation_from_map_rejects_trace_increase():
    with pytest.raises(ValidationError):
        operation_from_map(lambda r: 2 * r, 2)


def test_observable_of_product_outcomes_labels(rng):
    I, J = qr.instrument(rng, 2, 2, labels="ab"), qr.instrument(rng, 2, 2, labels="xy")
    P = product_instr(I, J)
    assert P.labels == ("(a,x)", "(a,y)", "(b,x)", "(b,y)")
    assert isinstance(measured_observable(P), Observable)
