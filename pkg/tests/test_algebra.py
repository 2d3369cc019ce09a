"""Single-site operator and state primitives."""

import numpy as np
import pytest

from flab import (
    KahanSum,
    SI,
    SX,
    SY,
    SZ,
    SiteOperator,
    SiteState,
    center,
    commutator,
    expect,
    hermitian_basis,
    hs_coefficients,
    identity,
    op_norm,
    ordered_product,
    pure_state,
)

RNG = np.random.default_rng(20260821)


def test_pauli_constants():
    assert np.allclose(SX.mat, [[0, 1], [1, 0]])
    assert np.allclose(SY.mat, [[0, -1j], [1j, 0]])
    assert np.allclose(SZ.mat, [[1, 0], [0, -1]])
    assert np.allclose(SI.mat, np.eye(2))
    assert np.allclose((SX @ SY).mat, 1j * SZ.mat)
    assert np.allclose(commutator(SX, SY).mat, 2j * SZ.mat)


def test_operator_arithmetic_and_adjoint():
    a = SX + 2.0 * SZ
    assert np.allclose(a.mat, SX.mat + 2 * SZ.mat)
    assert np.allclose((a - SX).mat, 2 * SZ.mat)
    assert np.allclose((-a).mat, -a.mat)
    b = SiteOperator([[0, 1j], [0, 0]])
    assert np.allclose(b.adjoint().mat, [[0, 0], [-1j, 0]])
    assert not b.is_hermitian()
    assert a.is_hermitian()


def test_op_norm_values():
    # eigenvalues of 2*sz + 1 are 3 and -1, largest magnitude 3
    assert op_norm(2.0 * SZ + identity(2)) == pytest.approx(3.0, abs=1e-12)
    assert op_norm(SX) == pytest.approx(1.0, abs=1e-12)
    nil = SiteOperator([[0, 1], [0, 0]])
    assert op_norm(nil) == pytest.approx(1.0, abs=1e-12)


def test_op_norm_is_largest_singular_value():
    for _ in range(50):
        m = RNG.normal(size=(3, 3)) + 1j * RNG.normal(size=(3, 3))
        a = SiteOperator(m)
        s = np.linalg.svd(m, compute_uv=False)[0]
        assert abs(op_norm(a) - s) < 1e-10


def test_site_state_validation():
    SiteState(np.diag([0.5, 0.5]))
    with pytest.raises(ValueError):
        SiteState(np.diag([0.6, 0.6]))  # trace 1.2
    with pytest.raises(ValueError):
        SiteState([[0.5, 0.3], [0.2, 0.5]])  # not hermitian
    with pytest.raises(ValueError):
        SiteState([[1.5, 0.0], [0.0, -0.5]])  # negative eigenvalue


def test_pure_state_and_expect():
    rho = pure_state([1.0, 0.0])
    assert np.allclose(rho.rho, [[1, 0], [0, 0]])
    assert expect(rho, SZ) == pytest.approx(1.0, abs=1e-14)
    assert expect(rho, SX) == pytest.approx(0.0, abs=1e-14)
    plus = pure_state([1.0, 1.0])  # should be normalized internally
    assert expect(plus, SX) == pytest.approx(1.0, abs=1e-12)


def test_center_removes_mean():
    rho = SiteState(np.diag([0.75, 0.25]))
    for _ in range(100):
        m = RNG.normal(size=(2, 2)) + 1j * RNG.normal(size=(2, 2))
        a = SiteOperator(m + m.conj().T)
        c = center(a, rho)
        assert abs(expect(rho, c)) < 1e-12


def test_ordered_product_keeps_order():
    ab = ordered_product([SX, SY])
    ba = ordered_product([SY, SX])
    assert np.allclose(ab.mat, 1j * SZ.mat)
    assert np.allclose(ba.mat, -1j * SZ.mat)
    with pytest.raises(ValueError):
        ordered_product([])


def test_hermitian_basis_properties():
    basis = hermitian_basis(2)
    assert len(basis) == 4
    assert np.allclose(basis[0].mat, np.eye(2))
    for e in basis:
        assert e.is_hermitian()
    # orthogonality in the Hilbert-Schmidt inner product
    for i, a in enumerate(basis):
        for j, b in enumerate(basis):
            ip = np.trace(a.mat.conj().T @ b.mat)
            if i == j:
                assert abs(ip) > 1e-12
            else:
                assert abs(ip) < 1e-12
    basis3 = hermitian_basis(3)
    assert len(basis3) == 9


def test_hs_coefficients_roundtrip():
    basis = hermitian_basis(2)
    for _ in range(50):
        m = RNG.normal(size=(2, 2)) + 1j * RNG.normal(size=(2, 2))
        a = SiteOperator(m)
        coeffs = hs_coefficients(a)
        rebuilt = sum((c * e.mat for c, e in zip(coeffs, basis)), np.zeros((2, 2), complex))
        assert np.max(np.abs(rebuilt - a.mat)) < 1e-12


def test_kahan_sum_matches_fsum():
    import math

    values = [1.0] + [1e-16] * 10**4 + [-1.0]
    acc = KahanSum()
    for v in values:
        acc.add(complex(v))
    exact = math.fsum(values)
    assert acc.value.real == pytest.approx(exact, abs=1e-15)
    naive = sum(values)
    # naive summation loses every 1e-16 increment against the leading 1.0
    assert abs(naive - exact) > 1e-13
    assert abs(acc.value.real - exact) < abs(naive - exact)
