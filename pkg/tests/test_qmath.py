import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qrc import qmath
from qrc.errors import ContractError, DimensionError
from qrc.qmath import I2, X, Y, Z


def kron_oracle(a, b):
    ra, ca = a.shape
    rb, cb = b.shape
    out = np.zeros((ra * rb, ca * cb), dtype=complex)
    for i in range(ra):
        for j in range(ca):
            for k in range(rb):
                for l in range(cb):
                    out[i * rb + k, j * cb + l] = a[i, j] * b[k, l]
    return out


def partial_trace_oracle(rho, da, db, keep):
    """Index summation over the traced factor of a bipartite operator."""
    t = rho.reshape(da, db, da, db)
    if keep == 0:
        return sum(t[:, k, :, k] for k in range(db))
    return sum(t[k, :, k, :] for k in range(da))


def bloch(rho):
    return np.real([np.trace(rho @ p) for p in (X, Y, Z)])


def test_kron_identities():
    assert np.allclose(qmath.kron(I2, I2), np.eye(4))
    assert np.allclose(qmath.kron(Z, I2), np.diag([1, 1, -1, -1]))


def test_kron_element_formula(rng):
    assert np.allclose(qmath.kron(X, Z), kron_oracle(X, Z))
    a = rng.normal(size=(2, 3)) + 1j * rng.normal(size=(2, 3))
    b = rng.normal(size=(3, 2))
    assert np.allclose(qmath.kron(a, b), kron_oracle(a, b))


def test_partial_trace_bell_marginal():
    bell = qmath.pure(np.array([1, 0, 0, 1]) / np.sqrt(2))
    assert np.allclose(qmath.partial_trace(bell, [2, 2], {0}), I2 / 2)


def test_partial_trace_product_state(rng):
    rho = qmath.random_density(1, rng)
    sigma = qmath.random_density(2, rng)
    assert np.allclose(qmath.partial_trace(qmath.kron(rho, sigma), [2, 4], {0}), rho)
    assert np.allclose(qmath.partial_trace(qmath.kron(rho, sigma), [2, 4], {1}), sigma)


def test_partial_trace_index_oracle(rng):
    rho = qmath.random_density(2, rng)
    for keep in (0, 1):
        assert np.allclose(qmath.partial_trace(rho, [2, 2], {keep}), partial_trace_oracle(rho, 2, 2, keep))


def test_partial_trace_composes(rng):
    rho = qmath.random_density(3, rng)
    step1 = qmath.partial_trace(rho, [2, 2, 2], {0, 2})  # drop factor 1
    step2 = qmath.partial_trace(step1, [2, 2], {0})  # then old factor 2
    direct = qmath.partial_trace(rho, [2, 2, 2], {0})
    assert np.max(np.abs(step2 - direct)) <= 1e-12


def test_partial_trace_dims_mismatch():
    with pytest.raises(DimensionError):
        qmath.partial_trace(np.eye(4) / 4, [2, 3], {0})


def test_trace_norm_examples(rng):
    assert qmath.trace_norm(qmath.pure([1, 0]) - qmath.pure([0, 1])) == pytest.approx(2)
    assert qmath.trace_norm(np.zeros((2, 2))) == 0
    for _ in range(5):
        a, b = qmath.random_density(1, rng), qmath.random_density(1, rng)
        assert qmath.trace_norm(a - b) == pytest.approx(np.linalg.norm(bloch(a) - bloch(b)), abs=1e-12)


def test_trace_norm_rejects_non_hermitian():
    with pytest.raises(ContractError):
        qmath.trace_norm(np.array([[0, 1], [0, 0]]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(-3, 3))
def test_trace_norm_is_a_norm(seed, alpha):
    rng = np.random.default_rng(seed)
    a = qmath.random_density(2, rng) - qmath.random_density(2, rng)
    b = qmath.random_density(2, rng) - qmath.random_density(2, rng)
    assert qmath.trace_norm(a + b) <= qmath.trace_norm(a) + qmath.trace_norm(b) + 1e-10
    assert abs(qmath.trace_norm(alpha * a) - abs(alpha) * qmath.trace_norm(a)) <= 1e-10


def test_expect_z_examples():
    for n in (1, 3):
        for i in range(n):
            assert qmath.expect_z(qmath.zeros_state(n), i) == 1
            assert qmath.expect_z(qmath.maximally_mixed(n), i) == 0
    plus = qmath.pure(np.array([1, 1]) / np.sqrt(2))
    assert qmath.expect_z(qmath.kron(plus, qmath.pure([0, 1])), 1) == pytest.approx(-1)
    assert qmath.expect_z(qmath.kron(plus, qmath.pure([0, 1])), 0) == pytest.approx(0)


def test_expect_z_matches_embedded_operator(rng):
    rho = qmath.random_density(3, rng)
    for i in range(3):
        ref = np.trace(rho @ qmath.embed(Z, i, 3)).real
        assert qmath.expect_z(rho, i) == pytest.approx(ref, abs=1e-12)


def test_expect_z_index_out_of_range():
    with pytest.raises(DimensionError):
        qmath.expect_z(qmath.zeros_state(2), 2)


def test_qubit_zero_is_leftmost():
    # |10>: qubit 0 is flipped
    rho = qmath.pure(qmath.basis_state(0b10, 2))
    assert list(qmath.expect_z_all(rho)) == [-1, 1]


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 3))
def test_random_states_are_valid(seed, n):
    rho = qmath.random_density(n, np.random.default_rng(seed))
    qmath.check_density(rho)
    assert abs(np.trace(rho) - 1) <= 1e-9
    assert np.max(np.abs(rho - rho.conj().T)) <= 1e-9


def test_check_density_rejects():
    with pytest.raises(ContractError):
        qmath.check_density(np.diag([1.5, -0.5]))
    with pytest.raises(ContractError):
        qmath.check_density(np.diag([0.5, 0.4]))
    with pytest.raises(DimensionError):
        qmath.check_density(np.eye(3) / 3)
