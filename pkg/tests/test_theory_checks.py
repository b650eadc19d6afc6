import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qrc import channels as ch
from qrc import qmath
from qrc import theory_checks as tc
from qrc.errors import InputDomainError

models = st.builds(
    tc.SeparationModel,
    J=st.floats(0, np.pi),
    alpha=st.floats(-np.pi, np.pi),
    eps=st.floats(0.05, 0.95),
    w1=st.floats(-2, 2),
    wc=st.floats(-1, 1),
)


@settings(max_examples=30, deadline=None)
@given(models, st.floats(0, 1))
def test_transfer_matrix_matches_constructed_channel(m, u):
    assert np.max(np.abs(tc.transfer_matrix(m, u) - tc.explicit_transfer_matrix(m, u))) <= 1e-10


def test_evolution_is_matrix_exponential():
    from scipy.linalg import expm

    m = tc.SeparationModel(J=0.37, alpha=-1.2, eps=0.1)
    assert np.allclose(tc.evolution(m), expm(-1j * tc.hamiltonian(m)), atol=1e-12)


def test_transfer_matrix_special_entries():
    m = tc.SeparationModel(J=np.pi / 4, alpha=0.4, eps=0.1)
    assert tc.transfer_matrix(m, 0.3)[1, 1] == pytest.approx(0, abs=1e-15)
    m = tc.SeparationModel(J=0.3, alpha=0.4, eps=0.1)
    assert tc.transfer_matrix(m, 0.5)[1, 0] == pytest.approx(0, abs=1e-15)


def _z_by_channel(m, inputs):
    rho = qmath.zeros_state(1)
    out = []
    for u in inputs:
        rho = ch.apply(tc.explicit_channel(m, u), rho)
        out.append(qmath.expect_z(rho, 0))
    return np.array(out)


@settings(max_examples=15, deadline=None)
@given(models, st.integers(0, 2**31))
def test_z_trajectories_agree(m, seed):
    x = np.random.default_rng(seed).uniform(0, 1, 12)
    via_matrix = [2 * tc.iterate_transfer(m, x[: k + 1])[1] for k in range(12)]
    assert np.max(np.abs(np.array(via_matrix) - _z_by_channel(m, x))) <= 1e-9


def test_output_geometric_examples():
    m = tc.SeparationModel(J=np.pi / 4, alpha=0.0, eps=0.1)
    value, _ = tc.output_geometric(m, [0.75, 0.2, 0.9])
    assert value == pytest.approx(0.45, abs=1e-12)
    m = tc.SeparationModel(J=0.2, alpha=0.3, eps=0.2, w1=1.5, wc=-0.3)
    assert tc.output_geometric(m, np.full(30, 0.5))[0] == pytest.approx(-0.3, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(models, st.integers(0, 2**31), st.integers(1, 40))
def test_series_vs_iteration_within_bound(m, seed, t):
    hist = np.random.default_rng(seed).uniform(0, 1, 400)
    series, bound = tc.output_geometric(m, hist, t)
    iterated = tc.output_iterated(m, hist[::-1])
    # the 400-step iteration itself differs from the infinite past by |w1| theta^400
    assert abs(series - iterated) <= bound + abs(m.w1) * m.theta**400 + 1e-12


def test_iteration_minus_series_is_initial_state_memory():
    m = tc.SeparationModel(J=0.3, alpha=0.7, eps=0.2, w1=0.8)
    hist = np.random.default_rng(0).uniform(0, 1, 25)
    series, _ = tc.output_geometric(m, hist)
    assert tc.output_iterated(m, hist[::-1]) - series == pytest.approx(m.w1 * m.theta**25, abs=1e-14)


def test_separation_witness_examples():
    m = tc.SeparationModel(J=np.pi / 4, alpha=0.3, eps=0.1, w1=1.0)
    assert abs(tc.separation_witness([1.0, 0.3], [0.0, 0.3], m) - 1.8) <= 1e-10
    assert tc.separation_witness([0.2, 0.6], [0.2, 0.6], m) == 0
    # theta = 0.4 with eps = 0.2: cos^2(2J) = 0.5
    m = tc.SeparationModel(J=np.pi / 8, alpha=0.0, eps=0.2, w1=1.0)
    assert m.theta == pytest.approx(0.4)
    d = tc.separation_witness([0.5, 0.9], [0.5, 0.1], m)
    assert d == pytest.approx(2 * np.sin(np.pi / 4) ** 2 * 0.8 * 0.4 * 0.8, abs=1e-12)


def test_domain_errors():
    with pytest.raises(InputDomainError):
        tc.SeparationModel(J=0.1, alpha=0, eps=0)
    m = tc.SeparationModel(J=0.1, alpha=0, eps=0.5)
    with pytest.raises(InputDomainError):
        tc.transfer_matrix(m, 1.5)
    with pytest.raises(ValueError):
        tc.separation_witness([1.0], [0.0, 1.0], m)
    with pytest.raises(ValueError):
        tc.output_geometric(m, [0.1, 0.2], 3)
