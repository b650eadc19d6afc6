import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qrc import learn
from qrc.errors import ContractError, DimensionError, UndefinedMetricError


def test_design_matrix_constant_column(rng):
    f = rng.uniform(-1, 1, (6, 3))
    x = learn.design_matrix(f, rows=slice(1, 5))
    assert x.shape == (4, 4)
    assert np.all(x[:, -1] == 1.0)
    assert np.array_equal(x[:, :3], f[1:5])


def test_ols_exact_recovery(rng):
    f = rng.uniform(-1, 1, (20, 4))
    w = rng.normal(size=4)
    y = f @ w + 0.7
    h = learn.ols_fit(learn.design_matrix(f), y)
    assert np.max(np.abs(learn.predict(learn.design_matrix(f), h) - y)) <= 1e-9
    assert np.allclose(h.weights, w) and h.bias == pytest.approx(0.7)


def test_ols_constant_only(rng):
    y = rng.normal(size=9)
    h = learn.ols_fit(np.ones((9, 1)), y)
    assert h.bias == pytest.approx(y.mean())


def test_ols_vs_normal_equations(rng):
    x = learn.design_matrix(rng.normal(size=(30, 5)))
    y = rng.normal(size=30)
    h = learn.ols_fit(x, y)
    oracle = np.linalg.solve(x.T @ x, x.T @ y)
    assert np.allclose(np.append(h.weights, h.bias), oracle, atol=1e-10)


def test_ols_ridge_vs_closed_form(rng):
    x = learn.design_matrix(rng.normal(size=(25, 3)))
    y = rng.normal(size=25)
    lam = 0.3
    pen = lam * np.eye(4)
    pen[-1, -1] = 0
    oracle = np.linalg.solve(x.T @ x + pen, x.T @ y)
    h = learn.ols_fit(x, y, ridge=lam)
    assert np.allclose(np.append(h.weights, h.bias), oracle, atol=1e-10)


def test_ols_mask_and_rank_deficiency(rng):
    f = rng.normal(size=(15, 3))
    f[:, 1] = f[:, 0]  # duplicated column
    y = f[:, 0] + 0.2 * f[:, 2]
    h = learn.ols_fit(learn.design_matrix(f), y)
    assert np.allclose(learn.predict(learn.design_matrix(f), h), y)
    assert h.weights[0] == pytest.approx(h.weights[1])  # minimum norm splits evenly
    h = learn.ols_fit(learn.design_matrix(f), y, mask=[1])
    assert h.weights[1] == 0 and h.weights[0] == pytest.approx(1)


def test_multitask_equals_columnwise(rng):
    x = learn.design_matrix(rng.normal(size=(20, 4)))
    y = rng.normal(size=(20, 3))
    joint = learn.ols_fit(x, y)
    for j in range(3):
        single = learn.ols_fit(x, y[:, j])
        assert np.array_equal(joint.weights[:, j], single.weights)
        assert joint.bias[j] == single.bias


def test_ols_invariant_under_affine_remap(rng):
    f = rng.normal(size=(20, 3))
    g = rng.normal(size=(5, 3))
    y = rng.normal(size=20)
    m = rng.normal(size=(3, 3)) + 3 * np.eye(3)
    c = rng.normal(size=3)
    p1 = learn.predict(learn.design_matrix(g), learn.ols_fit(learn.design_matrix(f), y))
    p2 = learn.predict(learn.design_matrix(g @ m + c), learn.ols_fit(learn.design_matrix(f @ m + c), y))
    assert np.max(np.abs(p1 - p2)) <= 1e-9


def test_ols_errors():
    with pytest.raises(DimensionError):
        learn.ols_fit(np.ones((3, 2)), np.ones(4))
    with pytest.raises(ValueError):
        learn.ols_fit(np.ones((3, 2)), np.ones(3), ridge=-1)


def test_nmse_examples(rng):
    y = rng.normal(size=10)
    assert learn.nmse(y, y) == 0
    assert learn.nmse(y, np.full(10, y.mean())) == pytest.approx(1)
    assert learn.nmse([1, 2, 3], [1, 2, 4]) == pytest.approx(0.5)
    with pytest.raises(UndefinedMetricError):
        learn.nmse([2, 2, 2], [1, 2, 3])
    with pytest.raises(DimensionError):
        learn.nmse([1], [1])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.1, 50) | st.floats(-50, -0.1), st.floats(-100, 100))
def test_nmse_scale_invariant(seed, a, b):
    rng = np.random.default_rng(seed)
    y, yh = rng.normal(size=8), rng.normal(size=8)
    assert abs(learn.nmse(a * y + b, a * yh + b) - learn.nmse(y, yh)) <= 1e-12 * max(1, learn.nmse(y, yh))


def test_counts_to_z():
    # 2 qubits: counts on |00>,|01>,|10>,|11>
    c = np.array([10, 0, 0, 30])
    assert np.allclose(learn.counts_to_z(c), [-0.5, -0.5])
    assert np.allclose(learn.counts_to_z(np.array([0, 40, 0, 0])), [1, -1])


def test_calibration_examples(rng):
    c = rng.integers(0, 100, size=(3, 4)).astype(float)
    eye = learn.CalibrationMatrix(np.eye(4))
    assert np.allclose(learn.apply_calibration(c, eye), c)
    a = learn.CalibrationMatrix.from_qubit_flips([0.1], [0.1])
    assert np.allclose(a.a, [[0.9, 0.1], [0.1, 0.9]])
    true = np.array([700.0, 300.0])
    assert np.max(np.abs(learn.apply_calibration(learn.measured_counts(true, a), a) - true)) <= 1e-9
    g = learn.CalibrationMatrix.random(2, rng, correlated=True)
    assert np.allclose(g.pinv @ g.a, np.eye(4))


def test_calibration_validation_and_singular_warning():
    with pytest.raises(ContractError):
        learn.CalibrationMatrix(np.array([[0.5, 0.2], [0.4, 0.8]]))
    with pytest.raises(ContractError):
        learn.apply_calibration(np.array([-1.0, 2.0]), learn.CalibrationMatrix(np.eye(2)))
    sing = learn.CalibrationMatrix(np.full((2, 2), 0.5))
    with pytest.warns(UserWarning):
        out = learn.apply_calibration(np.array([5.0, 5.0]), sing)
    assert np.allclose(out, [5, 5])


def _synthetic(rng, n=2, rows=30, test=8):
    p = rng.dirichlet(np.ones(1 << n), size=rows + test)
    return np.round(p * 4096), rng.normal(size=rows)


def test_readout_invariance_identity(rng):
    c, y = _synthetic(rng)
    assert learn.verify_readout_invariance(c[:30], y, c[30:], learn.CalibrationMatrix(np.eye(4))) == 0


@pytest.mark.parametrize("seed", range(4))
def test_readout_invariance_time_invariant(seed):
    rng = np.random.default_rng(seed)
    c, y = _synthetic(rng, n=3)
    a = learn.CalibrationMatrix.random(3, rng)
    m = learn.measured_counts(c, a)
    assert learn.verify_readout_invariance(m[:30], y, m[30:], a, "z") <= 1e-6
    g = learn.CalibrationMatrix.random(3, rng, correlated=True)
    m = learn.measured_counts(c, g)
    assert learn.verify_readout_invariance(m[:30], y, m[30:], g, "counts") <= 1e-6


def test_readout_invariance_time_varying_flagged(rng):
    c, y = _synthetic(rng, n=2)
    mats = [learn.CalibrationMatrix.from_qubit_flips([0.02 + 0.01 * t] * 2, [0.01] * 2) for t in range(38)]
    m = learn.measured_counts(c, mats)
    with pytest.warns(learn.TimeVaryingReadoutWarning):
        d = learn.verify_readout_invariance(m[:30], y, m[30:], mats, "z")
    assert d > 1e-3
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        same = [mats[0]] * 38
        m = learn.measured_counts(c, same)
        assert learn.verify_readout_invariance(m[:30], y, m[30:], same, "z") <= 1e-6


def test_weights_file_round_trip(rng):
    x = learn.design_matrix(rng.normal(size=(12, 4)))
    h = learn.ols_fit(x, rng.normal(size=12))
    text = learn.dumps_weights(h)
    assert text.splitlines()[0] == "# degree=1 n_inputs=4"
    back = learn.loads_weights(text)
    assert np.array_equal(back.weights, h.weights) and back.bias == h.bias
