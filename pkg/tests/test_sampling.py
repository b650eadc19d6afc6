import numpy as np
import pytest
from scipy import stats

from qrc import channels as ch
from qrc import circuits as cc
from qrc import qmath
from qrc import reservoir as rv
from qrc import sampling as sp
from qrc.errors import InputDomainError


def single_qubit_model(eps=0.1, seed=0):
    rng = np.random.default_rng(seed)
    u0 = cc.Circuit(1, [cc.u3(0, rng.uniform(-3, 3, 3))])
    u1 = cc.Circuit(1, [cc.u3(0, rng.uniform(-3, 3, 3))])
    return rv.make_subclass_model(u0, u1, eps)


def test_sample_branch_degenerate():
    rng = np.random.default_rng(0)
    assert all(sp.sample_branch(0.4, 1.0, rng) == sp.Branch.RESET for _ in range(50))
    assert all(sp.sample_branch(1.0, 0.0, rng) == sp.Branch.APPLY_U0 for _ in range(50))
    with pytest.raises(InputDomainError):
        sp.sample_branch(1.2, 0.1, rng)


def test_sample_branch_frequencies():
    n = 10**6
    draws = sp.sample_branches(0.3, 0.1, n, np.random.default_rng(5))
    freq = np.bincount(draws, minlength=3) / n
    p = np.array([0.27, 0.63, 0.10])
    assert np.all(np.abs(freq - p) <= 4 * np.sqrt(p * (1 - p) / n))


def test_scheme1_full_reset_gives_plus_one():
    m = rv.make_subclass_model(*cc.preset_pair("vigo5", 0), 1.0)
    est = sp.estimate(m, [0.2, 0.9, 0.5], sp.SamplerConfig(n_m=64, shots=4, seed=1))
    assert np.all(est.features == 1)


def test_scheme1_single_qubit_within_five_sigma():
    m = single_qubit_model()
    x = np.random.default_rng(2).uniform(0, 1, 6)
    exact = rv.run(m, x)
    n = 1 << 20
    # one shot per trajectory: outcomes are independent, so N_m S = N_m samples
    est = sp.estimate(m, x, sp.SamplerConfig(n_m=n, shots=1, seed=3))
    assert np.all(np.abs(est.features - exact.features) <= 5 * np.sqrt(sp.analytic_variance(exact.features, n)) + 1e-12)


def test_scheme1_many_shots_bounded_by_trajectory_variance():
    # shots of one trajectory share its branch record, so only N_m draws are independent
    m = single_qubit_model()
    x = np.random.default_rng(2).uniform(0, 1, 6)
    exact = rv.run(m, x)
    est = sp.estimate(m, x, sp.SamplerConfig(n_m=1 << 12, shots=1 << 8, seed=3))
    assert np.all(np.abs(est.features - exact.features) <= 5 * np.sqrt(sp.analytic_variance(exact.features, 1 << 12)))


def test_scheme1_mean_over_seeds_converges():
    m = single_qubit_model(seed=4)
    x = [0.1, 0.8, 0.45, 0.6]
    exact = rv.run(m, x).features
    runs = np.array([sp.estimate(m, x, sp.SamplerConfig(n_m=4096, seed=s)).features for s in range(16)])
    sigma = np.sqrt(sp.analytic_variance(exact, 4096 * 16))
    assert np.all(np.abs(runs.mean(axis=0) - exact) <= 5 * sigma)


def test_scheme1_non_unitary_branches_unravelled(rng):
    s = rv.Subsystem(ch.amplitude_damping(0.4), ch.random_channel(1, rng, rank=3), 0.2, qmath.random_density(1, rng))
    m = rv.ReservoirModel((s,))
    x = rng.uniform(0, 1, 5)
    exact = rv.run(m, x)
    n = 1 << 17
    z = sp.z_scores(sp.estimate(m, x, sp.SamplerConfig(n_m=n, seed=8)), exact, n)
    assert np.max(np.abs(z)) <= 5


def test_qnd_single_qubit_born_rule():
    # alpha|0> + beta|1>: each measured step is a fresh Born-rule draw
    a = np.sqrt(0.7)
    u = cc.Circuit(1, [cc.ry(0, 2 * np.arccos(a))])
    m = rv.ReservoirModel((rv.Subsystem(ch.unitary_channel(cc.circuit_unitary(u)), ch.identity_channel(1), 1e-12, qmath.zeros_state(1)),))
    n = 1 << 16
    counts = sp.sample_counts(m, [1.0], sp.SamplerConfig(n_m=n, scheme=sp.SCHEME2, seed=2)).counts[0]
    p = counts[0, 0] / n
    assert abs(p - 0.7) <= 5 * np.sqrt(0.21 / n)


def test_ancilla_channel_is_z_dephasing(rng):
    rho = qmath.random_density(2, rng)
    assert np.allclose(ch.apply(sp.ancilla_measurement_channel(2), rho), np.diag(np.diag(rho)))


def test_qnd_matches_dephased_channel():
    m = rv.make_subclass_model(*cc.preset_pair("ourense5", 1), 0.1)
    x = np.random.default_rng(1).uniform(0, 1, 5)
    exact = rv.run(sp.qnd_model(m), x)
    n = 1 << 15
    est = sp.estimate(m, x, sp.SamplerConfig(n_m=n, scheme=sp.SCHEME2, seed=4))
    assert np.max(np.abs(sp.z_scores(est, exact, n))) <= 5


def test_qnd_record_is_classical():
    """Per-step statistics do not depend on which other steps we look at."""
    m = single_qubit_model(seed=3)
    x = [0.2, 0.7, 0.4]
    cfg = sp.SamplerConfig(n_m=1 << 14, scheme=sp.SCHEME2, seed=9)
    full = sp.sample_counts(m, x, cfg).counts[0]
    reversed_view = sp.sample_counts(m, x, cfg).counts[0][::-1][::-1]
    assert np.array_equal(full, reversed_view)
    assert np.all(full.sum(axis=1) == cfg.n_m)


def test_truncate_window():
    x = [0.1, 0.2, 0.3, 0.4]
    assert sp.truncate_window(x, 3, 10) == [0.1, 0.2, 0.3]
    assert sp.truncate_window(x, 3, 1) == [0.3]
    assert sp.truncate_window(x, 4, 2) == [0.3, 0.4]
    with pytest.raises(ValueError):
        sp.truncate_window(x, 2, 0)


@pytest.mark.parametrize("window", [1, 3, 6])
def test_truncation_state_bound(window, rng):
    m = rv.ReservoirModel((rv.Subsystem(ch.random_channel(2, rng), ch.random_channel(2, rng), 0.1, qmath.zeros_state(2)),))
    x = rng.uniform(0, 1, 12)
    for l in range(1, 13):
        full = rv.run_states(m, x[:l])[0]
        trunc = rv.run_states(m, sp.truncate_window(x, l, window))[0]
        assert qmath.trace_norm(full - trunc) <= 2 * 0.9**window + 1e-12


def test_truncated_sampling_matches_truncated_exact():
    m = single_qubit_model(seed=6)
    x = np.random.default_rng(0).uniform(0, 1, 8)
    exact = sp.truncated_exact(m, x, 3)
    n = 1 << 15
    for scheme, ref in ((sp.SCHEME1, exact), (sp.SCHEME2, sp.truncated_exact(sp.qnd_model(m), x, 3))):
        est = sp.estimate(m, x, sp.SamplerConfig(n_m=n, window=3, scheme=scheme, seed=1))
        assert np.max(np.abs(sp.z_scores(est, ref, n))) <= 5


def test_cost_formulas():
    c = sp.cost(30, sp.SamplerConfig(n_m=1024, shots=1024))
    assert (c.circuit_runs, c.channel_applications) == (31_457_280, 487_587_840)
    c = sp.cost(1, sp.SamplerConfig(n_m=16, shots=3))
    assert c.circuit_runs == c.channel_applications == 48
    c = sp.cost(30, sp.SamplerConfig(n_m=1024, shots=1, scheme=sp.SCHEME2))
    assert (c.circuit_runs, c.channel_applications) == (1024, 30_720)
    c = sp.cost(30, sp.SamplerConfig(n_m=1024, shots=1024, scheme=sp.SCHEME2))
    assert (c.circuit_runs, c.channel_applications) == (1_048_576, 31_457_280)


def test_cost_truncated():
    cfg = sp.SamplerConfig(n_m=10, shots=2, window=5)
    c = sp.cost(30, cfg)
    assert c.circuit_runs == 600
    assert c.channel_applications == 20 * (15 + 25 * 5)
    assert c.channel_applications <= c.notes["applications_bound"] == 20 * 30 * 5
    c = sp.cost(30, sp.SamplerConfig(n_m=10, shots=2, window=5, scheme=sp.SCHEME2))
    assert (c.circuit_runs, c.channel_applications) == (20, 100)


def test_estimator_stats():
    s = sp.estimator_stats(np.full(10, 0.3))
    assert s.mean == pytest.approx(0.3) and s.sample_variance == pytest.approx(0, abs=1e-15)
    coin = np.random.default_rng(0).choice([-1.0, 1.0], 100_000)
    assert sp.estimator_stats(coin).sample_variance == pytest.approx(1, abs=0.01)


def test_estimator_variance_matches_analytic():
    """Means of N synthetic ±1 draws: their spread follows (1 - z^2)/N."""
    rng = np.random.default_rng(1)
    z, n, reps = 0.4, 256, 400
    draws = np.where(rng.random((reps, n)) < (1 + z) / 2, 1.0, -1.0).mean(axis=1)
    v = sp.estimator_stats(draws).sample_variance
    ratio = v * (reps - 1) / sp.analytic_variance(z, n)
    lo, hi = stats.chi2.ppf([0.005, 0.995], reps - 1)
    assert lo <= ratio <= hi


def test_sampling_determinism_and_worker_independence():
    m = rv.make_subclass_model(*cc.preset_pair("vigo5", 2), 0.1)
    x = [0.3, 0.5, 0.9]
    for scheme in (sp.SCHEME1, sp.SCHEME2):
        cfg = dict(n_m=3000, shots=2, scheme=scheme, seed=11, block_size=500)
        a = sp.sample_counts(m, x, sp.SamplerConfig(**cfg, workers=1)).counts[0]
        b = sp.sample_counts(m, x, sp.SamplerConfig(**cfg, workers=4)).counts[0]
        c = sp.sample_counts(m, x, sp.SamplerConfig(**cfg, workers=3)).counts[0]
        assert a.tobytes() == b.tobytes() == c.tobytes()
    d = sp.sample_counts(m, x, sp.SamplerConfig(n_m=3000, seed=12, block_size=500)).counts[0]
    assert d.tobytes() != a.tobytes()


def test_config_validation():
    with pytest.raises(ValueError):
        sp.SamplerConfig(n_m=0)
    with pytest.raises(ValueError):
        sp.SamplerConfig(n_m=1, window=0)
    with pytest.raises(ValueError):
        sp.SamplerConfig(n_m=1, scheme="scheme3")
    m = single_qubit_model()
    with pytest.raises(ValueError):
        sp.scheme1_estimate(m, [0.5], sp.SamplerConfig(n_m=1, scheme=sp.SCHEME2))
    with pytest.raises(InputDomainError):
        sp.estimate(m, [1.5], sp.SamplerConfig(n_m=1))
