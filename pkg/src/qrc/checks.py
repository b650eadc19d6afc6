"""Property check suites with measured margins against their analytic bounds."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from . import circuits, learn, qmath, sampling, theory_checks
from .reservoir import ReservoirModel, make_subclass_model, run, step, subsystem_step

SUITES = ("convergence", "fading", "estimator", "truncation", "readout_invariance", "separation", "qnd")


@dataclass
class CheckResult:
    suite: str
    name: str
    passed: bool
    measured: float
    bound: float
    detail: str = ""

    def __post_init__(self):
        # plain Python scalars keep the JSON report serialisable
        self.passed = bool(self.passed)
        self.measured = float(self.measured)
        self.bound = float(self.bound)

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"{mark} {self.suite}/{self.name}: measured={self.measured:.6g} bound={self.bound:.6g} {self.detail}".rstrip()


def preset_model(name: str, seed: int = 0, eps: float = 0.1) -> ReservoirModel:
    u0, u1 = circuits.preset_pair(name, seed)
    return make_subclass_model(u0, u1, eps, name=name)


def _random_pure_state(n: int, rng) -> np.ndarray:
    psi = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return qmath.pure(psi / np.linalg.norm(psi))


# -- convergence and fading memory ---------------------------------------------


def convergence_distance(model: ReservoirModel, inputs, init_a, init_b) -> float:
    """``||rho_L - rho'_L||_1`` for one subsystem model started from two states."""
    a, b = [init_a], [init_b]
    for u in inputs:
        a, b = step(model, a, u), step(model, b, u)
    return qmath.trace_norm(a[0] - b[0])


def check_convergence(presets=circuits.PRESETS, eps=0.1, length=50, trials=3, seed=0) -> list[CheckResult]:
    """Presets wider than 5 qubits get a single trial (each step costs 1024-dim products)."""
    rng = np.random.default_rng(seed)
    bound = 2 * (1 - eps) ** length
    out = []
    for name in presets:
        m = preset_model(name, seed, eps)
        n = m.n_qubits
        worst = 0.0
        for _ in range(trials if n <= 5 else 1):
            x = rng.uniform(0, 1, length)
            worst = max(worst, convergence_distance(m, x, _random_pure_state(n, rng), _random_pure_state(n, rng)))
        out.append(CheckResult("convergence", name, worst <= bound + 1e-8, worst, bound))
    return out


def lipschitz_gap(model: ReservoirModel, rho, x: float, y: float) -> tuple[float, float]:
    s = model.subsystems[0]
    d = qmath.trace_norm(subsystem_step(s, rho, x) - subsystem_step(s, rho, y))
    return d, 2 * (1 - s.eps) * abs(x - y)


def check_fading(presets=circuits.PRESETS, eps=0.1, samples=20, seed=0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    out = []
    for name in presets:
        m = preset_model(name, seed, eps)
        worst = -np.inf
        for _ in range(samples if m.n_qubits <= 5 else 4):
            rho = qmath.random_density(m.n_qubits, rng)
            x, y = rng.uniform(0, 1, 2)
            d, b = lipschitz_gap(m, rho, x, y)
            worst = max(worst, d - b)
        out.append(CheckResult("fading", name, worst <= 1e-9, worst, 1e-9, "max(distance - 2(1-eps)|x-y|)"))
    return out


# -- sampling ------------------------------------------------------------------------


def check_estimator(preset="vigo5", length=8, n_samples=1 << 14, seeds=8, seed=0) -> list[CheckResult]:
    """Single-shot Scheme 1 estimates: z-scores and a chi-square test on the variance at the last step."""
    m = preset_model(preset, seed)
    x = np.random.default_rng(seed).uniform(0, 1, length)
    exact = run(m, x)
    ests = []
    worst = 0.0
    for s in range(seeds):
        est = sampling.estimate(m, x, sampling.SamplerConfig(n_m=n_samples, shots=1, seed=1000 + s))
        worst = max(worst, float(np.max(np.abs(sampling.z_scores(est, exact, n_samples)))))
        ests.append(est.features[-1])
    ests = np.array(ests)
    var0 = sampling.analytic_variance(exact.features[-1], n_samples)
    df = seeds - 1
    lo, hi = stats.chi2.ppf([0.005, 0.995], df)
    ratios = ests.var(axis=0, ddof=1) * df / var0
    ok = (var0 > 0) & (ratios >= lo) & (ratios <= hi)
    # one 1%-level test per qubit, so a single miss is expected now and then
    return [
        CheckResult("estimator", "z_scores", worst <= 5, worst, 5.0),
        CheckResult("estimator", "variance_chi2", int(np.sum(~ok)) <= 1, float(np.sum(~ok)), 1.0, "qubits outside 99% interval"),
    ]


def check_truncation(preset="vigo5", eps=0.1, windows=(5, 10, 20), length=30, seed=0) -> list[CheckResult]:
    m = preset_model(preset, seed, eps)
    x = np.random.default_rng(seed).uniform(0, 1, length)
    exact = run(m, x).features
    out = []
    for w in windows:
        gap = float(np.max(np.abs(sampling.truncated_exact(m, x, w).features - exact)))
        bound = 2 * (1 - eps) ** w
        out.append(CheckResult("truncation", f"M={w}", gap <= bound, gap, bound))
    return out


def check_qnd(preset="vigo5", length=6, n_samples=1 << 16, seed=0) -> list[CheckResult]:
    m = preset_model(preset, seed)
    x = np.random.default_rng(seed).uniform(0, 1, length)
    exact = run(sampling.qnd_model(m), x)
    est = sampling.estimate(m, x, sampling.SamplerConfig(n_m=n_samples, scheme=sampling.SCHEME2, seed=seed + 7))
    worst = float(np.max(np.abs(sampling.z_scores(est, exact, n_samples))))
    return [CheckResult("qnd", preset, worst <= 5, worst, 5.0, "max |z| vs dephasing-augmented channel")]


# -- readout invariance -------------------------------------------------------------------


def readout_invariance_margins(seed=0, n=3, length=40, train=30):
    """Prediction changes for product, general and time-varying calibration matrices."""
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(1 << n), size=length)
    counts = np.round(p * 8192)
    y = rng.normal(size=length)
    a_prod = learn.CalibrationMatrix.random(n, rng, correlated=False)
    a_gen = learn.CalibrationMatrix.random(n, rng, correlated=True)
    meas = learn.measured_counts(counts, a_prod)
    d_prod = learn.verify_readout_invariance(meas[:train], y[:train], meas[train:], a_prod, "z")
    meas = learn.measured_counts(counts, a_gen)
    d_gen = learn.verify_readout_invariance(meas[:train], y[:train], meas[train:], a_gen, "counts")
    # time-varying: the flip probability drifts, so raw and exactly corrected readouts disagree
    drift = [learn.CalibrationMatrix.from_qubit_flips([0.02 + 0.3 * t / length] * n, [0.01] * n) for t in range(length)]
    meas = learn.measured_counts(counts, drift)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", learn.TimeVaryingReadoutWarning)
        d_tv = learn.verify_readout_invariance(meas[:train], y[:train], meas[train:], drift, "z")
    return d_prod, d_gen, d_tv


def check_readout_invariance(seeds=5) -> list[CheckResult]:
    vals = np.array([readout_invariance_margins(s) for s in range(seeds)])
    return [
        CheckResult("readout_invariance", "product_z", vals[:, 0].max() <= 1e-6, vals[:, 0].max(), 1e-6),
        CheckResult("readout_invariance", "general_counts", vals[:, 1].max() <= 1e-6, vals[:, 1].max(), 1e-6),
        CheckResult("readout_invariance", "time_varying", vals[:, 2].min() > 1e-3, vals[:, 2].min(), 1e-3, "must exceed"),
    ]


# -- separation ------------------------------------------------------------------------------


def check_separation(seed=0) -> list[CheckResult]:
    out = []
    m = theory_checks.SeparationModel(J=np.pi / 4, alpha=0.3, eps=0.1, w1=1.0, wc=0.0)
    d = theory_checks.separation_witness([1.0, 0.4, 0.2], [0.0, 0.4, 0.2], m)
    out.append(CheckResult("separation", "witness", abs(d - 1.8) <= 1e-10, abs(d - 1.8), 1e-10, f"difference={d!r}"))
    rng = np.random.default_rng(seed)
    worst_a4, worst_series = 0.0, -np.inf
    for _ in range(10):
        m = theory_checks.SeparationModel(
            J=rng.uniform(0, np.pi), alpha=rng.uniform(-np.pi, np.pi), eps=rng.uniform(0.05, 0.9), w1=rng.normal(), wc=rng.normal()
        )
        for u in rng.uniform(0, 1, 3):
            gap = np.max(np.abs(theory_checks.transfer_matrix(m, u) - theory_checks.explicit_transfer_matrix(m, u)))
            worst_a4 = max(worst_a4, float(gap))
        hist = rng.uniform(0, 1, 200)
        t = 20
        series, bound = theory_checks.output_geometric(m, hist, t)
        iterated = theory_checks.output_iterated(m, hist[::-1])
        # iteration over the long window carries its own residual |w1| theta^200
        worst_series = max(worst_series, abs(series - iterated) - bound - abs(m.w1) * m.theta ** hist.size)
    out.append(CheckResult("separation", "transfer_matrix", worst_a4 <= 1e-10, worst_a4, 1e-10))
    out.append(CheckResult("separation", "series_vs_iteration", worst_series <= 1e-12, worst_series, 1e-12, "excess over bound"))
    return out


# -- driver ---------------------------------------------------------------------------------


def run_checks(suite: str = "all", seed: int = 0) -> list[CheckResult]:
    if suite != "all" and suite not in SUITES:
        raise KeyError(f"unknown suite {suite!r}; choose from all, {', '.join(SUITES)}")
    runners = {
        "convergence": lambda: check_convergence(seed=seed),
        "fading": lambda: check_fading(seed=seed),
        "estimator": lambda: check_estimator(seed=seed),
        "truncation": lambda: check_truncation(seed=seed),
        "readout_invariance": check_readout_invariance,
        "separation": lambda: check_separation(seed=seed),
        "qnd": lambda: check_qnd(seed=seed),
    }
    names = SUITES if suite == "all" else (suite,)
    results = []
    for name in names:
        results += runners[name]()
    return results


def as_dicts(results: list[CheckResult]) -> list[dict]:
    return [asdict(r) for r in results]
