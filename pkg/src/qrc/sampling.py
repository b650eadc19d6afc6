"""Monte Carlo estimation of reservoir features from pure-state trajectories.

Two hardware protocols are simulated:

* Scheme 1: every estimate at time ``l`` comes from circuits started in
  ``|0...0>`` and measured only at ``l``. The random branch sequence of
  circuit ``j`` is drawn once and shared by all ``l``, exactly as re-running
  the same ``N_m`` sampled circuits would; every estimate draws fresh shots.
* Scheme 2: each of the ``N_m * S`` circuits runs once over the whole input,
  with a projective Z measurement of every qubit after each step.

Randomness is organised in fixed-size trajectory blocks. Each block draws
from its own counter-based Philox stream keyed by ``(seed, subsystem, block,
estimate time, step, purpose)``, so results are bit-identical whatever the
number of worker threads. Per-block outcome counts are integers and are summed
in block order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Sequence

import numpy as np

from . import qmath
from .channels import QuantumChannel, compose
from .circuits import Circuit, circuit_unitary, cx
from .errors import InputDomainError
from .learn import counts_to_z
from .reservoir import FeatureSeries, ReservoirModel, Subsystem

SCHEME1 = "scheme1"
SCHEME2 = "scheme2_qnd"

_PURPOSE_BRANCH = 0
_PURPOSE_MEASURE = 1


class Branch(IntEnum):
    APPLY_U0 = 0
    APPLY_U1 = 1
    RESET = 2


@dataclass(frozen=True)
class SamplerConfig:
    """Sampling settings.

    Attributes:
        n_m: Number of Monte Carlo sampled circuits.
        shots: Shots per circuit (``S``).
        scheme: ``"scheme1"`` or ``"scheme2_qnd"``.
        window: Restart horizon ``M``; ``None`` runs from ``l = 1``.
        seed: Root seed of every random stream.
        workers: Threads used for trajectory blocks (does not change results).
        block_size: Trajectories per random-stream block (does change results).
    """

    n_m: int
    shots: int = 1
    scheme: str = SCHEME1
    window: int | None = None
    seed: int = 0
    workers: int = 1
    block_size: int = 1 << 14

    def __post_init__(self):
        if self.n_m < 1 or self.shots < 1:
            raise ValueError("n_m and shots must be >= 1")
        if self.scheme not in (SCHEME1, SCHEME2):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.window is not None and self.window < 1:
            raise ValueError("window must be >= 1")
        if self.block_size < 1 or self.workers < 1:
            raise ValueError("block_size and workers must be >= 1")

    def describe(self) -> dict:
        return {
            "kind": "sampled",
            "scheme": self.scheme,
            "n_m": self.n_m,
            "shots": self.shots,
            "window": self.window,
            "seed": self.seed,
        }


def sample_branch(u: float, eps: float, rng: np.random.Generator) -> Branch:
    """Draw U0 w.p. ``(1-eps) u``, U1 w.p. ``(1-eps)(1-u)``, reset w.p. ``eps``."""
    return Branch(int(sample_branches(u, eps, 1, rng)[0]))


def sample_branches(u: float, eps: float, size: int, rng: np.random.Generator) -> np.ndarray:
    if not 0 <= u <= 1:
        raise InputDomainError(f"input {u} outside [0, 1]")
    if not 0 <= eps <= 1:
        raise InputDomainError(f"eps {eps} outside [0, 1]")
    r = rng.random(size)
    out = np.full(size, Branch.RESET, dtype=np.int8)
    out[r < (1 - eps)] = Branch.APPLY_U1
    out[r < (1 - eps) * u] = Branch.APPLY_U0
    return out


def truncate_window(inputs: Sequence[float], l: int, m: int) -> list[float]:
    """Inputs ``u_{l-M+1}, ..., u_l`` (1-based ``l``), clipped at the sequence start."""
    if m < 1:
        raise ValueError("window must be >= 1")
    return list(inputs[max(0, l - m) : l])


# -- trajectory kernel ---------------------------------------------------------


class _Kernel:
    """Per-subsystem data needed to push a batch of pure states one step."""

    def __init__(self, sub: Subsystem):
        self.eps = sub.eps
        self.n = sub.n_qubits
        self.d = 1 << self.n
        self.kraus = (sub.t0.kraus, sub.t1.kraus)
        self.kraus_t = tuple(np.ascontiguousarray(np.transpose(k, (0, 2, 1))) for k in self.kraus)
        lam, vecs = np.linalg.eigh(sub.sigma)
        keep = lam > qmath.TOL_PSD
        self.reset_p = np.cumsum(lam[keep] / lam[keep].sum())
        self.reset_vecs = np.ascontiguousarray(vecs[:, keep].T)

    def initial(self, size: int) -> np.ndarray:
        psi = np.zeros((size, self.d), dtype=complex)
        psi[:, 0] = 1.0
        return psi

    def step(self, psi: np.ndarray, u: float, rng: np.random.Generator) -> np.ndarray:
        size = psi.shape[0]
        br = sample_branches(u, self.eps, size, rng)
        out = np.empty_like(psi)
        for b in (Branch.APPLY_U0, Branch.APPLY_U1):
            idx = np.flatnonzero(br == b)
            if idx.size:
                out[idx] = self._evolve(psi[idx], b, rng)
        idx = np.flatnonzero(br == Branch.RESET)
        if idx.size:
            pick = _inverse_cdf(self.reset_p, rng.random(idx.size))
            out[idx] = self.reset_vecs[pick]
        return out

    def _evolve(self, psi: np.ndarray, b: int, rng: np.random.Generator) -> np.ndarray:
        kt = self.kraus_t[b]
        if kt.shape[0] == 1:
            return psi @ kt[0]
        # quantum-jump unravelling of a general channel
        branches = np.einsum("bj,kji->kbi", psi, kt)
        w = np.einsum("kbi,kbi->bk", branches, np.conj(branches)).real
        cdf = np.cumsum(w, axis=1)
        cdf /= cdf[:, -1:]
        pick = (rng.random(psi.shape[0])[:, None] >= cdf[:, :-1]).sum(axis=1)
        chosen = branches[pick, np.arange(psi.shape[0])]
        return chosen / np.sqrt(w[np.arange(psi.shape[0]), pick])[:, None]


def _inverse_cdf(cdf: np.ndarray, r: np.ndarray) -> np.ndarray:
    return np.minimum(np.searchsorted(cdf, r, side="right"), len(cdf) - 1)


def _measure_counts(psi: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Total computational-basis counts of ``shots`` shots on each state of the batch."""
    p = np.abs(psi) ** 2
    p /= p.sum(axis=1, keepdims=True)
    d = p.shape[1]
    if shots == 1:
        idx = _row_inverse_cdf(p, rng.random(p.shape[0]))
        return np.bincount(idx, minlength=d)
    return rng.multinomial(shots, p).sum(axis=0)


def _row_inverse_cdf(p: np.ndarray, r: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(p, axis=1)
    return np.minimum((r[:, None] >= cdf).sum(axis=1), p.shape[1] - 1)


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def _blocks(total: int, size: int) -> list[tuple[int, int]]:
    return [(b, min(size, total - b * size)) for b in range((total + size - 1) // size)]


def _scheme1_block(kernel: _Kernel, inputs, cfg: SamplerConfig, sub: int, block: int, size: int) -> np.ndarray:
    counts = np.zeros((len(inputs), kernel.d), dtype=np.int64)
    if cfg.window is None:
        psi = kernel.initial(size)
        for k, u in enumerate(inputs):
            psi = kernel.step(psi, u, _rng(cfg.seed, sub, block, 0, k, _PURPOSE_BRANCH))
            counts[k] = _measure_counts(psi, cfg.shots, _rng(cfg.seed, sub, block, k + 1, k, _PURPOSE_MEASURE))
        return counts
    for l in range(1, len(inputs) + 1):
        window = truncate_window(inputs, l, cfg.window)
        psi = kernel.initial(size)
        for k, u in enumerate(window):
            psi = kernel.step(psi, u, _rng(cfg.seed, sub, block, l, k, _PURPOSE_BRANCH))
        counts[l - 1] = _measure_counts(psi, cfg.shots, _rng(cfg.seed, sub, block, l, len(window), _PURPOSE_MEASURE))
    return counts


def _qnd_run(kernel: _Kernel, inputs, psi, seed, key) -> tuple[np.ndarray, np.ndarray]:
    """Step-and-measure every trajectory through ``inputs``; returns final state and per-step counts."""
    counts = np.zeros((len(inputs), kernel.d), dtype=np.int64)
    for k, u in enumerate(inputs):
        psi = kernel.step(psi, u, _rng(seed, *key, k, _PURPOSE_BRANCH))
        idx = _row_inverse_cdf(np.abs(psi) ** 2, _rng(seed, *key, k, _PURPOSE_MEASURE).random(psi.shape[0]))
        counts[k] = np.bincount(idx, minlength=kernel.d)
        # projective Z measurement of all qubits collapses onto a basis state
        psi = np.zeros_like(psi)
        psi[np.arange(psi.shape[0]), idx] = 1.0
    return psi, counts


def _scheme2_block(kernel: _Kernel, inputs, cfg: SamplerConfig, sub: int, block: int, size: int) -> np.ndarray:
    if cfg.window is None:
        _, counts = _qnd_run(kernel, inputs, kernel.initial(size), cfg.seed, (sub, block, 0))
        return counts
    counts = np.zeros((len(inputs), kernel.d), dtype=np.int64)
    for l in range(1, len(inputs) + 1):
        window = truncate_window(inputs, l, cfg.window)
        _, c = _qnd_run(kernel, window, kernel.initial(size), cfg.seed, (sub, block, l))
        counts[l - 1] = c[-1]
    return counts


@dataclass
class SampledCounts:
    """Computational-basis outcome counts, one ``(L, 2**n_k)`` array per subsystem."""

    counts: list[np.ndarray]
    total_shots: int
    config: SamplerConfig

    def features(self) -> FeatureSeries:
        z = [counts_to_z(c, self.total_shots) for c in self.counts]
        return FeatureSeries(np.concatenate(z, axis=1), self.config.describe())


def sample_counts(model: ReservoirModel, inputs: Sequence[float], cfg: SamplerConfig) -> SampledCounts:
    inputs = [float(u) for u in inputs]
    for u in inputs:
        if not 0 <= u <= 1:
            raise InputDomainError(f"input {u} outside [0, 1]")
    if cfg.scheme == SCHEME1:
        n_traj, shots, worker = cfg.n_m, cfg.shots, _scheme1_block
    else:
        n_traj, shots, worker = cfg.n_m * cfg.shots, 1, _scheme2_block
    per_sub = []
    for s_idx, sub in enumerate(model.subsystems):
        kernel = _Kernel(sub)
        jobs = _blocks(n_traj, cfg.block_size)

        def task(job, kernel=kernel, s_idx=s_idx):
            return worker(kernel, inputs, cfg, s_idx, job[0], job[1])

        if cfg.workers > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                parts = list(pool.map(task, jobs))
        else:
            parts = [task(j) for j in jobs]
        total = np.zeros((len(inputs), kernel.d), dtype=np.int64)
        for p in parts:
            total += p
        per_sub.append(total)
    return SampledCounts(per_sub, n_traj * shots, cfg)


def scheme1_estimate(model: ReservoirModel, inputs: Sequence[float], cfg: SamplerConfig) -> FeatureSeries:
    if cfg.scheme != SCHEME1:
        raise ValueError("scheme1_estimate needs a Scheme 1 config")
    return sample_counts(model, inputs, cfg).features()


def scheme2_qnd_estimate(model: ReservoirModel, inputs: Sequence[float], cfg: SamplerConfig) -> FeatureSeries:
    if cfg.scheme != SCHEME2:
        raise ValueError("scheme2_qnd_estimate needs a Scheme 2 config")
    return sample_counts(model, inputs, cfg).features()


def estimate(model: ReservoirModel, inputs: Sequence[float], cfg: SamplerConfig) -> FeatureSeries:
    return sample_counts(model, inputs, cfg).features()


# -- exact counterparts ------------------------------------------------------------


def ancilla_measurement_channel(n: int) -> QuantumChannel:
    """``rho -> Tr_A(C (rho ⊗ |0><0|^n) C^†)`` with ``C`` = CNOT from each qubit to its own ancilla.

    Built from the explicit ``2n``-qubit circuit (system qubits first).
    """
    c = circuit_unitary(Circuit(2 * n, [cx(i, n + i) for i in range(n)]))
    d = 1 << n
    t = c.reshape(d, d, d, d)
    # Kraus operator for ancilla outcome m: (I ⊗ <m|) C (I ⊗ |0>)
    return QuantumChannel(np.array([t[:, m, :, 0] for m in range(d)]))


def qnd_model(model: ReservoirModel) -> ReservoirModel:
    """Exact dynamics seen by Scheme 2: every branch preceded by the ancilla measurement."""
    subs = []
    for s in model.subsystems:
        meas = ancilla_measurement_channel(s.n_qubits)
        subs.append(Subsystem(compose(s.t0, meas), compose(s.t1, meas), s.eps, s.sigma))
    return ReservoirModel(tuple(subs), name=f"{model.name}+qnd")


def truncated_exact(model: ReservoirModel, inputs: Sequence[float], m: int) -> FeatureSeries:
    """Exact features when each estimate restarts from ``|0...0>`` ``m`` steps earlier."""
    from .reservoir import features_of, run_states

    rows = [features_of(run_states(model, truncate_window(inputs, l, m))) for l in range(1, len(inputs) + 1)]
    return FeatureSeries(np.array(rows), {"kind": "exact", "window": m})


# -- cost and statistics ------------------------------------------------------------


@dataclass(frozen=True)
class CostReport:
    circuit_runs: int
    channel_applications: int
    formula: str
    notes: dict = field(default_factory=dict)


def cost(length: int, cfg: SamplerConfig) -> CostReport:
    """Hardware cost of estimating all features of a length-``L`` input.

    With a window ``M``, Scheme 1 applications are counted exactly as
    ``N_m S sum_l min(l, M)`` (bounded by ``N_m S L M``); Scheme 2 is
    reported per estimate window (``N_m S`` runs, ``N_m S M`` applications),
    with the cost of covering every ``l`` in ``notes``.
    """
    L, ns = int(length), cfg.n_m * cfg.shots
    m = cfg.window
    if cfg.scheme == SCHEME1:
        if m is None:
            return CostReport(ns * L, ns * L * (L + 1) // 2, "N_m*S*L runs, N_m*S*L(L+1)/2 applications")
        apps = ns * sum(min(l, m) for l in range(1, L + 1))
        return CostReport(
            ns * L,
            apps,
            "N_m*S*L runs, N_m*S*sum_l min(l,M) applications",
            {"applications_bound": ns * L * m},
        )
    if m is None:
        return CostReport(ns, ns * L, "N_m*S runs, N_m*S*L applications")
    return CostReport(
        ns,
        ns * min(m, L),
        "per estimate window: N_m*S runs, N_m*S*M applications",
        {
            "whole_sequence_runs": ns * L,
            "whole_sequence_applications": ns * sum(min(l, m) for l in range(1, L + 1)),
        },
    )


@dataclass(frozen=True)
class EstimatorStats:
    mean: float
    sample_variance: float
    n: int


def estimator_stats(samples) -> EstimatorStats:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise ValueError("need at least two samples")
    return EstimatorStats(float(x.mean()), float(x.var(ddof=1)), int(x.size))


def analytic_variance(z_exact, n_samples: int) -> np.ndarray:
    """Variance of the mean of ``n_samples`` independent ±1 outcomes with mean ``z_exact``."""
    return (1.0 - np.asarray(z_exact) ** 2) / n_samples


def z_scores(estimate: FeatureSeries, exact: FeatureSeries, n_samples: int) -> np.ndarray:
    var = analytic_variance(exact.features, n_samples)
    diff = estimate.features - exact.features
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(var > 0, diff / np.sqrt(var), np.where(np.abs(diff) > 1e-12, np.inf, 0.0))
    return z

