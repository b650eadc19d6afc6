"""Input-driven dissipative reservoir dynamics and polynomial readout.

Each subsystem ``k`` evolves as

    rho_k <- (1 - eps_k) * (u * T0_k(rho_k) + (1 - u) * T1_k(rho_k)) + eps_k * sigma_k

and the joint state is the tensor product of subsystem states, which are kept
separately and never multiplied out.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import combinations_with_replacement
from typing import Sequence

import numpy as np

from . import qmath
from .channels import QuantumChannel, apply, compose, unitary_channel
from . import circuits
from .circuits import Circuit, circuit_unitary
from .errors import ContractError, DimensionError, InputDomainError


@dataclass(frozen=True, eq=False)
class Subsystem:
    t0: QuantumChannel
    t1: QuantumChannel
    eps: float
    sigma: np.ndarray

    def __post_init__(self):
        if self.t0.dim != self.t1.dim:
            raise DimensionError("T0 and T1 act on different dimensions")
        if not 0 < self.eps <= 1:
            raise InputDomainError(f"eps must lie in (0, 1], got {self.eps}")
        sigma = qmath.check_density(self.sigma)
        if sigma.shape[0] != self.t0.dim:
            raise DimensionError("sigma does not match the channel dimension")
        sigma.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)

    @property
    def n_qubits(self) -> int:
        return self.t0.n_qubits


@dataclass(frozen=True, eq=False)
class ReservoirModel:
    subsystems: tuple[Subsystem, ...]
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "subsystems", tuple(self.subsystems))
        if not self.subsystems:
            raise DimensionError("a reservoir needs at least one subsystem")

    @property
    def n_qubits(self) -> int:
        return sum(s.n_qubits for s in self.subsystems)

    def initial_state(self) -> list[np.ndarray]:
        """All subsystems in ``|0...0>``."""
        return [qmath.zeros_state(s.n_qubits) for s in self.subsystems]


@dataclass(frozen=True, eq=False)
class FeatureSeries:
    """``features[l, i]`` is ``<Z^(i)>`` after input ``l`` (0-based row index)."""

    features: np.ndarray
    provenance: dict = field(default_factory=lambda: {"kind": "exact"})

    def __post_init__(self):
        f = np.asarray(self.features, dtype=float)
        if f.ndim != 2:
            raise DimensionError("features must be a (L, n) array")
        if np.any(np.abs(f) > 1 + 1e-9):
            raise ContractError("Z expectations must lie in [-1, 1]")
        object.__setattr__(self, "features", f)

    @property
    def length(self) -> int:
        return self.features.shape[0]

    @property
    def width(self) -> int:
        return self.features.shape[1]


def _check_input(u: float) -> float:
    u = float(u)
    if not 0.0 <= u <= 1.0:
        raise InputDomainError(f"input {u} outside [0, 1]")
    return u


def subsystem_step(s: Subsystem, rho: np.ndarray, u: float) -> np.ndarray:
    u = _check_input(u)
    out = s.eps * s.sigma
    if s.eps < 1:
        mixed = np.zeros_like(out)
        if u > 0:
            mixed = mixed + u * apply(s.t0, rho)
        if u < 1:
            mixed = mixed + (1 - u) * apply(s.t1, rho)
        out = out + (1 - s.eps) * mixed
    # keep the stored state exactly Hermitian so round-off cannot accumulate
    return (out + qmath.dagger(out)) / 2


def step(model: ReservoirModel, state: Sequence[np.ndarray], u: float) -> list[np.ndarray]:
    if len(state) != len(model.subsystems):
        raise DimensionError("state list does not match the number of subsystems")
    return [subsystem_step(s, rho, u) for s, rho in zip(model.subsystems, state)]


def features_of(state: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate([qmath.expect_z_all(rho) for rho in state])


def run(model: ReservoirModel, inputs: Sequence[float], init: Sequence[np.ndarray] | None = None) -> FeatureSeries:
    """Exact density-matrix evolution; row ``l`` holds the features after input ``l``."""
    state = list(init) if init is not None else model.initial_state()
    rows = []
    for u in inputs:
        state = step(model, state, u)
        rows.append(features_of(state))
    feats = np.array(rows) if rows else np.zeros((0, model.n_qubits))
    return FeatureSeries(feats, {"kind": "exact", "model": model.name})


def run_states(model: ReservoirModel, inputs: Sequence[float], init: Sequence[np.ndarray] | None = None):
    """Like :func:`run` but returns the final per-subsystem state list."""
    state = list(init) if init is not None else model.initial_state()
    for u in inputs:
        state = step(model, state, u)
    return state


# -- polynomial readout ------------------------------------------------------


def monomials(n: int, degree: int) -> list[tuple[int, ...]]:
    """Non-constant monomials of total degree <= ``degree`` in ``n`` variables.

    Each monomial is a non-decreasing tuple of variable indices, so
    ``(0, 0, 2)`` stands for ``x0**2 * x2``.
    """
    if degree < 1:
        raise ValueError("readout degree must be >= 1")
    return [m for d in range(1, degree + 1) for m in combinations_with_replacement(range(n), d)]


def polynomial_features(x: np.ndarray, degree: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    cols = [np.prod(x[:, list(m)], axis=1) for m in monomials(x.shape[1], degree)]
    return np.stack(cols, axis=1)


@dataclass(frozen=True, eq=False)
class ReadoutModel:
    """Polynomial readout ``y = sum_m w_m * prod(x[m]) + w_c``.

    ``weights`` is ordered like :func:`monomials`; a 2-d ``weights`` (and 1-d
    ``bias``) holds one column per target.
    """

    degree: int
    weights: np.ndarray
    bias: float | np.ndarray
    n_inputs: int

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        expected = len(monomials(self.n_inputs, self.degree))
        if w.shape[0] != expected:
            raise DimensionError(f"expected {expected} weights, got {w.shape[0]}")
        object.__setattr__(self, "weights", w)


def readout(features: FeatureSeries | np.ndarray, h: ReadoutModel) -> np.ndarray:
    x = features.features if isinstance(features, FeatureSeries) else np.asarray(features, dtype=float)
    if x.shape[1] != h.n_inputs:
        raise DimensionError(f"readout expects {h.n_inputs} features, got {x.shape[1]}")
    return polynomial_features(x, h.degree) @ h.weights + h.bias


# -- constructions -----------------------------------------------------------


def wrap_noise(model: ReservoirModel, noise: Sequence[QuantumChannel]) -> ReservoirModel:
    """Follow every branch with a fixed noise channel per subsystem.

    ``T_j <- N ∘ T_j`` and ``sigma <- N(sigma)``; ``eps`` is unchanged, so the
    result is again a reservoir of the same form.
    """
    if len(noise) != len(model.subsystems):
        raise DimensionError("need one noise channel per subsystem")
    subs = []
    for s, c in zip(model.subsystems, noise):
        if c.dim != s.t0.dim:
            raise DimensionError("noise channel dimension does not match subsystem")
        sigma = apply(c, s.sigma)
        subs.append(Subsystem(compose(c, s.t0), compose(c, s.t1), s.eps, (sigma + qmath.dagger(sigma)) / 2))
    return ReservoirModel(tuple(subs), name=f"{model.name}+noise")


def multiplex(series: Sequence[FeatureSeries]) -> FeatureSeries:
    """Concatenate feature columns of reservoirs driven by the same inputs."""
    if not series:
        raise DimensionError("nothing to multiplex")
    lengths = {s.length for s in series}
    if len(lengths) != 1:
        raise DimensionError(f"feature series have different lengths: {sorted(lengths)}")
    return FeatureSeries(
        np.concatenate([s.features for s in series], axis=1),
        {"kind": "multiplexed", "parts": [s.provenance for s in series]},
    )


def make_subclass_model(u0: Circuit, u1: Circuit, eps: float, sigma=None, name: str = "custom") -> ReservoirModel:
    """Single-subsystem reservoir whose branches are the unitaries of two circuits."""
    if u0.n_qubits != u1.n_qubits:
        raise DimensionError("U0 and U1 circuits have different widths")
    if sigma is None:
        sigma = qmath.zeros_state(u0.n_qubits)
    sub = Subsystem(unitary_channel(circuit_unitary(u0)), unitary_channel(circuit_unitary(u1)), eps, sigma)
    return ReservoirModel((sub,), name=name)


def steady_state_deviation(u0: Circuit) -> float:
    """``1 - |<0...0| U0 |0...0>|``: zero iff ``U0`` fixes ``|0...0>`` up to phase."""
    u = circuit_unitary(u0)
    return max(0.0, float(1.0 - abs(u[0, 0])))


def joint_state(state: Sequence[np.ndarray]) -> np.ndarray:
    """Tensor the subsystem states together (test oracles and small models only)."""
    return qmath.kron_all(state)


# -- definition files ------------------------------------------------------------
#
# Header lines ``key=value`` (eps, sigma, subsystems, n_qubits) followed by one
# ``[U0 k]`` and one ``[U1 k]`` section per subsystem in circuit text format.
# ``n_qubits`` is a comma-separated list with one entry per subsystem;
# ``sigma`` is only ``zeros``.


def dumps_reservoir(pairs: Sequence[tuple[Circuit, Circuit]], eps: float) -> str:
    lines = [
        f"eps={eps!r}",
        "sigma=zeros",
        f"subsystems={len(pairs)}",
        "n_qubits=" + ",".join(str(u0.n_qubits) for u0, _ in pairs),
    ]
    for k, (u0, u1) in enumerate(pairs):
        lines.append(f"[U0 {k}]")
        lines += [circuits.format_gate(g) for g in u0.gates]
        lines.append(f"[U1 {k}]")
        lines += [circuits.format_gate(g) for g in u1.gates]
    return "\n".join(lines) + "\n"


def loads_reservoir(text: str, name: str = "custom") -> ReservoirModel:
    header: dict[str, str] = {}
    sections: dict[tuple[str, int], list[str]] = {}
    current = None
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            kind, idx = line[1:-1].split()
            current = (kind.upper(), int(idx))
            sections[current] = []
        elif current is None:
            key, _, value = line.partition("=")
            header[key.strip()] = value.strip()
        else:
            sections[current].append(line)
    try:
        eps = float(header["eps"])
        count = int(header.get("subsystems", "1"))
        widths = [int(w) for w in header["n_qubits"].split(",")]
    except (KeyError, ValueError) as e:
        raise DimensionError(f"bad reservoir header: {e}") from None
    if header.get("sigma", "zeros") != "zeros":
        raise DimensionError("only sigma=zeros is supported in definition files")
    if len(widths) != count:
        raise DimensionError("n_qubits needs one entry per subsystem")
    subs = []
    for k, n in enumerate(widths):
        if ("U0", k) not in sections or ("U1", k) not in sections:
            raise DimensionError(f"subsystem {k} needs [U0 {k}] and [U1 {k}] sections")
        u0 = circuits.loads(sections["U0", k], n)
        u1 = circuits.loads(sections["U1", k], n)
        subs.append(make_subclass_model(u0, u1, eps).subsystems[0])
    return ReservoirModel(tuple(subs), name=name)
