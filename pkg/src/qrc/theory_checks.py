"""Single-qubit reservoir that separates input histories.

One system qubit is coupled to an ancilla (qubit 0, the left tensor factor)
prepared in ``|0>`` with probability ``u`` and ``|1>`` otherwise, through
``H = J (XX + YY) + alpha (Z0 + Z1)`` for unit time; with probability ``eps``
the qubit is replaced by ``I/2``.

States are written as 4-vectors ``v`` with ``rho = sum_P v_P P`` over the
basis (I, Z, X, Y), so ``v_P = Tr(P rho) / 2`` and ``|0><0|`` is
``(1/2, 1/2, 0, 0)``. The readout is ``w1 <Z> + wc = 2 w1 v_Z + wc``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import qmath
from .channels import QuantumChannel, mix, reset_channel, superoperator_matrix
from .errors import InputDomainError


@dataclass(frozen=True)
class SeparationModel:
    J: float
    alpha: float
    eps: float
    w1: float = 1.0
    wc: float = 0.0

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise InputDomainError("eps must lie in (0, 1)")

    @property
    def theta(self) -> float:
        """Contraction factor ``(1 - eps) cos^2(2J)`` of the memory term."""
        return (1 - self.eps) * np.cos(2 * self.J) ** 2

    @property
    def gain(self) -> float:
        return (1 - self.eps) * np.sin(2 * self.J) ** 2


def _check_u(u: float) -> float:
    if not 0 <= u <= 1:
        raise InputDomainError(f"input {u} outside [0, 1]")
    return float(u)


def transfer_matrix(m: SeparationModel, u: float) -> np.ndarray:
    """Closed-form 4x4 action on ``(v_I, v_Z, v_X, v_Y)``."""
    u = _check_u(u)
    c, s = np.cos(2 * m.J), np.sin(2 * m.J)
    ca, sa = np.cos(2 * m.alpha), np.sin(2 * m.alpha)
    block = np.array(
        [
            [0.0, 0.0, 0.0, 0.0],
            [s**2 * (2 * u - 1), c**2, 0.0, 0.0],
            [0.0, 0.0, c * ca, -c * sa],
            [0.0, 0.0, c * sa, c * ca],
        ]
    )
    t = (1 - m.eps) * block
    t[0, 0] += 1.0
    return t


def hamiltonian(m: SeparationModel) -> np.ndarray:
    xx = qmath.kron(qmath.X, qmath.X)
    yy = qmath.kron(qmath.Y, qmath.Y)
    zs = qmath.kron(qmath.Z, qmath.I2) + qmath.kron(qmath.I2, qmath.Z)
    return m.J * (xx + yy) + m.alpha * zs


def evolution(m: SeparationModel) -> np.ndarray:
    """``exp(-i H)`` from the Hermitian eigendecomposition of ``H``."""
    lam, v = np.linalg.eigh(hamiltonian(m))
    return (v * np.exp(-1j * lam)) @ qmath.dagger(v)


def explicit_channel(m: SeparationModel, u: float) -> QuantumChannel:
    """The dynamics built from the coupling unitary, ancilla trace and ``I/2`` replacement."""
    u = _check_u(u)
    w = evolution(m).reshape(2, 2, 2, 2)  # (anc_out, sys_out, anc_in, sys_in)

    def coupled(anc: int) -> QuantumChannel:
        # Kraus operators <k|_a e^{-iH} |anc>_a for each ancilla outcome k
        return QuantumChannel(np.array([w[k, :, anc, :] for k in range(2)]))

    return mix(
        [coupled(0), coupled(1), reset_channel(qmath.maximally_mixed(1))],
        [(1 - m.eps) * u, (1 - m.eps) * (1 - u), m.eps],
    )


def explicit_transfer_matrix(m: SeparationModel, u: float) -> np.ndarray:
    """Superoperator of :func:`explicit_channel` in the (I, Z, X, Y) basis."""
    s = superoperator_matrix(explicit_channel(m, u)).matrix
    return s.real


def initial_vector() -> np.ndarray:
    return np.array([0.5, 0.5, 0.0, 0.0])


def iterate_transfer(m: SeparationModel, window: Sequence[float], v0: np.ndarray | None = None) -> np.ndarray:
    """Apply the transfer matrices of ``window`` (oldest input first) to ``v0``."""
    v = initial_vector() if v0 is None else np.asarray(v0, dtype=float)
    for u in window:
        v = transfer_matrix(m, u) @ v
    return v


def output_iterated(m: SeparationModel, window: Sequence[float]) -> float:
    """Readout after iterating from ``|0><0|`` over ``window`` (oldest first)."""
    return float(2 * m.w1 * iterate_transfer(m, window)[1] + m.wc)


def truncation_bound(m: SeparationModel, t: int) -> float:
    """``|w1| sin^2(2J)(1-eps) theta^T / (1 - theta)``: the largest possible series tail."""
    th = m.theta
    return float(abs(m.w1) * m.gain * th**t / (1 - th))


def output_geometric(m: SeparationModel, history: Sequence[float], t: int | None = None) -> tuple[float, float]:
    """Truncated series output and its tail bound.

    ``history[j]`` is ``u_{-j}`` (most recent input first); the first ``t``
    terms are summed (all of ``history`` by default).
    """
    h = np.asarray(history, dtype=float)
    t = h.size if t is None else int(t)
    if t > h.size:
        raise ValueError("history shorter than the requested number of terms")
    for u in h[:t]:
        _check_u(u)
    powers = m.theta ** np.arange(t)
    value = m.w1 * m.gain * float(powers @ (2 * h[:t] - 1)) + m.wc
    return float(value), truncation_bound(m, t)


def separation_witness(u: Sequence[float], v: Sequence[float], m: SeparationModel) -> float:
    """Output difference ``M(u)_0 - M(v)_0`` for two histories (most recent first)."""
    if len(u) != len(v):
        raise ValueError("histories must have the same length")
    return output_geometric(m, u)[0] - output_geometric(m, v)[0]
