"""Gate set and the fixed reservoir circuits.

Conventions:

* ``U3(a, b, c) = [[cos(a/2), -e^{ic} sin(a/2)], [e^{ib} sin(a/2), e^{i(b+c)} cos(a/2)]]``
  (OpenQASM ordering), so ``U3(a, b, c)^† = U3(-a, -c, -b)``.
* A :class:`Circuit` lists gates in time order; the first gate acts first.
* Products ``prod_{j=1}^{N} A_j`` of layer operators are read as matrix
  products ``A_1 A_2 ... A_N``, i.e. layer ``N`` acts first in time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError

TWO_PI = 2 * np.pi

GATE_ARITY = {"U3": (1, 3), "RX": (1, 1), "RY": (1, 1), "CX": (2, 0)}


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    angles: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in GATE_ARITY:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        nq, na = GATE_ARITY[self.kind]
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))
        if len(self.qubits) != nq or len(self.angles) != na:
            raise ValueError(f"{self.kind} takes {nq} qubit(s) and {na} angle(s)")
        if len(set(self.qubits)) != nq:
            raise ValueError("CX control and target must differ")
        if not all(np.isfinite(self.angles)):
            raise ValueError("gate angles must be finite")


def u3(qubit: int, theta: Sequence[float]) -> Gate:
    return Gate("U3", (qubit,), tuple(theta))


def u3_dagger(qubit: int, theta: Sequence[float]) -> Gate:
    a, b, c = theta
    return Gate("U3", (qubit,), (-a, -c, -b))


def rx(qubit: int, phi: float) -> Gate:
    return Gate("RX", (qubit,), (phi,))


def ry(qubit: int, phi: float) -> Gate:
    return Gate("RY", (qubit,), (phi,))


def cx(control: int, target: int) -> Gate:
    return Gate("CX", (control, target))


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.n_qubits < 1:
            raise DimensionError("a circuit needs at least one qubit")
        for g in self.gates:
            if max(g.qubits) >= self.n_qubits or min(g.qubits) < 0:
                raise DimensionError(f"gate {g} addresses a qubit outside 0..{self.n_qubits - 1}")

    def __len__(self) -> int:
        return len(self.gates)

    def then(self, other: "Circuit") -> "Circuit":
        if other.n_qubits != self.n_qubits:
            raise DimensionError("cannot concatenate circuits of different widths")
        return Circuit(self.n_qubits, self.gates + other.gates)


def gate_matrix(g: Gate) -> np.ndarray:
    if g.kind == "U3":
        a, b, c = g.angles
        ca, sa = np.cos(a / 2), np.sin(a / 2)
        return np.array(
            [[ca, -np.exp(1j * c) * sa], [np.exp(1j * b) * sa, np.exp(1j * (b + c)) * ca]],
            dtype=complex,
        )
    if g.kind == "RX":
        (p,) = g.angles
        return np.array([[np.cos(p / 2), -1j * np.sin(p / 2)], [-1j * np.sin(p / 2), np.cos(p / 2)]])
    if g.kind == "RY":
        (p,) = g.angles
        return np.array([[np.cos(p / 2), -np.sin(p / 2)], [np.sin(p / 2), np.cos(p / 2)]], dtype=complex)
    # CX on (control, target) with the control as the left factor
    return np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def apply_gate(states: np.ndarray, g: Gate, n: int) -> np.ndarray:
    """Apply ``g`` to a batch of state vectors, shape ``(..., 2**n)``."""
    batch = states.shape[:-1]
    t = states.reshape(batch + (2,) * n)
    nb = len(batch)
    m = gate_matrix(g)
    axes = [nb + q for q in g.qubits]
    k = len(g.qubits)
    t = np.tensordot(t, m.reshape((2,) * (2 * k)), axes=(axes, list(range(k, 2 * k))))
    # tensordot moves the new gate axes to the end; put them back in place
    t = np.moveaxis(t, list(range(t.ndim - k, t.ndim)), axes)
    return t.reshape(states.shape)


def circuit_unitary(c: Circuit) -> np.ndarray:
    d = 1 << c.n_qubits
    # rows of ``cols`` are the images of basis vectors; transpose gives U
    cols = np.eye(d, dtype=complex)
    for g in c.gates:
        cols = apply_gate(cols, g, c.n_qubits)
    return cols.T


# -- parameters and device circuits ------------------------------------------


@dataclass(frozen=True)
class GateParams:
    """Angle sets for one reservoir circuit pair, drawn uniformly from [-2π, 2π].

    ``theta[j]`` is the angle triple of layer ``j`` of ``U0``; ``phi[j, i]`` the
    triple for qubit ``i`` in single-qubit layer ``j`` of ``U1`` (layer 0 is the
    standalone leading layer).
    """

    theta: np.ndarray
    phi: np.ndarray
    seed: int | None = None

    @classmethod
    def sample(cls, n: int, n0: int, n1: int, seed: int) -> "GateParams":
        rng = np.random.default_rng(seed)
        theta = rng.uniform(-TWO_PI, TWO_PI, size=(n0, 3))
        phi = rng.uniform(-TWO_PI, TWO_PI, size=(n1 + 1, n, 3))
        return cls(theta=theta, phi=phi, seed=seed)

    @classmethod
    def zeros(cls, n: int, n0: int, n1: int) -> "GateParams":
        return cls(theta=np.zeros((n0, 3)), phi=np.zeros((n1 + 1, n, 3)))


def linear_chain(n: int, layers: int) -> list[tuple[int, int]]:
    """Default coupling sequence (0,1), (1,2), ..., wrapping after ``n - 1`` pairs."""
    return [(j % (n - 1), j % (n - 1) + 1) for j in range(layers)]


def _check_pairs(pairs, n, needed):
    if len(pairs) < needed:
        raise DimensionError(f"need at least {needed} qubit pairs, got {len(pairs)}")
    for c, t in pairs[:needed]:
        if c == t or not (0 <= c < n and 0 <= t < n):
            raise DimensionError(f"invalid CX pair ({c}, {t}) for {n} qubits")


def build_boeblingen_pair(
    n: int, n0: int, n1: int, params: GateParams, pairs: Sequence[tuple[int, int]] | None = None
) -> tuple[Circuit, Circuit]:
    """Layered ``U0(θ)`` of conjugated CNOTs and ``U1(φ)`` of U3 layers interleaved with CNOTs."""
    if n < 2:
        raise DimensionError("the layered circuits need n >= 2")
    pairs = list(pairs) if pairs is not None else linear_chain(n, max(n0, n1))
    _check_pairs(pairs, n, max(n0, n1))
    u0 = []
    for j in reversed(range(n0)):
        c, t = pairs[j]
        u0 += [u3_dagger(t, params.theta[j]), cx(c, t), u3(t, params.theta[j])]
    u1 = []
    for j in reversed(range(n1)):
        c, t = pairs[j]
        u1.append(cx(c, t))
        u1 += [u3(i, params.phi[j + 1, i]) for i in range(n)]
    u1 += [u3(i, params.phi[0, i]) for i in range(n)]
    return Circuit(n, u0), Circuit(n, u1)


# Qubit pairs for the two five-qubit devices. Both share a T-shaped coupling
# map 0-1, 1-2, 1-3, 3-4; the pair sequences are preset data.
OURENSE_PAIRS = [(0, 1), (1, 2), (1, 3), (3, 4)]
VIGO_PAIRS = [(0, 1), (3, 4), (1, 2)]


def build_ourense_pair(phi: np.ndarray, pairs: Sequence[tuple[int, int]] = OURENSE_PAIRS):
    """``U0`` = four CNOTs; ``U1(φ)`` = one U3 on each of five qubits. ``phi`` has shape (5, 3)."""
    phi = np.asarray(phi, dtype=float).reshape(5, 3)
    _check_pairs(list(pairs), 5, 4)
    u0 = [cx(c, t) for c, t in reversed(list(pairs)[:4])]
    u1 = [u3(i, phi[i]) for i in range(5)]
    return Circuit(5, u0), Circuit(5, u1)


def build_vigo_pair(theta: np.ndarray, phi: np.ndarray, pairs: Sequence[tuple[int, int]] = VIGO_PAIRS):
    """``U0(θ)`` = three RY-conjugated CNOTs; ``U1(φ)`` = one RX per qubit.

    ``theta`` has three entries (one per layer), ``phi`` five.
    """
    theta = np.asarray(theta, dtype=float).reshape(3)
    phi = np.asarray(phi, dtype=float).reshape(5)
    _check_pairs(list(pairs), 5, 3)
    u0 = []
    for j in reversed(range(3)):
        c, t = pairs[j]
        u0 += [ry(t, -theta[j]), cx(c, t), ry(t, theta[j])]
    u1 = [rx(i, phi[i]) for i in range(5)]
    return Circuit(5, u0), Circuit(5, u1)


# -- presets ----------------------------------------------------------------

PRESETS = ("boeblingen4", "boeblingen10", "ourense5", "vigo5")


def preset_pair(name: str, seed: int) -> tuple[Circuit, Circuit]:
    """Build the named device circuit pair with angles drawn from ``seed``."""
    if name == "boeblingen4":
        return build_boeblingen_pair(4, 5, 5, GateParams.sample(4, 5, 5, seed))
    if name == "boeblingen10":
        return build_boeblingen_pair(10, 5, 5, GateParams.sample(10, 5, 5, seed))
    rng = np.random.default_rng(seed)
    if name == "ourense5":
        return build_ourense_pair(rng.uniform(-TWO_PI, TWO_PI, size=(5, 3)))
    if name == "vigo5":
        theta = rng.uniform(-TWO_PI, TWO_PI, size=3)
        phi = rng.uniform(-TWO_PI, TWO_PI, size=5)
        return build_vigo_pair(theta, phi)
    raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


# -- text format --------------------------------------------------------------


def format_gate(g: Gate) -> str:
    return " ".join([g.kind, *map(str, g.qubits), *(repr(a) for a in g.angles)])


def dumps(c: Circuit) -> str:
    return "".join(format_gate(g) + "\n" for g in c.gates)


def parse_gate(line: str) -> Gate:
    parts = line.split()
    kind = parts[0].upper()
    if kind not in GATE_ARITY:
        raise ValueError(f"unknown gate {parts[0]!r}")
    nq, _ = GATE_ARITY[kind]
    return Gate(kind, tuple(int(p) for p in parts[1 : 1 + nq]), tuple(float(p) for p in parts[1 + nq :]))


def loads(text: str | Iterable[str], n_qubits: int) -> Circuit:
    gates = []
    lines = text.splitlines() if isinstance(text, str) else text
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if line:
            gates.append(parse_gate(line))
    return Circuit(n_qubits, gates)
