"""CPTP maps in Kraus form.

A :class:`QuantumChannel` is the single source of truth for a map; the
superoperator in an operator basis is derived on demand and never stored as
the authoritative representation.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import product
from typing import Sequence

import numpy as np

from . import qmath
from .errors import ContractError, DimensionError

TOL_TP = 1e-9


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    """Completely positive trace-preserving map ``rho -> sum_j K_j rho K_j^†``.

    Attributes:
        kraus: Stacked Kraus operators, shape ``(m, d, d)`` with ``d = 2**n``.
    """

    kraus: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.kraus, dtype=complex)
        if k.ndim == 2:
            k = k[None]
        if k.ndim != 3 or k.shape[0] == 0 or k.shape[1] != k.shape[2]:
            raise DimensionError(f"Kraus stack must have shape (m, d, d), got {k.shape}")
        qmath.num_qubits(k.shape[1])
        if not np.all(np.isfinite(k)):
            raise ContractError("Kraus operators contain non-finite entries")
        dev = tp_deviation(k)
        if dev > TOL_TP:
            raise ContractError(f"sum of K^†K deviates from identity by {dev:.3e}")
        k.setflags(write=False)
        object.__setattr__(self, "kraus", k)

    @property
    def dim(self) -> int:
        return self.kraus.shape[1]

    @property
    def n_qubits(self) -> int:
        return qmath.num_qubits(self.dim)

    @property
    def is_unitary(self) -> bool:
        return self.kraus.shape[0] == 1

    @cached_property
    def _row_superop(self) -> np.ndarray:
        # vec_row(K rho K^†) = (K ⊗ K*) vec_row(rho), summed over Kraus operators
        m, d, _ = self.kraus.shape
        flat = self.kraus.reshape(m, d * d)
        s = (flat.T @ np.conj(flat)).reshape(d, d, d, d)
        return np.ascontiguousarray(s.transpose(0, 2, 1, 3).reshape(d * d, d * d))

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return apply(self, rho)

    def __repr__(self) -> str:
        return f"QuantumChannel(n_qubits={self.n_qubits}, kraus_rank={self.kraus.shape[0]})"


def tp_deviation(kraus: np.ndarray) -> float:
    k = np.asarray(kraus)
    flat = k.reshape(-1, k.shape[-1])  # rows of every K stacked: sum_k K^†K = flat^† flat
    s = flat.conj().T @ flat
    return float(np.max(np.abs(s - np.eye(kraus.shape[1]))))


def unitary_channel(u) -> QuantumChannel:
    u = qmath.as_matrix(u)
    if not qmath.is_unitary(u):
        raise ContractError("unitary_channel requires a unitary matrix")
    return QuantumChannel(u[None])


def identity_channel(n: int) -> QuantumChannel:
    return QuantumChannel(np.eye(1 << n, dtype=complex)[None])


def reset_channel(sigma) -> QuantumChannel:
    """The constant map ``rho -> sigma``.

    Kraus operators are ``sqrt(lambda_m) |m><b|`` over the eigenpairs
    ``(lambda_m, |m>)`` of ``sigma`` with nonzero weight and every
    computational basis state ``|b>``.
    """
    sigma = qmath.check_density(sigma)
    lam, vecs = np.linalg.eigh(sigma)
    d = sigma.shape[0]
    ops = []
    for w, v in zip(lam, vecs.T):
        if w <= qmath.TOL_PSD:
            continue
        for b in range(d):
            k = np.zeros((d, d), dtype=complex)
            k[:, b] = np.sqrt(w) * v
            ops.append(k)
    kraus = np.array(ops)
    # eigenvalues below tolerance were dropped; restore exact trace preservation
    kraus /= np.sqrt(np.sum(lam[lam > qmath.TOL_PSD]))
    return QuantumChannel(kraus)


def mix(channels: Sequence[QuantumChannel], weights: Sequence[float]) -> QuantumChannel:
    """Convex combination ``sum_j w_j C_j``; zero-weight branches are dropped."""
    w = np.asarray(weights, dtype=float)
    if len(channels) == 0 or w.shape != (len(channels),):
        raise DimensionError("need one weight per channel")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ContractError(f"weights must be a probability vector, got {w.tolist()}")
    _same_dim(channels)
    parts = [np.sqrt(wj) * c.kraus for c, wj in zip(channels, w) if wj > 0]
    return QuantumChannel(np.concatenate(parts))


def compose(outer: QuantumChannel, inner: QuantumChannel) -> QuantumChannel:
    """The map ``rho -> outer(inner(rho))``."""
    _same_dim([outer, inner])
    k = np.einsum("aij,bjk->abik", outer.kraus, inner.kraus)
    return QuantumChannel(k.reshape(-1, outer.dim, outer.dim))


def apply(c: QuantumChannel, rho) -> np.ndarray:
    rho = qmath.as_matrix(rho)
    if rho.shape != (c.dim, c.dim):
        raise DimensionError(f"channel of dim {c.dim} applied to operator of shape {rho.shape}")
    if c.is_unitary:
        u = c.kraus[0]
        return u @ rho @ qmath.dagger(u)
    k = c.kraus
    if k.shape[0] > c.dim:
        # high Kraus rank: one d^2 x d^2 product beats m separate conjugations
        return (c._row_superop @ rho.reshape(-1)).reshape(c.dim, c.dim)
    return np.einsum("kij,jl,kml->im", k, rho, np.conj(k), optimize=True)


def _same_dim(channels: Sequence[QuantumChannel]) -> None:
    dims = {c.dim for c in channels}
    if len(dims) != 1:
        raise DimensionError(f"channels act on different dimensions: {sorted(dims)}")


# -- named noise channels ---------------------------------------------------


def amplitude_damping(gamma: float) -> QuantumChannel:
    if not 0 <= gamma <= 1:
        raise ContractError("gamma must lie in [0, 1]")
    k0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex)
    k1 = np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex)
    return QuantumChannel(np.array([k0, k1]))


def dephasing(p: float) -> QuantumChannel:
    """Phase flip with probability ``p/2``; ``p = 1`` kills all coherences."""
    if not 0 <= p <= 1:
        raise ContractError("p must lie in [0, 1]")
    return QuantumChannel(np.array([np.sqrt(1 - p / 2) * qmath.I2, np.sqrt(p / 2) * qmath.Z]))


def phase_damping(lam: float) -> QuantumChannel:
    if not 0 <= lam <= 1:
        raise ContractError("lambda must lie in [0, 1]")
    k0 = np.array([[1, 0], [0, np.sqrt(1 - lam)]], dtype=complex)
    k1 = np.array([[0, 0], [0, np.sqrt(lam)]], dtype=complex)
    return QuantumChannel(np.array([k0, k1]))


def depolarizing(p: float) -> QuantumChannel:
    """Single-qubit ``rho -> (1-p) rho + p I/2``."""
    if not 0 <= p <= 1:
        raise ContractError("p must lie in [0, 1]")
    ops = [np.sqrt(1 - 3 * p / 4) * qmath.I2] + [np.sqrt(p / 4) * s for s in (qmath.X, qmath.Y, qmath.Z)]
    return QuantumChannel(np.array(ops))


def tensor(channels: Sequence[QuantumChannel]) -> QuantumChannel:
    """Product channel ``C_0 ⊗ C_1 ⊗ ...`` (Kraus rank multiplies)."""
    ops = [qmath.kron_all(ks) for ks in product(*[c.kraus for c in channels])]
    return QuantumChannel(np.array(ops))


def local(c: QuantumChannel, n: int) -> QuantumChannel:
    """Apply the single-qubit channel ``c`` independently to each of ``n`` qubits."""
    return tensor([c] * n)


def full_dephasing(n: int) -> QuantumChannel:
    """Projective Z measurement of every qubit with the outcome discarded."""
    d = 1 << n
    ops = np.zeros((d, d, d), dtype=complex)
    ops[np.arange(d), np.arange(d), np.arange(d)] = 1.0
    return QuantumChannel(ops)


def random_channel(n: int, rng: np.random.Generator, rank: int = 2) -> QuantumChannel:
    """Random channel from a Haar isometry cut into ``rank`` Kraus blocks."""
    d = 1 << n
    v = qmath.random_unitary(d * rank, rng)[:, :d]
    return QuantumChannel(v.reshape(rank, d, d))


# -- superoperators ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Superoperator:
    """Matrix of a channel in an orthogonal operator basis.

    ``matrix[a, b] = Tr(B_a^† C(B_b)) / Tr(B_a^† B_a)``, so that if
    ``rho = sum_b v_b B_b`` then ``C(rho) = sum_a (matrix @ v)_a B_a``.
    """

    basis: np.ndarray
    matrix: np.ndarray

    def coefficients(self, rho) -> np.ndarray:
        return basis_coefficients(rho, self.basis)

    def act(self, rho) -> np.ndarray:
        v = self.matrix @ self.coefficients(rho)
        return np.tensordot(v, self.basis, axes=1)


def pauli_basis(n: int) -> np.ndarray:
    """n-qubit Pauli products, single-qubit order I, Z, X, Y, qubit 0 most significant."""
    return np.array([qmath.kron_all(ps) for ps in product(qmath.PAULI_BASIS, repeat=n)])


def basis_coefficients(rho, basis: np.ndarray) -> np.ndarray:
    rho = qmath.as_matrix(rho)
    norms = np.einsum("aij,aij->a", np.conj(basis), basis)
    return np.einsum("aji,ji->a", np.conj(basis), rho) / norms


def superoperator_matrix(c: QuantumChannel, basis: np.ndarray | None = None) -> Superoperator:
    if basis is None:
        basis = pauli_basis(c.n_qubits)
    basis = np.asarray(basis, dtype=complex)
    if basis.shape[1:] != (c.dim, c.dim):
        raise DimensionError("basis elements do not match channel dimension")
    gram = np.einsum("aji,bji->ab", np.conj(basis), basis)
    off = gram - np.diag(np.diagonal(gram))
    if np.max(np.abs(off), initial=0.0) > 1e-9:
        raise ContractError("operator basis is not Hilbert-Schmidt orthogonal")
    images = np.array([apply(c, b) for b in basis])
    s = np.einsum("aji,bji->ab", np.conj(basis), images) / np.diagonal(gram)[:, None]
    return Superoperator(basis=basis, matrix=s)


def choi_matrix(c: QuantumChannel) -> np.ndarray:
    """``sum_k vec(K_k) vec(K_k)^†`` with row-major vectorisation."""
    v = c.kraus.reshape(c.kraus.shape[0], -1)
    return v.T @ np.conj(v)


def minimal_kraus(c: QuantumChannel, tol: float = 1e-12) -> QuantumChannel:
    """Equivalent channel with the fewest Kraus operators (the Choi rank)."""
    lam, vecs = np.linalg.eigh(choi_matrix(c))
    keep = lam > tol * max(lam.max(), 1.0)
    ops = (vecs[:, keep] * np.sqrt(lam[keep])).T.reshape(-1, c.dim, c.dim)
    return QuantumChannel(ops)
