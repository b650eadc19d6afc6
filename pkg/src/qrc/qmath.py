"""Dense linear algebra and quantum-state helpers.

Operators are plain complex ``numpy`` arrays. Qubit 0 is the leftmost tensor
factor, so for ``n`` qubits ``Z^(i) = I^{⊗i} ⊗ Z ⊗ I^{⊗(n-1-i)}`` and bit ``i``
of a computational basis label is bit ``n-1-i`` of its integer index.
"""

from __future__ import annotations

from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractError, DimensionError

TOL_HERM = 1e-9
TOL_TRACE = 1e-9
TOL_PSD = 1e-9

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)

#: Single-qubit operator basis in the order I, Z, X, Y.
PAULI_BASIS = (I2, Z, X, Y)
PAULI_LABELS = ("I", "Z", "X", "Y")


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-d matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ContractError("matrix has non-finite entries")
    return m


def kron(a, b) -> np.ndarray:
    """Kronecker product ``a ⊗ b``."""
    return np.kron(as_matrix(a), as_matrix(b))


def kron_all(ops: Iterable) -> np.ndarray:
    return reduce(np.kron, [as_matrix(o) for o in ops])


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(a).T


def num_qubits(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 1 or 1 << n != dim:
        raise DimensionError(f"dimension {dim} is not a power of two")
    return n


def is_hermitian(a: np.ndarray, tol: float = TOL_HERM) -> bool:
    return a.shape[0] == a.shape[1] and float(np.max(np.abs(a - dagger(a)), initial=0.0)) <= tol


def is_unitary(u: np.ndarray, tol: float = 1e-9) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return bool(np.max(np.abs(u @ dagger(u) - np.eye(u.shape[0]))) <= tol)


def check_density(rho, tol: float = TOL_HERM) -> np.ndarray:
    """Validate a density operator and return it as a complex array.

    Raises ``ContractError`` unless ``rho`` is Hermitian, unit trace and
    positive semidefinite, each to ``tol``.
    """
    rho = as_matrix(rho)
    if rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"density operator must be square, got {rho.shape}")
    num_qubits(rho.shape[0])
    herm = float(np.max(np.abs(rho - dagger(rho))))
    if herm > tol:
        raise ContractError(f"not Hermitian (max deviation {herm:.3e})")
    tr = abs(np.trace(rho) - 1.0)
    if tr > tol:
        raise ContractError(f"trace differs from 1 by {tr:.3e}")
    lam = float(np.linalg.eigvalsh((rho + dagger(rho)) / 2)[0])
    if lam < -tol:
        raise ContractError(f"negative eigenvalue {lam:.3e}")
    return rho


def basis_state(index: int, n: int) -> np.ndarray:
    psi = np.zeros(1 << n, dtype=complex)
    psi[index] = 1.0
    return psi


def pure(psi) -> np.ndarray:
    """Projector ``|psi><psi|`` of a (normalised) state vector."""
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, np.conj(psi))


def zeros_state(n: int) -> np.ndarray:
    """The density operator ``(|0><0|)^{⊗n}``."""
    return pure(basis_state(0, n))


def maximally_mixed(n: int) -> np.ndarray:
    d = 1 << n
    return np.eye(d, dtype=complex) / d


def embed(op: np.ndarray, qubit: int, n: int) -> np.ndarray:
    """Lift a single-qubit operator to act on ``qubit`` of an ``n``-qubit register."""
    if not 0 <= qubit < n:
        raise DimensionError(f"qubit {qubit} out of range for {n} qubits")
    return kron_all([np.eye(1 << qubit), op, np.eye(1 << (n - 1 - qubit))])


def z_signs(n: int) -> np.ndarray:
    """``(n, 2**n)`` array: entry ``[i, b]`` is the Z^(i) eigenvalue of basis state ``b``."""
    idx = np.arange(1 << n)
    bits = (idx[None, :] >> (n - 1 - np.arange(n))[:, None]) & 1
    return 1.0 - 2.0 * bits


def partial_trace(rho, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Reduce ``rho`` to the factors listed in ``keep``.

    ``dims`` gives the dimension of each tensor factor, leftmost first. The
    kept factors appear in their original order in the result.
    """
    rho = as_matrix(rho)
    dims = [int(d) for d in dims]
    total = int(np.prod(dims)) if dims else 1
    if rho.shape != (total, total):
        raise DimensionError(f"dims {dims} do not match operator of shape {rho.shape}")
    keep = sorted(set(int(k) for k in keep))
    if any(not 0 <= k < len(dims) for k in keep):
        raise DimensionError(f"keep={keep} out of range for {len(dims)} factors")
    m = len(dims)
    t = rho.reshape(dims + dims)
    row = list(range(m))
    col = [m + k if k in keep else k for k in range(m)]
    out = [k for k in keep] + [m + k for k in keep]
    reduced = np.einsum(t, row + col, out)
    d_keep = int(np.prod([dims[k] for k in keep])) if keep else 1
    return reduced.reshape(d_keep, d_keep)


def trace_norm(h, tol: float = TOL_HERM) -> float:
    """Schatten-1 norm of a Hermitian matrix (sum of absolute eigenvalues)."""
    h = as_matrix(h)
    if not is_hermitian(h, tol):
        raise ContractError("trace_norm expects a Hermitian matrix")
    return float(np.sum(np.abs(np.linalg.eigvalsh((h + dagger(h)) / 2))))


def expect_z(rho, i: int, tol: float = TOL_HERM) -> float:
    """``Tr(rho Z^(i))`` for qubit ``i`` (qubit 0 leftmost)."""
    rho = as_matrix(rho)
    n = num_qubits(rho.shape[0])
    if not 0 <= i < n:
        raise DimensionError(f"qubit index {i} out of range for {n} qubits")
    diag = np.diagonal(rho)
    if float(np.max(np.abs(diag.imag))) > tol:
        raise ContractError("diagonal has an imaginary part; operator is not Hermitian")
    return float(z_signs(n)[i] @ diag.real)


def expect_z_all(rho) -> np.ndarray:
    """Vector of ``<Z^(i)>`` for every qubit of ``rho``."""
    rho = as_matrix(rho)
    n = num_qubits(rho.shape[0])
    return z_signs(n) @ np.diagonal(rho).real


def random_density(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random density operator from the Ginibre ensemble of the given rank."""
    d = 1 << n
    k = d if rank is None else rank
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    rho = g @ dagger(g)
    return rho / np.trace(rho)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(g)
    ph = np.diagonal(r) / np.abs(np.diagonal(r))
    return q * ph
