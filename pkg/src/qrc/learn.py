"""Linear readout training, NMSE scoring and readout-error calibration."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import qmath
from .errors import ContractError, DimensionError, UndefinedMetricError
from .reservoir import ReadoutModel


def design_matrix(features: np.ndarray, rows=None) -> np.ndarray:
    """Feature rows with a trailing constant column of ones."""
    x = np.asarray(features, dtype=float)
    if rows is not None:
        x = x[rows]
    return np.hstack([x, np.ones((x.shape[0], 1))])


def ols_fit(
    x: np.ndarray,
    y: np.ndarray,
    ridge: float = 0.0,
    mask: Sequence[int] | None = None,
) -> ReadoutModel:
    """Least-squares affine readout.

    Args:
        x: Design matrix whose last column is the constant 1.
        y: Targets, shape ``(rows,)`` or ``(rows, tasks)``; each column is fitted
            independently against the same ``x``.
        ridge: Penalty on the feature weights (the bias is never penalised).
        mask: Feature columns whose weights are forced to zero.

    Rank-deficient problems get the minimum-norm solution.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1:
        raise DimensionError("design matrix must have at least one row")
    if y.shape[0] != x.shape[0]:
        raise DimensionError(f"{x.shape[0]} design rows but {y.shape[0]} targets")
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    n = x.shape[1] - 1
    active = np.ones(n + 1, dtype=bool)
    if mask is not None:
        active[list(mask)] = False
    xa = x[:, active]
    if ridge > 0:
        pen = np.sqrt(ridge) * np.eye(xa.shape[1])
        pen[-1, -1] = 0.0
        xa = np.vstack([xa, pen])
        pad = np.zeros((pen.shape[0],) + y.shape[1:])
        y = np.concatenate([y, pad])
    # one solve per target keeps multi-task fits bit-identical to single fits
    if y.ndim == 1:
        sol = np.linalg.lstsq(xa, y, rcond=None)[0]
    else:
        sol = np.stack([np.linalg.lstsq(xa, y[:, j], rcond=None)[0] for j in range(y.shape[1])], axis=1)
    w = np.zeros((n + 1,) + sol.shape[1:])
    w[active] = sol
    return ReadoutModel(degree=1, weights=w[:n], bias=w[n], n_inputs=n)


def predict(x: np.ndarray, h: ReadoutModel) -> np.ndarray:
    """Apply an affine readout to a design matrix (constant column included)."""
    x = np.asarray(x, dtype=float)
    return x[:, :-1] @ h.weights + h.bias


def nmse(y, yhat) -> float:
    """``sum (y - yhat)^2 / sum (y - mean(y))^2`` over the given window."""
    y = np.asarray(y, dtype=float).ravel()
    yhat = np.asarray(yhat, dtype=float).ravel()
    if y.shape != yhat.shape or y.size < 2:
        raise DimensionError("nmse needs two equal-length sequences of length >= 2")
    spread = float(np.sum((y - y.mean()) ** 2))
    if spread == 0.0:
        raise UndefinedMetricError("targets are constant; NMSE is undefined")
    return float(np.sum((y - yhat) ** 2) / spread)


# -- counts and calibration ----------------------------------------------------


def counts_to_z(counts: np.ndarray, shots: int | None = None) -> np.ndarray:
    """Map basis-state counts ``(..., 2**n)`` to per-qubit ``<Z>`` estimates ``(..., n)``."""
    c = np.asarray(counts, dtype=float)
    n = qmath.num_qubits(c.shape[-1])
    total = c.sum(axis=-1, keepdims=True) if shots is None else float(shots)
    return (c @ qmath.z_signs(n).T) / total


@dataclass(frozen=True, eq=False)
class CalibrationMatrix:
    """``a[i, j] = Pr(measure i | prepared j)``; columns sum to one."""

    a: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError("calibration matrix must be square")
        qmath.num_qubits(a.shape[0])
        if np.any(a < -1e-12) or np.any(a > 1 + 1e-12):
            raise ContractError("calibration entries must be probabilities")
        if np.max(np.abs(a.sum(axis=0) - 1)) > 1e-9:
            raise ContractError("calibration columns must sum to 1")
        object.__setattr__(self, "a", a)

    @property
    def pinv(self) -> np.ndarray:
        return np.linalg.pinv(self.a)

    @classmethod
    def from_qubit_flips(cls, p01: Sequence[float], p10: Sequence[float]) -> "CalibrationMatrix":
        """Uncorrelated per-qubit readout error; ``p01[i] = Pr(read 0 | prepared 1)`` on qubit ``i``."""
        mats = [np.array([[1 - b, a], [b, 1 - a]]) for a, b in zip(p01, p10)]
        return cls(qmath.kron_all(mats).real)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator, max_flip: float = 0.2, correlated: bool = False):
        if correlated:
            a = np.eye(1 << n) + rng.uniform(0, max_flip, size=(1 << n, 1 << n))
            return cls(a / a.sum(axis=0))
        return cls.from_qubit_flips(rng.uniform(0, max_flip, n), rng.uniform(0, max_flip, n))


def apply_calibration(counts: np.ndarray, a: CalibrationMatrix, cond_limit: float = 1e8) -> np.ndarray:
    """Correct measured counts with the pseudo-inverse of ``a`` (rows are timesteps)."""
    c = np.asarray(counts, dtype=float)
    if np.any(c < 0):
        raise ContractError("counts must be non-negative")
    if np.linalg.cond(a.a) > cond_limit:
        warnings.warn("calibration matrix is close to singular; using its pseudo-inverse", stacklevel=2)
    return c @ a.pinv.T


def measured_counts(true_counts: np.ndarray, a) -> np.ndarray:
    """Forward readout-error model: each row ``v`` becomes ``A v`` (``a`` may be a list per row)."""
    v = np.asarray(true_counts, dtype=float)
    if isinstance(a, CalibrationMatrix):
        return v @ a.a.T
    return np.stack([row @ m.a.T for row, m in zip(v, a)])


class TimeVaryingReadoutWarning(UserWarning):
    """Readout correction was checked with a calibration that changes between rows."""


def verify_readout_invariance(
    counts_train: np.ndarray,
    y_train: np.ndarray,
    counts_test: np.ndarray,
    a,
    features: str = "z",
) -> float:
    """Largest change in test predictions caused by readout-error correction.

    ``counts_*`` are the counts as measured (already distorted by readout
    error). Two readouts are trained with OLS, one on the raw counts and one on
    counts corrected with ``A^+``; both predict the test rows. ``a`` is one
    :class:`CalibrationMatrix` (time-invariant) or a sequence with one matrix
    per train row followed by one per test row (time-varying).

    ``features="z"`` regresses on per-qubit ``<Z>`` estimates, ``"counts"`` on
    the normalised count vectors themselves.
    """
    ctr = np.asarray(counts_train, dtype=float)
    cte = np.asarray(counts_test, dtype=float)
    if isinstance(a, CalibrationMatrix):
        cor_tr = apply_calibration(ctr, a)
        cor_te = apply_calibration(cte, a)
    else:
        mats = list(a)
        if len(mats) != len(ctr) + len(cte):
            raise DimensionError("need one calibration matrix per train and test row")
        if any(not np.array_equal(m.a, mats[0].a) for m in mats):
            warnings.warn("calibration varies over time; predictions are not expected to agree", TimeVaryingReadoutWarning, stacklevel=2)
        cor = [apply_calibration(row, m) for row, m in zip(np.vstack([ctr, cte]), mats)]
        cor_tr, cor_te = np.array(cor[: len(ctr)]), np.array(cor[len(ctr) :])

    def feats(c):
        shots = c.sum(axis=-1, keepdims=True)
        if features == "z":
            return counts_to_z(c) if np.all(shots > 0) else counts_to_z(c, 1)
        return c / shots

    raw = ols_fit(design_matrix(feats(ctr)), y_train)
    cor = ols_fit(design_matrix(feats(cor_tr)), y_train)
    y_raw = predict(design_matrix(feats(cte)), raw)
    y_cor = predict(design_matrix(feats(cor_te)), cor)
    return float(np.max(np.abs(y_raw - y_cor)))


# -- weights files -------------------------------------------------------------------


def dumps_weights(h: ReadoutModel) -> str:
    """One weight per line, labelled by its monomial (comma-separated variable indices)."""
    from .reservoir import monomials

    w = np.asarray(h.weights)
    if w.ndim != 1:
        raise DimensionError("weights files hold a single target")
    lines = [f"# degree={h.degree} n_inputs={h.n_inputs}", f"const {float(h.bias)!r}"]
    lines += [f"{','.join(map(str, m))} {float(v)!r}" for m, v in zip(monomials(h.n_inputs, h.degree), w)]
    return "\n".join(lines) + "\n"


def loads_weights(text: str) -> ReadoutModel:
    lines = text.strip().splitlines()
    meta = dict(item.split("=") for item in lines[0].lstrip("# ").split())
    bias = float(lines[1].split()[1])
    weights = [float(line.split()[1]) for line in lines[2:]]
    return ReadoutModel(degree=int(meta["degree"]), weights=np.array(weights), bias=bias, n_inputs=int(meta["n_inputs"]))
