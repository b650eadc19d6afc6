"""Target input-output maps and the washout / train / test protocol.

Five targets are provided:

I, II   linear state-space system ``x <- A x + c u`` with a random quadratic
        readout; dense ``A`` with largest singular value 0.5 (I) or 95%-sparse
        ``A`` with largest singular value 0.99 (II).
III     input-polynomial system ``x <- p(u) x + q(u)`` on a block-diagonal
        state, each block of ``A_j`` scaled below 1/3, linear readout.
IV      Volterra series of order 5 with memory 2.
V       the missile pitch model, integrated with fixed-step RK4.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

TASK_IDS = ("I", "II", "III", "IV", "V")

WASHOUT = 50
DISCARD = 4
MULTI_STEP_L = 30
MULTI_STEP_TRAIN_END = 23
EMULATION_L = 24
EMULATION_K = 2

DEFAULT_DIMS = {"I": 200, "II": 200, "III": 70}
PAPER_DIMS = {"I": 2000, "II": 2000, "III": 700}

TASK_V_TAU = 1.0 / 80.0
TASK_V_SUBSTEPS = 16
SIGMA_III = 0.33


@dataclass(frozen=True, eq=False)
class TargetTask:
    """A seeded target map. ``params`` holds its sampled matrices and coefficients."""

    id: str
    dim: int
    seed: int
    params: dict = field(default_factory=dict)

    def __call__(self, inputs: Sequence[float]) -> np.ndarray:
        return eval_task(self, inputs)


def _uniform(rng: np.random.Generator, *shape) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, size=shape)


def rescale_spectral(a: np.ndarray, target: float) -> np.ndarray:
    """Scale ``a`` so its largest singular value equals ``target``."""
    s = np.linalg.norm(a, 2)
    return a * (target / s)


def sparsify(a: np.ndarray, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Zero a uniformly random ``fraction`` of the entries of ``a``."""
    out = a.copy().ravel()
    k = int(round(fraction * out.size))
    out[rng.permutation(out.size)[:k]] = 0.0
    return out.reshape(a.shape)


def _quadratic_readout(rng: np.random.Generator, dim: int) -> dict:
    return {
        "h_const": float(_uniform(rng)),
        "h_lin": _uniform(rng, dim),
        "h_quad": np.triu(_uniform(rng, dim, dim)),
    }


def make_task(task_id: str, dim: int | None = None, seed: int = 0) -> TargetTask:
    """Sample the parameters of target ``task_id``.

    ``dim`` is the state dimension for I/II and the size of each of the two
    diagonal blocks for III; it is ignored for IV and V.
    """
    if task_id not in TASK_IDS:
        raise KeyError(f"unknown task {task_id!r}")
    if dim is None:
        dim = DEFAULT_DIMS.get(task_id, 0)
    rng = np.random.default_rng(seed)
    p: dict = {}
    if task_id in ("I", "II"):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        a = _uniform(rng, dim, dim)
        if task_id == "II":
            a = sparsify(a, 0.95, rng)
        p["A"] = rescale_spectral(a, 0.5 if task_id == "I" else 0.99)
        p["c"] = _uniform(rng, dim)
        p.update(_quadratic_readout(rng, dim))
    elif task_id == "III":
        if dim < 1:
            raise ValueError("dim must be >= 1")
        blocks = []
        for _ in range(5):
            b1 = rescale_spectral(_uniform(rng, dim, dim), SIGMA_III)
            b2 = rescale_spectral(_uniform(rng, dim, dim), SIGMA_III)
            blocks.append(_block_diag(b1, b2))
        p["A"] = np.array(blocks)
        p["B"] = _uniform(rng, 3, 2 * dim)
        p["w"] = _uniform(rng, 2 * dim)
    elif task_id == "IV":
        p["w_c"] = float(_uniform(rng))
        p["kernels"] = [_uniform(rng, *([3] * i)) for i in range(1, 6)]
    return TargetTask(task_id, int(dim), int(seed), p)


def _block_diag(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0] + b.shape[0], a.shape[1] + b.shape[1]))
    out[: a.shape[0], : a.shape[1]] = a
    out[a.shape[0] :, a.shape[1] :] = b
    return out


def _quadratic(p: dict, x: np.ndarray) -> float:
    return float(p["h_const"] + p["h_lin"] @ x + x @ p["h_quad"] @ x)


def eval_task(task: TargetTask, inputs: Sequence[float], x0: np.ndarray | None = None) -> np.ndarray:
    """Outputs ``y_l`` for each input, starting from the zero state.

    Task IV treats the two inputs before the sequence as 1.
    """
    u = np.asarray(inputs, dtype=float)
    p = task.params
    ys = np.empty(u.size)
    if task.id in ("I", "II"):
        x = np.zeros(task.dim) if x0 is None else np.array(x0, dtype=float)
        for l, ul in enumerate(u):
            x = p["A"] @ x + p["c"] * ul
            ys[l] = _quadratic(p, x)
    elif task.id == "III":
        x = np.zeros(2 * task.dim) if x0 is None else np.array(x0, dtype=float)
        for l, ul in enumerate(u):
            pu = np.tensordot(ul ** np.arange(5), p["A"], axes=1)
            qu = (ul ** np.arange(3)) @ p["B"]
            x = pu @ x + qu
            ys[l] = p["w"] @ x
    elif task.id == "IV":
        padded = np.concatenate([[1.0, 1.0], u])
        for l in range(u.size):
            v = np.array([padded[l + 2], padded[l + 1], padded[l]])
            ys[l] = volterra_output(p, v)
    else:
        x = np.zeros(2) if x0 is None else np.array(x0, dtype=float)
        for l, ul in enumerate(u):
            x = rk4_hold(missile_rhs, x, ul, TASK_V_TAU, TASK_V_SUBSTEPS)
            ys[l] = x[1]
    return ys


def volterra_output(p: dict, window: np.ndarray) -> float:
    """``w_c + sum_i sum_{j_1..j_i} w_i[j_1..j_i] prod_k window[j_k]``; ``window[j] = u_{l-j}``."""
    y = p["w_c"]
    outer = np.ones(())
    for kernel in p["kernels"]:
        outer = np.multiply.outer(outer, window)
        y += float(np.sum(kernel * outer))
    return float(y)


def missile_rhs(x: np.ndarray, u: float) -> np.ndarray:
    x1, x2 = x
    c = np.cos(x1)
    return np.array(
        [
            x2 - 0.1 * c * (5 * x1 - 4 * x1**3 + x1**5) - 0.5 * c * u,
            -65 * x1 + 50 * x1**3 - 15 * x1**5 - x2 - 100 * u,
        ]
    )


def rk4_hold(f, x: np.ndarray, u: float, tau: float, substeps: int) -> np.ndarray:
    """Integrate ``dx/dt = f(x, u)`` over ``tau`` with ``u`` held constant (classical RK4)."""
    h = tau / substeps
    for _ in range(substeps):
        k1 = f(x, u)
        k2 = f(x + 0.5 * h * k1, u)
        k3 = f(x + 0.5 * h * k2, u)
        k4 = f(x + h * k3, u)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


# -- datasets -----------------------------------------------------------------

SEGMENTS = ("washout", "discard", "train", "test")


@dataclass(frozen=True, eq=False)
class TaskSequence:
    """One input/target sequence including its washout prefix.

    ``l`` runs from ``-WASHOUT + 1`` to ``L``; reservoir features are only
    needed for ``l >= 1``.
    """

    l: np.ndarray
    u: np.ndarray
    y: np.ndarray
    segment: np.ndarray

    def post_washout(self) -> slice:
        return slice(WASHOUT, None)

    def rows(self, segment: str) -> np.ndarray:
        """Indices into the post-washout part (row ``k`` is time ``l = k + 1``)."""
        seg = self.segment[WASHOUT:]
        return np.flatnonzero(seg == segment)

    @property
    def inputs(self) -> np.ndarray:
        return self.u[WASHOUT:]

    @property
    def targets(self) -> np.ndarray:
        return self.y[WASHOUT:]


@dataclass(frozen=True, eq=False)
class Dataset:
    task_id: str
    problem: str
    sequences: tuple[TaskSequence, ...]
    meta: dict = field(default_factory=dict)

    def train_rows(self) -> list[tuple[int, np.ndarray]]:
        return [(k, s.rows("train")) for k, s in enumerate(self.sequences) if s.rows("train").size]

    def test_rows(self) -> list[tuple[int, np.ndarray]]:
        return [(k, s.rows("test")) for k, s in enumerate(self.sequences) if s.rows("test").size]


def make_inputs(problem: str, seed: int) -> list[np.ndarray]:
    """Post-washout uniform inputs for every sequence of a problem (shared across tasks)."""
    rng = np.random.default_rng(seed)
    if problem == "multi_step":
        return [rng.uniform(0.0, 1.0, MULTI_STEP_L)]
    if problem == "emulation":
        return [rng.uniform(0.0, 1.0, EMULATION_L) for _ in range(EMULATION_K + 1)]
    raise KeyError(f"unknown problem {problem!r}")


def _segments(problem: str, k: int, length: int) -> np.ndarray:
    seg = np.empty(WASHOUT + length, dtype=object)
    seg[:WASHOUT] = "washout"
    l = np.arange(1, length + 1)
    post = np.where(l <= DISCARD, "discard", "train")
    if problem == "multi_step":
        post = np.where(l > MULTI_STEP_TRAIN_END, "test", post)
    elif k == EMULATION_K:
        post = np.where(l > DISCARD, "test", post)
    seg[WASHOUT:] = post
    return seg


def build_dataset(task: TargetTask, problem: str, seed: int) -> Dataset:
    """Washout of ``u = 1`` (length 50) followed by uniform inputs, with split labels.

    Multi-step: one sequence, train ``l = 5..23``, test ``l = 24..30``.
    Emulation: two train sequences and one test sequence, each using ``l = 5..24``.
    Task V targets are standardised with the mean and standard deviation of
    the train rows; the shift and scale are recorded in ``meta``.
    """
    seqs = []
    for k, post in enumerate(make_inputs(problem, seed)):
        u = np.concatenate([np.ones(WASHOUT), post])
        y = eval_task(task, u)
        l = np.arange(-WASHOUT + 1, post.size + 1)
        seqs.append(TaskSequence(l, u, y, _segments(problem, k, post.size)))
    meta = {"task": task.id, "task_seed": task.seed, "dim": task.dim, "input_seed": seed}
    if task.id == "V":
        train = np.concatenate([s.targets[s.rows("train")] for s in seqs])
        shift, scale = float(train.mean()), float(train.std())
        seqs = [TaskSequence(s.l, s.u, (s.y - shift) / scale, s.segment) for s in seqs]
        meta.update({"y_shift": shift, "y_scale": scale, "standardized": True})
    return Dataset(task.id, problem, tuple(seqs), meta)


def dataset_csv(seq: TaskSequence) -> str:
    lines = ["l,u,y,segment"]
    for l, u, y, s in zip(seq.l, seq.u, seq.y, seq.segment):
        lines.append(f"{int(l)},{float(u)!r},{float(y)!r},{s}")
    return "\n".join(lines) + "\n"


def washout_residual(task: TargetTask, length: int = WASHOUT) -> float:
    """``||x_L - x_{L-1}||`` under constant input 1 from the zero state (tasks I-III)."""
    p = task.params
    if task.id in ("I", "II"):
        x = np.zeros(task.dim)
        step = lambda x: p["A"] @ x + p["c"]
    elif task.id == "III":
        x = np.zeros(2 * task.dim)
        p1, q1 = p["A"].sum(axis=0), p["B"].sum(axis=0)
        step = lambda x: p1 @ x + q1
    else:
        raise ValueError("washout_residual is defined for tasks I-III")
    prev = x
    for _ in range(length):
        prev, x = x, step(x)
    return float(np.linalg.norm(x - prev))
