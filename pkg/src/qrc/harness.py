"""End-to-end experiments: configuration, feature generation, readout fits, reports.

A configuration is a JSON object. Keys and defaults:

    reservoirs   list of preset names or custom entries   ["vigo5"]
    problem      "multi_step" | "emulation"                "multi_step"
    tasks        subset of I..V                            all five
    eps          reset probability                         0.1
    sampler      "exact" or a SamplerConfig-like object   "exact"
    dims         per-task dimension overrides              {}
    seeds        {"circuit", "task", "input", "sampler"}   all 0
    noise        {"depolarizing": p, "amplitude_damping": g} or null
    mask         feature columns forced to zero weight      null
    ridge        readout ridge penalty                      0.0
    out          output directory                           "qrc-out"

A custom reservoir entry is ``{"name", "file"}`` naming a reservoir
definition file (as written by ``qrc reservoir dump``), relative to the
config file; its own ``eps`` line applies instead of the config value.
Command-line values override file values, and ``--seed`` replaces every seed.
"""

from __future__ import annotations

import json
import os
import platform
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__, circuits, learn, sampling, tasks
from .channels import amplitude_damping, compose, depolarizing, identity_channel, local, minimal_kraus
from .errors import ConfigError
from .reservoir import (
    FeatureSeries,
    ReservoirModel,
    loads_reservoir,
    make_subclass_model,
    multiplex,
    run,
    steady_state_deviation,
    step,
    wrap_noise,
)

PROBLEMS = ("multi_step", "emulation")
NOISE_MAX_QUBITS = 5
MULTIPLEX_PAIR = ("ourense5", "vigo5")

# default sample sizes per device family when a sampler object omits them
DEFAULT_N_M = 1024
DEFAULT_SHOTS = {"boeblingen4": 1024, "boeblingen10": 1024, "ourense5": 8192, "vigo5": 8192}

# hardware values from the reference tables, reported for context only
_REF_MULTI = {
    "boeblingen10": (0.051, 0.072, 0.043, 0.079, 0.47),
    "boeblingen4": (0.088, 0.12, 0.10, 0.092, 0.41),
    "ourense5": (0.24, 0.68, 0.25, 0.34, 2.3),
    "vigo5": (0.070, 0.22, 0.081, 0.11, 0.20),
}
_REF_EMUL = {
    "ourense5+vigo5": (0.20, 0.13, 0.16, 0.25, 0.20),
    "ourense5": (0.26, 0.27, 0.46, 0.30, 1.1),
    "vigo5": (0.32, 0.23, 0.26, 0.36, 0.17),
}
REFERENCE_NMSE = {
    (problem, res, tid): v
    for problem, table in (("multi_step", _REF_MULTI), ("emulation", _REF_EMUL))
    for res, vals in table.items()
    for tid, v in zip(tasks.TASK_IDS, vals)
}


@dataclass
class ExperimentConfig:
    reservoirs: list = field(default_factory=lambda: ["vigo5"])
    problem: str = "multi_step"
    tasks: list = field(default_factory=lambda: list(tasks.TASK_IDS))
    eps: float = 0.1
    sampler: Any = "exact"
    dims: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=lambda: {"circuit": 0, "task": 0, "input": 0, "sampler": 0})
    noise: dict | None = None
    mask: list | None = None
    ridge: float = 0.0
    out: str = "qrc-out"
    base_dir: str = "."

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if isinstance(self.reservoirs, (str, dict)):
            self.reservoirs = [self.reservoirs]
        if not self.reservoirs:
            raise ConfigError("at least one reservoir is required", "reservoirs")
        for i, r in enumerate(self.reservoirs):
            if isinstance(r, str):
                if r not in circuits.PRESETS:
                    raise ConfigError(f"unknown preset {r!r}", f"reservoirs[{i}]")
            elif isinstance(r, dict):
                for key in ("name", "file"):
                    if key not in r:
                        raise ConfigError(f"missing key {key!r}", f"reservoirs[{i}]")
                if not self.resolve(r["file"]).is_file():
                    raise ConfigError(f"file not found: {r['file']}", f"reservoirs[{i}].file")
            else:
                raise ConfigError("expected a preset name or an object", f"reservoirs[{i}]")
        if self.problem not in PROBLEMS:
            raise ConfigError(f"must be one of {PROBLEMS}", "problem")
        bad = [t for t in self.tasks if t not in tasks.TASK_IDS]
        if bad or not self.tasks:
            raise ConfigError(f"unknown or empty task list {bad}", "tasks")
        if not 0 < float(self.eps) <= 1:
            raise ConfigError("must lie in (0, 1]", "eps")
        for k in self.dims:
            if k not in tasks.DEFAULT_DIMS:
                raise ConfigError(f"no dimension for task {k!r}", f"dims.{k}")
        for k in ("circuit", "task", "input", "sampler"):
            self.seeds.setdefault(k, 0)
            if not isinstance(self.seeds[k], int) or self.seeds[k] < 0:
                raise ConfigError("seeds must be non-negative integers", f"seeds.{k}")
        if self.sampler != "exact":
            if not isinstance(self.sampler, dict):
                raise ConfigError('expected "exact" or an object', "sampler")
            allowed = {"n_m", "shots", "scheme", "window", "workers", "block_size"}
            extra = set(self.sampler) - allowed
            if extra:
                raise ConfigError(f"unknown keys {sorted(extra)}", "sampler")
            try:
                self.sampler_config(self.reservoir_names()[0])
            except ValueError as e:
                raise ConfigError(str(e), "sampler") from None
        if self.noise is not None:
            extra = set(self.noise) - {"depolarizing", "amplitude_damping"}
            if extra:
                raise ConfigError(f"unknown noise kinds {sorted(extra)}", "noise")
            for k, v in self.noise.items():
                if not 0 <= float(v) <= 1:
                    raise ConfigError("noise strengths must lie in [0, 1]", f"noise.{k}")
        if self.mask is not None and any((not isinstance(c, int)) or c < 0 for c in self.mask):
            raise ConfigError("mask entries must be non-negative column indices", "mask")
        if float(self.ridge) < 0:
            raise ConfigError("must be >= 0", "ridge")

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def reservoir_names(self) -> list[str]:
        return [r if isinstance(r, str) else str(r["name"]) for r in self.reservoirs]

    def sampler_config(self, reservoir: str, stream: int = 0) -> sampling.SamplerConfig | None:
        if self.sampler == "exact":
            return None
        s = dict(self.sampler)
        seed = int(np.random.SeedSequence(self.seeds["sampler"], spawn_key=(stream,)).generate_state(1)[0])
        return sampling.SamplerConfig(
            n_m=int(s.get("n_m", DEFAULT_N_M)),
            shots=int(s.get("shots", DEFAULT_SHOTS.get(reservoir, 1024))),
            scheme=s.get("scheme", sampling.SCHEME1),
            window=s.get("window"),
            seed=seed,
            workers=int(s.get("workers", 1)),
            block_size=int(s.get("block_size", 1 << 14)),
        )

    def echo(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d


def load_config(path: str | os.PathLike, overrides: dict | None = None) -> ExperimentConfig:
    """Read a JSON config; ``overrides`` (from the command line) take precedence."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}", "config") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e}", "config") from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be an object", "config")
    known = {f for f in ExperimentConfig.__dataclass_fields__ if f != "base_dir"}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown keys {sorted(extra)}", "config")
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if k == "seed":
            data["seeds"] = {s: int(v) for s in ("circuit", "task", "input", "sampler")}
        else:
            data[k] = v
    return ExperimentConfig(**data, base_dir=str(path.parent))


# -- building blocks -----------------------------------------------------------


def noise_channel(noise: dict) -> Any:
    c = identity_channel(1)
    if noise.get("amplitude_damping"):
        c = compose(amplitude_damping(float(noise["amplitude_damping"])), c)
    if noise.get("depolarizing"):
        c = compose(depolarizing(float(noise["depolarizing"])), c)
    return minimal_kraus(c)


def preset_width(name: str) -> int:
    return 10 if name == "boeblingen10" else 4 if name == "boeblingen4" else 5


def build_reservoir(cfg: ExperimentConfig, index: int) -> tuple[ReservoirModel, dict]:
    entry = cfg.reservoirs[index]
    if cfg.noise and isinstance(entry, str) and preset_width(entry) > NOISE_MAX_QUBITS:
        raise ConfigError(f"noise wrapping supports subsystems of at most {NOISE_MAX_QUBITS} qubits", "noise")
    if isinstance(entry, str):
        u0, u1 = circuits.preset_pair(entry, cfg.seeds["circuit"])
        model = make_subclass_model(u0, u1, float(cfg.eps), name=entry)
        deviation = [steady_state_deviation(u0)]
    else:
        try:
            model = loads_reservoir(cfg.resolve(entry["file"]).read_text(), name=str(entry["name"]))
        except ValueError as e:
            raise ConfigError(str(e), f"reservoirs[{index}].file") from None
        deviation = [max(0.0, 1.0 - abs(s.t0.kraus[0][0, 0])) if s.t0.is_unitary else None for s in model.subsystems]
    info = {"name": model.name, "n_qubits": model.n_qubits, "steady_state_deviation": deviation}
    if cfg.noise:
        widths = [s.n_qubits for s in model.subsystems]
        if max(widths) > NOISE_MAX_QUBITS:
            raise ConfigError(f"noise wrapping supports subsystems of at most {NOISE_MAX_QUBITS} qubits", "noise")
        model = wrap_noise(model, [local(noise_channel(cfg.noise), n) for n in widths])
        info["noise"] = dict(cfg.noise)
    return model, info


def washout_needed(model: ReservoirModel) -> bool:
    """False when a ``u = 1`` step leaves ``|0...0>`` unchanged, so the washout is a no-op."""
    init = model.initial_state()
    moved = step(model, init, 1.0)
    return any(np.max(np.abs(a - b)) > 1e-12 for a, b in zip(moved, init))


def reservoir_features(
    model: ReservoirModel, inputs, scfg: sampling.SamplerConfig | None, washout: int = 0
) -> FeatureSeries:
    """Features for ``inputs``; ``washout`` steps of ``u = 1`` are run first and dropped."""
    full = np.concatenate([np.ones(washout), np.asarray(inputs, dtype=float)])
    f = run(model, full) if scfg is None else sampling.estimate(model, full, scfg)
    if washout == 0:
        return f
    return FeatureSeries(f.features[washout:], dict(f.provenance, washout=washout))


# -- experiment -----------------------------------------------------------------


@dataclass
class TaskResult:
    task: str
    reservoir: str
    nmse_train: float
    nmse_test: float
    predictions: list  # per sequence: (l, y_target, y_pred, segment) arrays
    readout: Any = None


@dataclass
class RunReport:
    config: dict
    results: list
    reservoirs: list
    provenance: dict
    cost: dict
    wall_time: float
    version: str

    def nmse_table(self) -> dict:
        return {(r.task, r.reservoir): (r.nmse_train, r.nmse_test) for r in self.results}

    def to_json(self) -> dict:
        rows = []
        for r in self.results:
            row = {"task": r.task, "reservoir": r.reservoir, "nmse_train": r.nmse_train, "nmse_test": r.nmse_test}
            ref = REFERENCE_NMSE.get((self.config["problem"], r.reservoir, r.task))
            if ref is not None:
                row["reference_hardware_nmse"] = ref
            rows.append(row)
        return {
            "version": self.version,
            "config": self.config,
            "results": rows,
            "reservoirs": self.reservoirs,
            "provenance": self.provenance,
            "cost": self.cost,
            "wall_time_s": self.wall_time,
            "python": platform.python_version(),
        }


def _fit_and_score(feats: list[FeatureSeries], data: tasks.Dataset, mask, ridge: float):
    train = data.train_rows()
    test = data.test_rows()
    x_tr = np.vstack([learn.design_matrix(feats[k].features, rows) for k, rows in train])
    y_tr = np.concatenate([data.sequences[k].targets[rows] for k, rows in train])
    h = learn.ols_fit(x_tr, y_tr, ridge=ridge, mask=mask)
    x_te = np.vstack([learn.design_matrix(feats[k].features, rows) for k, rows in test])
    y_te = np.concatenate([data.sequences[k].targets[rows] for k, rows in test])
    preds = []
    for k, seq in enumerate(data.sequences):
        post = seq.l > 0
        y_hat = learn.predict(learn.design_matrix(feats[k].features), h)
        preds.append((seq.l[post], seq.targets, y_hat, seq.segment[post]))
    return learn.nmse(y_tr, learn.predict(x_tr, h)), learn.nmse(y_te, learn.predict(x_te, h)), preds, h


def run_experiment(cfg: ExperimentConfig) -> RunReport:
    """Features are computed once per reservoir and sequence; every task gets its own OLS fit."""
    t0 = time.perf_counter()
    input_seqs = tasks.make_inputs(cfg.problem, cfg.seeds["input"])
    names = cfg.reservoir_names()
    features: dict[str, list[FeatureSeries]] = {}
    infos, provenance, costs = [], {}, {}
    for i, name in enumerate(names):
        model, info = build_reservoir(cfg, i)
        washout = tasks.WASHOUT if washout_needed(model) else 0
        info["washout_simulated"] = bool(washout)
        infos.append(info)
        per_seq = []
        for k, inputs in enumerate(input_seqs):
            scfg = cfg.sampler_config(name, stream=i * 1000 + k)
            per_seq.append(reservoir_features(model, inputs, scfg, washout))
            if scfg is not None:
                c = sampling.cost(len(inputs) + washout, scfg)
                prev = costs.get(name, {"circuit_runs": 0, "channel_applications": 0, "formula": c.formula})
                prev["circuit_runs"] += c.circuit_runs
                prev["channel_applications"] += c.channel_applications
                costs[name] = prev
        features[name] = per_seq
        provenance[name] = per_seq[0].provenance
        if cfg.mask is not None and max(cfg.mask) >= per_seq[0].width:
            raise ConfigError(f"column {max(cfg.mask)} outside {per_seq[0].width} features", "mask")
    if all(p in names for p in MULTIPLEX_PAIR):
        mname = "+".join(MULTIPLEX_PAIR)
        features[mname] = [multiplex([features[p][k] for p in MULTIPLEX_PAIR]) for k in range(len(input_seqs))]
        provenance[mname] = features[mname][0].provenance
    results = []
    for tid in cfg.tasks:
        task = tasks.make_task(tid, cfg.dims.get(tid), cfg.seeds["task"])
        data = tasks.build_dataset(task, cfg.problem, cfg.seeds["input"])
        for rname, feats in features.items():
            tr, te, preds, h = _fit_and_score(feats, data, cfg.mask, float(cfg.ridge))
            results.append(TaskResult(tid, rname, tr, te, preds, h))
    return RunReport(
        config=cfg.echo(),
        results=results,
        reservoirs=infos,
        provenance=provenance,
        cost=costs,
        wall_time=time.perf_counter() - t0,
        version=__version__,
    )


# -- output ----------------------------------------------------------------------


def nmse_csv(report: RunReport) -> str:
    lines = ["task,problem,reservoir,nmse_train,nmse_test"]
    for r in report.results:
        lines.append(f"{r.task},{report.config['problem']},{r.reservoir},{r.nmse_train!r},{r.nmse_test!r}")
    return "\n".join(lines) + "\n"


def plot_csv(l, y, y_hat, segment) -> str:
    lines = ["l,y_target,y_pred,segment"]
    for row in zip(l, y, y_hat, segment):
        lines.append(f"{int(row[0])},{float(row[1])!r},{float(row[2])!r},{row[3]}")
    return "\n".join(lines) + "\n"


def parse_plot_csv(text: str) -> dict:
    rows = [line.split(",") for line in text.strip().splitlines()]
    if rows[0] != ["l", "y_target", "y_pred", "segment"]:
        raise ValueError("unexpected plot CSV header")
    body = rows[1:]
    return {
        "l": np.array([int(r[0]) for r in body]),
        "y_target": np.array([float(r[1]) for r in body]),
        "y_pred": np.array([float(r[2]) for r in body]),
        "segment": [r[3] for r in body],
    }


def emit_plotdata(report: RunReport, out: str | os.PathLike) -> list[Path]:
    """One CSV per task, reservoir and sequence."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for r in report.results:
        for k, (l, y, y_hat, seg) in enumerate(r.predictions):
            p = out / f"plot_{r.task}_{r.reservoir}_seq{k}.csv"
            p.write_text(plot_csv(l, y, y_hat, seg))
            paths.append(p)
    return paths


def write_outputs(report: RunReport, out: str | os.PathLike) -> list[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "nmse.csv").write_text(nmse_csv(report))
    (out / "report.json").write_text(json.dumps(report.to_json(), indent=2, sort_keys=True, default=str) + "\n")
    weights = []
    for r in report.results:
        p = out / f"weights_{r.task}_{r.reservoir}.txt"
        p.write_text(learn.dumps_weights(r.readout))
        weights.append(p)
    return [out / "nmse.csv", out / "report.json", *weights, *emit_plotdata(report, out)]


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
