"""Dataset synthesis, unsupervised mini-batch training, inference and evaluation."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import crlb as crlb_mod
from .hcl import HclConfig, map_input, map_output
from .kinematics import (DEFAULT_MEAN_POSITIONS, EstimatedHistory, TrajectoryWindow,
                         VehicleState, perturb_history, simulate_window)
from .nn import engine as E
from .nn.params import AdamConfig, ParameterSet, adam_step
from .objective import BatchTargets, make_targets, objective_graph
from .system import ChannelSnapshot, SystemParams, channel_matrix, sum_rate

__all__ = [
    "Example", "Dataset", "generate_dataset", "dataset_to_json", "dataset_from_json",
    "save_dataset", "load_dataset", "TrainHyper", "EpochRecord", "TrainingReport",
    "TrainingError", "train", "predict", "predict_batch", "EvalResult",
    "evaluate_beamformers", "evaluate", "example_seed",
]


@dataclass
class Example:
    window: TrajectoryWindow
    history: EstimatedHistory
    channel: ChannelSnapshot

    @property
    def states(self) -> List[VehicleState]:
        return self.window.current


@dataclass
class Dataset:
    examples: List[Example]
    seed: int
    params: SystemParams
    mean_positions: tuple = DEFAULT_MEAN_POSITIONS
    jitter_std: float = 1.0

    def __len__(self):
        return len(self.examples)

    def channels(self) -> np.ndarray:
        return np.stack([ex.channel.entries for ex in self.examples])

    def geometry(self) -> tuple:
        th = np.array([[s.theta for s in ex.states] for ex in self.examples])
        ds = np.array([[s.dist for s in ex.states] for ex in self.examples])
        return th, ds


def example_seed(seed: int, index: int) -> np.random.SeedSequence:
    """Independent stream for example ``index`` so examples can be built in any order."""
    return np.random.SeedSequence(int(seed), spawn_key=(int(index),))


def _build_example(p: SystemParams, mean_positions, rng, jitter_std) -> Example:
    window = simulate_window(p, mean_positions, rng, jitter_std)
    history = perturb_history(window, p, rng)
    cur = window.current
    H = channel_matrix([s.theta for s in cur], [s.dist for s in cur], p)
    return Example(window, history, ChannelSnapshot(H, slot_index=0))


def generate_dataset(p: SystemParams, n_examples: int, seed: int,
                     mean_positions=DEFAULT_MEAN_POSITIONS, jitter_std: float = 1.0) -> Dataset:
    if n_examples < 1:
        raise ValueError("n_examples must be >= 1")
    examples = [_build_example(p, mean_positions, np.random.default_rng(example_seed(seed, i)),
                               jitter_std)
                for i in range(n_examples)]
    return Dataset(examples, int(seed), p, tuple(tuple(m) for m in mean_positions), jitter_std)


_STATE_FIELDS = ("theta", "dist", "speed", "radial_speed")


def _params_to_dict(p: SystemParams) -> dict:
    d = asdict(p)
    d["rcs_coeff"] = [p.rcs_coeff.real, p.rcs_coeff.imag]
    if p.noise_rx_per_vehicle is not None:
        d["noise_rx_per_vehicle"] = list(p.noise_rx_per_vehicle)
    return d


def _params_from_dict(d: dict) -> SystemParams:
    d = dict(d)
    d["rcs_coeff"] = complex(*d["rcs_coeff"])
    if d.get("noise_rx_per_vehicle") is not None:
        d["noise_rx_per_vehicle"] = tuple(d["noise_rx_per_vehicle"])
    return SystemParams(**d)


def dataset_to_json(data: Dataset) -> str:
    """Deterministic text serialisation; floats round-trip exactly."""
    exs = []
    for ex in data.examples:
        grid = {f: ex.window.array(f).tolist() for f in _STATE_FIELDS}
        grid["x"] = [[s.pos_xy[0] for s in row] for row in ex.window.states]
        grid["y"] = [[s.pos_xy[1] for s in row] for row in ex.window.states]
        exs.append({"states": grid, "est_theta": ex.history.thetas.tolist(),
                    "est_dist": ex.history.dists.tolist()})
    doc = {"format": "predbeam-dataset/1", "seed": data.seed,
           "params": _params_to_dict(data.params),
           "mean_positions": [list(m) for m in data.mean_positions],
           "jitter_std": data.jitter_std, "examples": exs}
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def dataset_from_json(text: str) -> Dataset:
    doc = json.loads(text)
    if doc.get("format") != "predbeam-dataset/1":
        raise ValueError("not a predbeam dataset file")
    p = _params_from_dict(doc["params"])
    examples = []
    for e in doc["examples"]:
        g = e["states"]
        rows = [[VehicleState(g["theta"][l][k], g["dist"][l][k], g["speed"][l][k],
                              g["radial_speed"][l][k], (g["x"][l][k], g["y"][l][k]))
                 for k in range(len(g["theta"][l]))] for l in range(len(g["theta"]))]
        window = TrajectoryWindow(rows, p)
        th = np.array(e["est_theta"], dtype=float)
        ds = np.array(e["est_dist"], dtype=float)
        tau = th.shape[0]
        snaps = [ChannelSnapshot(channel_matrix(th[l], ds[l], p), slot_index=l - tau)
                 for l in range(tau)]
        history = EstimatedHistory(snaps, p.history_nmse, th, ds)
        cur = window.current
        H = channel_matrix([s.theta for s in cur], [s.dist for s in cur], p)
        examples.append(Example(window, history, ChannelSnapshot(H, 0)))
    return Dataset(examples, doc["seed"], p, tuple(tuple(m) for m in doc["mean_positions"]),
                   doc["jitter_std"])


def save_dataset(data: Dataset, path) -> None:
    Path(path).write_text(dataset_to_json(data))


def load_dataset(path) -> Dataset:
    return dataset_from_json(Path(path).read_text())


@dataclass(frozen=True)
class TrainHyper:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32

    @property
    def adam(self) -> AdamConfig:
        return AdamConfig(self.lr, self.beta1, self.beta2, self.eps)


@dataclass
class EpochRecord:
    epoch: int
    cost: float
    sum_rate: float
    angle_penalty: float
    dist_penalty: float
    power_penalty: float
    seconds: float


@dataclass
class TrainingReport:
    epochs: List[EpochRecord]
    params: ParameterSet
    config: object

    def costs(self) -> List[float]:
        return [e.cost for e in self.epochs]

    def to_csv(self, timing: bool = False) -> str:
        lines = ["epoch,cost,sum_rate,angle_penalty,dist_penalty,power_penalty,seconds"]
        for e in self.epochs:
            secs = e.seconds if timing else 0.0
            lines.append(",".join([str(e.epoch)] + [repr(float(v)) for v in (
                e.cost, e.sum_rate, e.angle_penalty, e.dist_penalty, e.power_penalty, secs)]))
        return "\n".join(lines) + "\n"


class TrainingError(RuntimeError):
    pass


def _subset(t: BatchTargets, idx) -> BatchTargets:
    return BatchTargets(*(getattr(t, f)[idx] for f in BatchTargets.__dataclass_fields__))


def resolve_input_scale(cfg, raw: np.ndarray):
    """Fill ``cfg.input_scale`` with ``1 / rms(|channel entry|)`` of ``raw`` if unset."""
    if cfg.input_scale is not None:
        return cfg
    rms = float(np.sqrt(np.mean(np.abs(raw) ** 2)))
    return cfg.with_scale(1.0 / rms if rms > 0 else 1.0)


def resolve_output_scale(cfg, p: SystemParams):
    """Fill ``cfg.output_scale`` with ``sqrt(P / (Nt K))`` if unset.

    Unit raw outputs then correspond to a beamformer that spends the whole
    budget, whatever the budget is.
    """
    if cfg.output_scale is not None:
        return cfg
    return cfg.with_output_scale(math.sqrt(p.power_budget_w / (cfg.n_tx * cfg.k_vehicles)))


def train(cfg, data: Dataset, hyper: TrainHyper = TrainHyper(), epochs: int = 6,
          seed: int = 0, init: Optional[ParameterSet] = None):
    """Minimise the negated penalised objective with mini-batch Adam.

    ``cfg`` is an :class:`~predbeam.hcl.HclConfig` or a naive-network config;
    anything with ``build()``, ``with_scale()`` and ``with_output_scale()``
    works.  Returns ``(params, report)``; ``report.config`` carries the
    resolved input and output scales.
    """
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    p = data.params
    cfg = resolve_input_scale(cfg, cfg.build().raw_scale_source(data.examples))
    cfg = resolve_output_scale(cfg, p)
    model = cfg.build()
    ss = np.random.SeedSequence(int(seed))
    init_ss, shuffle_ss = ss.spawn(2)
    params = model.init_params(np.random.default_rng(init_ss)) if init is None else init.copy()
    shuffle_rng = np.random.default_rng(shuffle_ss)

    X = model.inputs(data.examples)
    th, ds = data.geometry()
    targets = make_targets(data.channels(), th, ds, p)
    K = th.shape[1]
    N = len(data)
    bs = hyper.batch_size
    records = []
    for epoch in range(1, epochs + 1):
        t0 = time.perf_counter()
        perm = shuffle_rng.permutation(N)
        acc = np.zeros(5)
        for b_index, start in enumerate(range(0, N, bs)):
            idx = perm[start:start + bs]
            leaves = params.leaves()
            raw = model.forward(leaves, X[idx])
            terms = objective_graph(raw[..., :K], raw[..., K:], _subset(targets, idx), p)
            cost = terms["cost"]
            if not np.isfinite(cost.value):
                raise TrainingError(
                    f"non-finite cost {float(cost.value)!r} at epoch {epoch}, batch {b_index} "
                    f"(examples {idx.tolist()}); terms: "
                    + ", ".join(f"{k}={float(v.value)!r}" for k, v in terms.items()
                                if v.value.size == 1))
            E.backward(cost)
            grads = {n: (leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value))
                     for n, leaf in leaves.items()}
            adam_step(params, grads, hyper.lr, hyper.beta1, hyper.beta2, hyper.eps)
            acc += len(idx) * np.array([float(cost.value), float(terms["rate"].value),
                                        float(terms["angle_penalty"].value),
                                        float(terms["dist_penalty"].value),
                                        float(terms["power_penalty"].value)])
        acc /= N
        records.append(EpochRecord(epoch, *acc.tolist(), seconds=time.perf_counter() - t0))
    return params, TrainingReport(records, params, cfg)


def predict_batch(params: ParameterSet, examples: Sequence[Example], cfg, p: SystemParams,
                  project: bool = True) -> np.ndarray:
    """Complex beamformers ``(N, Nt, K)`` for many examples at once."""
    if cfg.input_scale is None:
        raise ValueError("config has no input scale; use the config returned by train()")
    model = cfg.build()
    leaves = {n: E.const(params[n]) for n in params}
    out = []
    for start in range(0, len(examples), 256):
        chunk = examples[start:start + 256]
        raw = model.forward(leaves, model.inputs(chunk)).value
        for r in raw:
            out.append(map_output(r, project=project, power_budget=p.power_budget_w).entries)
    return np.stack(out)


def predict(params: ParameterSet, history: EstimatedHistory, cfg: HclConfig, p: SystemParams,
            project: bool = True):
    """Beamformer for the next slot from one estimated history."""
    from .hcl import forward
    if cfg.input_scale is None:
        raise ValueError("config has no input scale; use the config returned by train()")
    raw = forward(map_input(history, cfg), params, cfg)
    return map_output(raw, cfg, project=project, power_budget=p.power_budget_w)


@dataclass
class EvalResult:
    metrics: dict
    rows: List[dict] = field(default_factory=list)


def evaluate_beamformers(Ws, data: Dataset, p: SystemParams = None,
                         rates: Optional[Sequence[float]] = None) -> EvalResult:
    """Average sum-rate, CRLBs, violation rates and power over a dataset.

    Per-vehicle CRLBs are clipped at ``p.crlb_cap`` so that switched-off
    beams yield finite averages.

    ``rates`` overrides the per-example sum-rate (used by the interference-free
    upper bound, whose rate is defined differently).
    """
    p = data.params if p is None else p
    rows = []
    for i, (ex, W) in enumerate(zip(data.examples, Ws)):
        W = np.asarray(getattr(W, "entries", W))
        th = [s.theta for s in ex.states]
        ds = [s.dist for s in ex.states]
        ang, dist = crlb_mod.crlb_all(th, ds, W, p)
        # a beam with no energy toward its vehicle reports the saturation cap
        ang, dist = np.minimum(ang, p.crlb_cap), np.minimum(dist, p.crlb_cap)
        rate = sum_rate(ex.channel, W, p) if rates is None else float(rates[i])
        rows.append({"index": i, "sum_rate": rate,
                     "crlb_theta": float(np.mean(ang)), "crlb_dist": float(np.mean(dist)),
                     "power_w": float(np.sum(np.abs(W) ** 2))})
    n = len(rows)
    mt = math.fsum(r["crlb_theta"] for r in rows) / n
    md = math.fsum(r["crlb_dist"] for r in rows) / n
    metrics = {
        "mean_sum_rate": math.fsum(r["sum_rate"] for r in rows) / n,
        "mean_crlb_theta": mt,
        "sqrt_crlb_theta": math.sqrt(mt),
        "mean_crlb_dist": md,
        "sqrt_crlb_dist": math.sqrt(md),
        "violation_rate_theta": sum(r["crlb_theta"] > p.crlb_angle_max for r in rows) / n,
        "violation_rate_dist": sum(r["crlb_dist"] > p.crlb_dist_max for r in rows) / n,
        "mean_power_w": math.fsum(r["power_w"] for r in rows) / n,
    }
    return EvalResult(metrics, rows)


def evaluate(params: ParameterSet, data: Dataset, p: SystemParams, cfg,
             project: bool = True) -> dict:
    """Metrics of a trained network on ``data``."""
    Ws = predict_batch(params, data.examples, cfg, p, project)
    return evaluate_beamformers(Ws, data, p).metrics
