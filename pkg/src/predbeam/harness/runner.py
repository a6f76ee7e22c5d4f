"""Sweep execution: datasets, training and evaluation for every (value, method) pair."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from ..baselines import random_beamformer, upper_bound
from ..nn.params import ParameterSet, dumps_params
from ..training import (Dataset, TrainingReport, evaluate, evaluate_beamformers,
                        generate_dataset, train)
from .config import ExperimentConfig, substream
from .results import ResultRow, validate_row, write_csv

__all__ = ["NonFiniteMetric", "PointResult", "datasets_for", "run_point", "run_sweep",
           "train_method", "stream_int", "model_meta"]

log = logging.getLogger(__name__)


class NonFiniteMetric(RuntimeError):
    pass


def stream_int(seed: int, name: str) -> int:
    return int(substream(seed, name).generate_state(1)[0])


def datasets_for(cfg: ExperimentConfig, p, positions, seed: int):
    """Train/test datasets; the same seed gives the same streams at every sweep point."""
    train_set = generate_dataset(p, cfg.n_train, stream_int(seed, "train-data"), positions,
                                 cfg.jitter_m)
    test_set = generate_dataset(p, cfg.n_test, stream_int(seed, "test-data"), positions,
                                cfg.jitter_m)
    return train_set, test_set


def train_method(cfg: ExperimentConfig, method: str, data: Dataset, seed: int):
    """Train ``hcl`` or ``naive``; returns ``(params, report, seconds)``."""
    p = data.params
    model_cfg = cfg.hcl_config(p) if method == "hcl" else cfg.naive_config(p)
    t0 = time.perf_counter()
    params, report = train(model_cfg, data, cfg.hyper, cfg.epochs, stream_int(seed, f"init:{method}"))
    return params, report, time.perf_counter() - t0


def model_meta(method: str, report: TrainingReport) -> str:
    """JSON sidecar describing the network a checkpoint belongs to."""
    c = report.config
    d = {"method": method}
    for f in c.__dataclass_fields__:
        v = getattr(c, f)
        d[f] = list(v) if isinstance(v, tuple) else v
    return json.dumps(d, sort_keys=True, indent=1) + "\n"


@dataclass
class PointResult:
    rows: List[ResultRow]
    checkpoints: Dict[str, ParameterSet]
    reports: Dict[str, TrainingReport]


def _check(metrics: dict, where: str) -> None:
    bad = {k: v for k, v in metrics.items() if not math.isfinite(v)}
    if bad:
        raise NonFiniteMetric(f"non-finite metric(s) {bad} at {where}")


def run_point(cfg: ExperimentConfig, value: float, seed: int, project: Optional[bool] = None,
              out_dir: Optional[Path] = None) -> PointResult:
    project = cfg.project_power if project is None else project
    p, positions = cfg.point(value)
    train_set, test_set = datasets_for(cfg, p, positions, seed)
    rows, ckpts, reports = [], {}, {}
    for method in cfg.methods:
        seconds = 0.0
        if method == "upper_bound":
            ub = [upper_bound(ex.channel, p) for ex in test_set.examples]
            metrics = evaluate_beamformers([u[0] for u in ub], test_set, p,
                                           rates=[u[1] for u in ub]).metrics
        elif method == "random":
            rng = np.random.default_rng(substream(seed, "random-beams"))
            Ws = [random_beamformer(p, rng) for _ in test_set.examples]
            metrics = evaluate_beamformers(Ws, test_set, p).metrics
        else:
            params, report, seconds = train_method(cfg, method, train_set, seed)
            metrics = evaluate(params, test_set, p, report.config, project)
            ckpts[method], reports[method] = params, report
            if out_dir is not None:
                stem = f"{method}-{cfg.axis}-{value:g}-seed{seed}"
                (out_dir / "checkpoints").mkdir(parents=True, exist_ok=True)
                (out_dir / "logs").mkdir(parents=True, exist_ok=True)
                (out_dir / "checkpoints" / f"{stem}.params").write_text(dumps_params(params))
                (out_dir / "checkpoints" / f"{stem}.json").write_text(model_meta(method, report))
                (out_dir / "logs" / f"{stem}.csv").write_text(report.to_csv(cfg.timing))
        _check(metrics, f"{cfg.axis}={value:g}, method={method}, seed={seed}")
        row = ResultRow.from_metrics(seed, cfg.axis, value, method, metrics,
                                     seconds if cfg.timing else 0.0)
        validate_row(row)
        rows.append(row)
        log.info("%s=%g %-11s rate=%.4f", cfg.axis, value, method, metrics["mean_sum_rate"])
    return PointResult(rows, ckpts, reports)


def run_sweep(cfg: ExperimentConfig, seed: Optional[int] = None, out_dir=None,
              project: Optional[bool] = None, plots: Optional[bool] = None) -> List[ResultRow]:
    """Run every sweep value; writes ``results.csv`` (and plots) when ``out_dir`` is given."""
    seed = cfg.seed if seed is None else seed
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    rows: List[ResultRow] = []
    for value in cfg.values:
        rows.extend(run_point(cfg, value, seed, project, out).rows)
    if out is not None:
        write_csv(rows, out / "results.csv")
        if cfg.plots if plots is None else plots:
            from .plot import plot_rows
            for metric, logy in (("mean_sum_rate", False), ("sqrt_crlb_theta", True),
                                 ("sqrt_crlb_dist", True)):
                (out / f"{metric}.svg").write_text(plot_rows(rows, metric, log_scale=logy))
    return rows
