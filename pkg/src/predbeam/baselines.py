"""Comparison schemes: interference-free upper bound, single-snapshot network, random beams."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .hcl import map_output
from .nn import engine as E
from .nn.engine import Node
from .nn.layers import dense, glorot_uniform
from .nn.params import ParameterSet
from .system import BeamformingMatrix, SystemParams

__all__ = ["waterfilling", "waterfilling_rate", "upper_bound", "NaiveNetConfig", "NaiveModel",
           "naive_input", "naive_train", "naive_predict", "random_beamformer"]


def waterfilling(gains, P: float) -> np.ndarray:
    """Rate-maximising power split ``p_k = max(0, mu - 1/g_k)`` with ``sum p = P``.

    Channels are dropped from the active set, weakest first, until every
    active channel receives positive power.
    """
    g = np.asarray(gains, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise ValueError("gains must be a nonempty 1-D array")
    if not P > 0:
        raise ValueError(f"power budget must be positive, got {P}")
    if np.any(g < 0) or not np.all(np.isfinite(g)):
        raise ValueError("gains must be finite and nonnegative")
    if not np.any(g > 0):
        raise ValueError("all gains are zero")
    order = np.argsort(-g, kind="stable")
    inv = np.full(g.size, np.inf)
    inv[g > 0] = 1.0 / g[g > 0]
    n_active = int(np.sum(g > 0))
    while n_active > 0:
        act = order[:n_active]
        mu = (P + inv[act].sum()) / n_active
        if mu - inv[act].max() > 0:
            break
        n_active -= 1
    out = np.zeros(g.size)
    out[act] = mu - inv[act]
    out[act] *= P / out[act].sum()  # remove rounding drift
    return out


def waterfilling_rate(gains, powers) -> float:
    return float(np.sum(np.log2(1.0 + np.asarray(powers) * np.asarray(gains))))


def upper_bound(H, p: SystemParams):
    """Matched beams with water-filled powers and the interference-free sum-rate.

    Returns ``(BeamformingMatrix, rate)``.
    """
    H = np.asarray(getattr(H, "entries", H))
    K = H.shape[1]
    noise = p.rx_noise() if K == p.n_vehicles else np.full(K, p.noise_rx_w)
    norms2 = np.sum(np.abs(H) ** 2, axis=0)
    gains = norms2 / noise
    powers = waterfilling(gains, p.power_budget_w)
    W = np.zeros_like(H, dtype=complex)
    nz = norms2 > 0
    W[:, nz] = H[:, nz] / np.sqrt(norms2[nz]) * np.sqrt(powers[nz])
    return BeamformingMatrix(W), waterfilling_rate(gains, powers)


@dataclass(frozen=True)
class NaiveNetConfig:
    """Fully connected network on the most recent estimated snapshot only."""

    k_vehicles: int = 3
    n_tx: int = 32
    hidden: tuple = (256, 256)
    input_scale: Optional[float] = None
    output_scale: Optional[float] = None
    tau: int = 1  # history slots consumed (only the last is used)

    def __post_init__(self):
        if self.k_vehicles < 1 or self.n_tx < 1 or any(h < 1 for h in self.hidden):
            raise ValueError("dimensions must be positive")

    @property
    def input_dim(self) -> int:
        return 2 * self.k_vehicles * self.n_tx

    @property
    def output_dim(self) -> int:
        return 2 * self.k_vehicles * self.n_tx

    def with_scale(self, input_scale: float) -> "NaiveNetConfig":
        return dataclasses.replace(self, input_scale=float(input_scale))

    def with_output_scale(self, output_scale: float) -> "NaiveNetConfig":
        return dataclasses.replace(self, output_scale=float(output_scale))

    def build(self) -> "NaiveModel":
        return NaiveModel(self)


def naive_input(history, cfg: NaiveNetConfig = None) -> np.ndarray:
    """``[Re vec(H), Im vec(H)]`` of the last snapshot of ``history``."""
    stack = history.stacked() if hasattr(history, "stacked") else np.asarray(history)
    H = stack[-1] if stack.ndim == 3 else stack
    if cfg is not None and H.shape != (cfg.n_tx, cfg.k_vehicles):
        raise ValueError(f"snapshot shape {H.shape} does not match config "
                         f"{(cfg.n_tx, cfg.k_vehicles)}")
    return np.concatenate([H.real.ravel(), H.imag.ravel()])


class NaiveModel:
    """Adapter used by the training loop."""

    name = "naive"

    def __init__(self, cfg: NaiveNetConfig):
        self.cfg = cfg

    def init_params(self, rng) -> ParameterSet:
        ps = ParameterSet()
        dims = (self.cfg.input_dim,) + tuple(self.cfg.hidden) + (self.cfg.output_dim,)
        for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
            ps.add(f"fc{i}.weight", glorot_uniform(rng, (a, b), a, b))
            ps.add(f"fc{i}.bias", np.zeros(b))
        return ps

    def inputs(self, examples) -> np.ndarray:
        return np.stack([naive_input(ex.history, self.cfg) for ex in examples])

    def raw_scale_source(self, examples) -> np.ndarray:
        return np.stack([ex.history.stacked()[-1] for ex in examples])

    def forward(self, leaves, x) -> Node:
        x = E.const(np.asarray(x, dtype=float) if not isinstance(x, Node) else x)
        if x.ndim != 2 or x.shape[1] != self.cfg.input_dim:
            raise ValueError(f"input {x.shape} does not match (B, {self.cfg.input_dim})")
        if self.cfg.input_scale is not None and self.cfg.input_scale != 1.0:
            x = E.scale(x, self.cfg.input_scale)
        n_layers = len(self.cfg.hidden) + 1
        for i in range(n_layers):
            x = dense(x, leaves[f"fc{i}.weight"], leaves[f"fc{i}.bias"])
            if i < n_layers - 1:
                x = E.relu(x)
        if self.cfg.output_scale is not None and self.cfg.output_scale != 1.0:
            x = E.scale(x, self.cfg.output_scale)
        # output layout [Re vec(W), Im vec(W)] -> (B, Nt, 2K) like the main network
        B, Nt, K = x.shape[0], self.cfg.n_tx, self.cfg.k_vehicles
        re = E.reshape(x[:, :Nt * K], (B, Nt, K))
        im = E.reshape(x[:, Nt * K:], (B, Nt, K))
        return E.concat([re, im], axis=-1)


def naive_train(cfg: NaiveNetConfig, data, hyper=None, epochs: int = 6, seed: int = 0):
    """Same unsupervised loop as the main model; returns ``(params, report)``."""
    from .training import TrainHyper, train
    return train(cfg, data, TrainHyper() if hyper is None else hyper, epochs, seed)


def naive_predict(params: ParameterSet, history, cfg: NaiveNetConfig, p: SystemParams,
                  project: bool = True) -> BeamformingMatrix:
    if cfg.input_scale is None:
        raise ValueError("config has no input scale; use the config returned by training")
    model = cfg.build()
    leaves = {n: E.const(params[n]) for n in params}
    raw = model.forward(leaves, naive_input(history, cfg)[None]).value[0]
    return map_output(raw, project=project, power_budget=p.power_budget_w)


def random_beamformer(p: SystemParams, rng: np.random.Generator, n_tx: int = None,
                      k: int = None) -> BeamformingMatrix:
    """I.i.d. complex Gaussian entries rescaled to ``||W||_F^2 = P`` exactly."""
    n_tx = p.n_tx if n_tx is None else n_tx
    k = p.n_vehicles if k is None else k
    W = (rng.standard_normal((n_tx, k)) + 1j * rng.standard_normal((n_tx, k))) / math.sqrt(2)
    W *= math.sqrt(p.power_budget_w / float(np.sum(np.abs(W) ** 2)))
    return BeamformingMatrix(W)


def random_beamformers(p: SystemParams, rng: np.random.Generator, n: int) -> Sequence:
    return [random_beamformer(p, rng).entries for _ in range(n)]
