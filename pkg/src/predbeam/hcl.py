"""Historical-channel convolutional LSTM beamforming network.

Per history slot, each vehicle's ``Nt x 1 x 2`` channel image runs through
its own conv/ReLU/max-pool/flatten stack; the K feature vectors are
concatenated and fed to one LSTM cell shared over the ``tau`` slots.  The
final hidden state goes through a linear head producing ``[Re W, Im W]``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .nn import engine as E
from .nn.engine import Node
from .nn.layers import GATES, conv2d, dense, glorot_uniform, lstm_cell, maxpool2d
from .nn.params import ParameterSet
from .system import BeamformingMatrix

__all__ = ["HclConfig", "map_input", "unmap_input", "map_output", "project_power",
           "init_params", "forward", "forward_graph", "HclModel"]


@dataclass(frozen=True)
class HclConfig:
    """Network dimensions.

    ``pool`` is ``(size, stride)`` along the antenna axis.  ``input_scale``
    multiplies the raw channel entries before the first convolution (raw
    entries are ~1e-5); ``None`` means "derive from training data".
    ``output_scale`` multiplies the linear head; ``None`` means "per-entry
    amplitude of a full-budget beam", ``sqrt(P / (Nt K))``, fixed at training.
    """

    tau: int = 6
    k_vehicles: int = 3
    n_tx: int = 32
    conv_filters: int = 4
    conv_kernel: tuple = (3, 3)
    pool: tuple = (4, 4)
    lstm_hidden: int = 64
    input_scale: Optional[float] = None
    output_scale: Optional[float] = None

    def __post_init__(self):
        for name in ("tau", "k_vehicles", "n_tx", "conv_filters", "lstm_hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.pool[0] > self.n_tx:
            raise ValueError(f"pool size {self.pool[0]} exceeds {self.n_tx} antennas")

    @property
    def pooled_len(self) -> int:
        size, stride = self.pool
        return (self.n_tx - size) // stride + 1

    @property
    def flatten_dim(self) -> int:
        return self.pooled_len * self.conv_filters

    @property
    def concat_dim(self) -> int:
        return self.k_vehicles * self.flatten_dim

    @property
    def output_dim(self) -> int:
        return self.n_tx * 2 * self.k_vehicles

    def with_scale(self, input_scale: float) -> "HclConfig":
        return dataclasses.replace(self, input_scale=float(input_scale))

    def with_output_scale(self, output_scale: float) -> "HclConfig":
        return dataclasses.replace(self, output_scale=float(output_scale))

    def build(self) -> "HclModel":
        return HclModel(self)


def map_input(history, cfg: HclConfig = None) -> np.ndarray:
    """``(tau, K, Nt, 2)`` real array: [..., 0] real part, [..., 1] imaginary part."""
    stack = history.stacked() if hasattr(history, "stacked") else np.asarray(history)
    if stack.ndim != 3:
        raise ValueError(f"history must be (tau, Nt, K), got {stack.shape}")
    if cfg is not None and stack.shape != (cfg.tau, cfg.n_tx, cfg.k_vehicles):
        raise ValueError(f"history shape {stack.shape} does not match config "
                         f"{(cfg.tau, cfg.n_tx, cfg.k_vehicles)}")
    per_vehicle = np.swapaxes(stack, 1, 2)  # tau, K, Nt
    return np.stack([per_vehicle.real, per_vehicle.imag], axis=-1)


def unmap_input(x: np.ndarray) -> np.ndarray:
    """Inverse of :func:`map_input`: back to a ``(tau, Nt, K)`` complex stack."""
    return np.swapaxes(x[..., 0] + 1j * x[..., 1], 1, 2)


def map_output(raw: np.ndarray, cfg: HclConfig = None, project: bool = False,
               power_budget: float = None) -> BeamformingMatrix:
    """Column k of W is ``raw[:, k] + j raw[:, K + k]``."""
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2 or raw.shape[1] % 2:
        raise ValueError(f"raw output must be (Nt, 2K), got {raw.shape}")
    if cfg is not None and raw.shape != (cfg.n_tx, 2 * cfg.k_vehicles):
        raise ValueError(f"raw output {raw.shape} does not match config")
    K = raw.shape[1] // 2
    W = raw[:, :K] + 1j * raw[:, K:]
    if project:
        W = project_power(W, power_budget)
    return BeamformingMatrix(W)


def project_power(W: np.ndarray, power_budget: float) -> np.ndarray:
    """Scale ``W`` onto the power budget when it exceeds it; leave it alone otherwise."""
    power = float(np.sum(np.abs(W) ** 2))
    if power > power_budget:
        W = W * np.sqrt(power_budget / power)
        # rounding can leave the rescaled power an ulp above the budget
        while float(np.sum(np.abs(W) ** 2)) > power_budget:
            W = W * (1.0 - 2.0 ** -52)
    return W


def init_params(cfg: HclConfig, rng: np.random.Generator) -> ParameterSet:
    """Glorot-uniform kernels, zero biases except a forget-gate bias of 1."""
    ps = ParameterSet()
    kh, kw = cfg.conv_kernel
    F = cfg.conv_filters
    for k in range(cfg.k_vehicles):
        ps.add(f"cnn{k}.kernel", glorot_uniform(rng, (F, kh, kw, 2), kh * kw * 2, kh * kw * F))
        ps.add(f"cnn{k}.bias", np.zeros(F))
    d_in = cfg.concat_dim + cfg.lstm_hidden
    for g in GATES:
        ps.add(f"lstm.W_{g}", glorot_uniform(rng, (d_in, cfg.lstm_hidden), d_in, cfg.lstm_hidden))
        ps.add(f"lstm.b_{g}", np.ones(cfg.lstm_hidden) if g == "f" else np.zeros(cfg.lstm_hidden))
    ps.add("out.weight", glorot_uniform(rng, (cfg.lstm_hidden, cfg.output_dim),
                                        cfg.lstm_hidden, cfg.output_dim))
    ps.add("out.bias", np.zeros(cfg.output_dim))
    return ps


def forward_graph(x, leaves: dict, cfg: HclConfig, taps: dict = None) -> Node:
    """Batched forward pass on a ``(B, tau, K, Nt, 2)`` input; returns ``(B, Nt, 2K)``.

    When ``taps`` is a dict, the concatenated per-slot feature vectors are
    appended to ``taps["concat"]``.
    """
    x = E.const(x)
    if x.ndim != 5 or x.shape[1:] != (cfg.tau, cfg.k_vehicles, cfg.n_tx, 2):
        raise ValueError(f"input {x.shape} does not match config "
                         f"(B, {cfg.tau}, {cfg.k_vehicles}, {cfg.n_tx}, 2)")
    if cfg.input_scale is not None and cfg.input_scale != 1.0:
        x = E.scale(x, cfg.input_scale)
    B = x.shape[0]
    size, stride = cfg.pool
    lstm = {g: leaves[f"lstm.{g}"] for g in ("W_i", "W_f", "W_o", "W_g", "b_i", "b_f", "b_o", "b_g")}
    h = E.const(np.zeros((B, cfg.lstm_hidden)))
    c = E.const(np.zeros((B, cfg.lstm_hidden)))
    for step in range(cfg.tau):
        feats = []
        for k in range(cfg.k_vehicles):
            img = E.reshape(x[:, step, k], (B, cfg.n_tx, 1, 2))
            y = E.relu(conv2d(img, leaves[f"cnn{k}.kernel"], leaves[f"cnn{k}.bias"], "same", 1))
            y = maxpool2d(y, size, 1, stride, 1)
            feats.append(E.reshape(y, (B, cfg.flatten_dim)))
        z = E.concat(feats, axis=-1)
        if taps is not None:
            taps.setdefault("concat", []).append(z.value.copy())
        h, c = lstm_cell(z, h, c, lstm)
    out = dense(h, leaves["out.weight"], leaves["out.bias"])
    if cfg.output_scale is not None and cfg.output_scale != 1.0:
        out = E.scale(out, cfg.output_scale)
    return E.reshape(out, (B, cfg.n_tx, 2 * cfg.k_vehicles))


def forward(x: np.ndarray, params: ParameterSet, cfg: HclConfig, taps: dict = None) -> np.ndarray:
    """Numpy forward pass; accepts one ``(tau, K, Nt, 2)`` input or a batch of them."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 4
    leaves = {n: E.const(params[n]) for n in params}
    out = forward_graph(x[None] if single else x, leaves, cfg, taps).value
    return out[0] if single else out


class HclModel:
    """Adapter used by the training loop."""

    name = "hcl"

    def __init__(self, cfg: HclConfig):
        self.cfg = cfg

    def init_params(self, rng):
        return init_params(self.cfg, rng)

    def inputs(self, examples) -> np.ndarray:
        return np.stack([map_input(ex.history, self.cfg) for ex in examples])

    def raw_scale_source(self, examples) -> np.ndarray:
        return np.stack([ex.history.stacked() for ex in examples])

    def forward(self, leaves, x) -> Node:
        return forward_graph(x, leaves, self.cfg)
