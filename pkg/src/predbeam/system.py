"""Physical constants, ULA steering vectors, LoS channels, SINR and sum-rate.

All powers are held in watts internally; dBm only appears at the
configuration boundary (see :func:`dbm_to_w`).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "SystemParams",
    "ChannelSnapshot",
    "BeamformingMatrix",
    "dbm_to_w",
    "w_to_dbm",
    "db_to_lin",
    "lin_to_db",
    "steering_vector",
    "path_loss",
    "reflection_coeff",
    "channel_vector",
    "channel_matrix",
    "sinr",
    "sinr_all",
    "sum_rate",
]

SPEED_OF_LIGHT = 2.998e8


def dbm_to_w(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def w_to_dbm(p_w: float) -> float:
    return 10.0 * math.log10(p_w) + 30.0


def db_to_lin(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def lin_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class SystemParams:
    """Immutable bundle of every physical and algorithmic constant.

    Defaults follow the simulation settings of the reference scenario:
    32x32 ULA at 30 GHz, three vehicles, -80 dBm noise, 30 dBm budget.
    ``echo_obs_var_w`` defaults to ``mf_gain * noise_echo_w`` and
    ``doppler_const`` to ``delay_const`` when left as ``None``.
    ``echo_interference=False`` models ideal cancellation of the other
    vehicles' echoes, leaving only receiver noise in the echo SNR.
    """

    n_tx: int = 32
    n_rx: int = 32
    n_vehicles: int = 3
    carrier_hz: float = 30e9
    wave_speed_mps: float = SPEED_OF_LIGHT
    slot_s: float = 0.02
    pathloss_exp: float = 2.55
    pathloss_ref: float = 1e-7
    ref_dist_m: float = 1.0
    rcs_coeff: complex = 10 + 10j
    noise_echo_w: float = 1e-11
    noise_rx_w: float = 1e-11
    mf_gain: float = 10.0
    delay_const: float = 2.0e-6
    doppler_const: Optional[float] = None
    echo_obs_var_w: Optional[float] = None
    power_budget_w: float = 1.0
    crlb_angle_max: float = 0.01
    crlb_dist_max: float = 0.01
    penalty_angle: float = 1e3
    penalty_dist: float = 1e3
    penalty_power: float = 1e3
    history_len: int = 6
    history_nmse: float = 0.01
    speed_min_mps: float = 8.0
    speed_max_mps: float = 8.25
    crlb_cap: float = 1e6
    echo_interference: bool = True
    noise_rx_per_vehicle: Optional[tuple] = field(default=None)

    def __post_init__(self):
        for name in ("n_tx", "n_rx", "n_vehicles", "history_len"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if self.n_tx < 2:
            raise ValueError("n_tx must be at least 2")
        for name in ("carrier_hz", "wave_speed_mps", "slot_s", "pathloss_exp",
                     "pathloss_ref", "ref_dist_m", "noise_echo_w", "noise_rx_w",
                     "mf_gain", "delay_const", "power_budget_w",
                     "crlb_angle_max", "crlb_dist_max", "crlb_cap"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")
        for name in ("doppler_const", "echo_obs_var_w"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")
        for name in ("penalty_angle", "penalty_dist", "penalty_power", "history_nmse"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")
        if self.speed_min_mps > self.speed_max_mps:
            raise ValueError("speed_min_mps exceeds speed_max_mps")
        if self.noise_rx_per_vehicle is not None:
            nv = tuple(float(x) for x in self.noise_rx_per_vehicle)
            if len(nv) != self.n_vehicles or min(nv) <= 0:
                raise ValueError("noise_rx_per_vehicle needs n_vehicles positive entries")
            object.__setattr__(self, "noise_rx_per_vehicle", nv)

    @property
    def rho_doppler(self) -> float:
        return self.delay_const if self.doppler_const is None else self.doppler_const

    @property
    def sigma_r2(self) -> float:
        """Variance of the matched-filter angle observation noise."""
        if self.echo_obs_var_w is None:
            return self.mf_gain * self.noise_echo_w
        return self.echo_obs_var_w

    @property
    def array_gain(self) -> float:
        return math.sqrt(self.n_tx * self.n_rx)

    def rx_noise(self) -> np.ndarray:
        """Per-vehicle receiver noise variances, shape ``(n_vehicles,)``."""
        if self.noise_rx_per_vehicle is not None:
            return np.asarray(self.noise_rx_per_vehicle, dtype=float)
        return np.full(self.n_vehicles, self.noise_rx_w)

    def replace(self, **changes) -> "SystemParams":
        if "n_vehicles" in changes and "noise_rx_per_vehicle" not in changes:
            changes["noise_rx_per_vehicle"] = None
        return dataclasses.replace(self, **changes)


@dataclass
class ChannelSnapshot:
    """Complex ``n_tx x n_vehicles`` channel; column k is vehicle k."""

    entries: np.ndarray
    slot_index: int = 0


@dataclass
class BeamformingMatrix:
    """Complex ``n_tx x n_vehicles`` precoder; column k serves vehicle k."""

    entries: np.ndarray

    @property
    def power_used_w(self) -> float:
        return float(np.sum(np.abs(self.entries) ** 2))


def _matrix(x) -> np.ndarray:
    return np.asarray(getattr(x, "entries", x))


def steering_vector(theta: float, n: int) -> np.ndarray:
    """Unit-norm ULA response ``(1/sqrt(n)) exp(-j pi m cos theta)``, m = 0..n-1."""
    if n is None or int(n) != n or n < 1:
        raise ValueError(f"array size must be a positive integer, got {n!r}")
    if not np.isfinite(theta):
        raise ValueError(f"theta must be finite, got {theta!r}")
    m = np.arange(int(n))
    return np.exp(-1j * np.pi * m * np.cos(theta)) / np.sqrt(n)


def path_loss(d: float, p: SystemParams) -> float:
    """Large-scale gain ``alpha0 * (d / d0) ** -zeta`` (linear)."""
    if not d > 0:
        raise ValueError(f"distance must be > 0, got {d!r}")
    return p.pathloss_ref * (d / p.ref_dist_m) ** (-p.pathloss_exp)


def reflection_coeff(d: float, p: SystemParams) -> complex:
    if not d > 0:
        raise ValueError(f"distance must be > 0, got {d!r}")
    return complex(p.rcs_coeff) / (2.0 * d)


def channel_vector(theta: float, d: float, p: SystemParams) -> np.ndarray:
    """Equivalent LoS downlink channel ``sqrt(Nt * alpha(d)) * a(theta)``."""
    return math.sqrt(p.n_tx * path_loss(d, p)) * steering_vector(theta, p.n_tx)


def channel_matrix(thetas: Sequence[float], dists: Sequence[float],
                   p: SystemParams) -> np.ndarray:
    """Stack :func:`channel_vector` columns into an ``Nt x K`` matrix."""
    cols = [channel_vector(t, d, p) for t, d in zip(thetas, dists)]
    return np.stack(cols, axis=1)


def sinr_all(H, W, p: SystemParams) -> np.ndarray:
    """SINR of every vehicle at once; interference from other users' beams is noise."""
    H = _matrix(H)
    W = _matrix(W)
    if H.shape != W.shape or H.ndim != 2:
        raise ValueError(f"channel shape {H.shape} and beamformer shape {W.shape} disagree")
    noise = p.rx_noise() if H.shape[1] == p.n_vehicles else np.full(H.shape[1], p.noise_rx_w)
    gains = np.abs(H.conj().T @ W) ** 2  # [k, k'] = |h_k^H w_k'|^2
    signal = np.diag(gains)
    interference = gains.sum(axis=1) - signal
    return signal / (interference + noise)


def sinr(H, W, k: int, p: SystemParams) -> float:
    H = _matrix(H)
    if not 0 <= k < H.shape[1]:
        raise ValueError(f"vehicle index {k} out of range for {H.shape[1]} vehicles")
    return float(sinr_all(H, W, p)[k])


def sum_rate(H, W, p: SystemParams) -> float:
    """Sum of ``log2(1 + SINR_k)`` over vehicles, bits/s/Hz."""
    return float(np.sum(np.log2(1.0 + sinr_all(H, W, p))))
