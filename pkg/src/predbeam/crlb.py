"""Echo SNR, observation-noise variances and closed-form angle/distance CRLBs.

Zero beam gain yields an infinite bound here; the training objective uses a
saturating version instead (see :mod:`predbeam.objective`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .system import SystemParams, reflection_coeff, steering_vector

__all__ = [
    "EchoStatistics",
    "CrlbPair",
    "echo_gain_matrix",
    "echo_snr_all",
    "echo_snr",
    "delay_variance",
    "doppler_variance",
    "dr_dtheta",
    "dr_dtheta_coeffs",
    "crlb_angle",
    "crlb_distance",
    "crlb_all",
    "echo_statistics",
    "observation_mean",
    "numerical_fim_oracle",
    "FD_STEPS",
]

FD_STEPS = (1e-6, 1e-4, 1e-4)


@dataclass(frozen=True)
class EchoStatistics:
    snr: float
    var_delay: float
    var_doppler: float
    var_obs: float
    dr_dtheta: complex

    @property
    def saturated(self) -> bool:
        return not math.isfinite(self.var_delay)


@dataclass(frozen=True)
class CrlbPair:
    crlb_angle: float
    crlb_dist: float

    @property
    def finite(self) -> bool:
        return math.isfinite(self.crlb_angle) and math.isfinite(self.crlb_dist)


def _matrix(x) -> np.ndarray:
    return np.asarray(getattr(x, "entries", x))


def _geometry(states) -> tuple:
    thetas = np.array([s.theta for s in states], dtype=float)
    dists = np.array([s.dist for s in states], dtype=float)
    return thetas, dists


def echo_gain_matrix(thetas: Sequence[float], W, p: SystemParams) -> np.ndarray:
    """``A[k, i] = |a(theta_k)^H w_i|^2`` for all vehicle/beam pairs."""
    W = _matrix(W)
    A = np.stack([steering_vector(t, W.shape[0]) for t in thetas], axis=1)
    return np.abs(A.conj().T @ W) ** 2


def _echo_terms(thetas, dists, W, p):
    gains = echo_gain_matrix(thetas, W, p)
    beta2 = np.array([abs(reflection_coeff(d, p)) ** 2 for d in dists])
    weighted = p.array_gain ** 2 * gains * beta2[None, :]
    signal = np.diag(weighted).copy()
    if not p.echo_interference:
        return signal, np.full_like(signal, p.noise_echo_w)
    interference = weighted.sum(axis=1) - signal
    return signal, interference + p.noise_echo_w


def echo_snr_all(thetas, dists, W, p: SystemParams) -> np.ndarray:
    """Echo SNR per vehicle, other vehicles' echoes counted as noise."""
    signal, noise = _echo_terms(thetas, dists, W, p)
    return signal / noise


def echo_snr(states, W, k: int, p: SystemParams) -> float:
    if not 0 <= k < len(states):
        raise ValueError(f"vehicle index {k} out of range for {len(states)} vehicles")
    thetas, dists = _geometry(states)
    return float(echo_snr_all(thetas, dists, W, p)[k])


def _variance(rho: float, states, W, k: int, p: SystemParams) -> float:
    if not 0 <= k < len(states):
        raise ValueError(f"vehicle index {k} out of range for {len(states)} vehicles")
    thetas, dists = _geometry(states)
    signal, noise = _echo_terms(thetas, dists, W, p)
    if signal[k] == 0.0:
        return math.inf
    return float(rho ** 2 * noise[k] / signal[k])


def delay_variance(states, W, k: int, p: SystemParams) -> float:
    """Delay-estimate variance ``rho_nu^2 / SNR`` (s^2); ``inf`` with no signal."""
    return _variance(p.delay_const, states, W, k, p)


def doppler_variance(states, W, k: int, p: SystemParams) -> float:
    return _variance(p.rho_doppler, states, W, k, p)


def dr_dtheta_coeffs(theta: float, beta: complex, p: SystemParams, n_tx: int = None) -> np.ndarray:
    """Complex weights ``c`` such that the observation derivative is ``sum(c * w)``."""
    n = p.n_tx if n_tx is None else n_tx
    m = np.arange(n)
    return (-math.sqrt(p.n_rx) * beta * p.mf_gain * 1j * np.pi * m * math.sin(theta)
            * np.exp(1j * np.pi * m * math.cos(theta)))


def dr_dtheta(theta: float, beta: complex, w, p: SystemParams) -> complex:
    """Derivative of the matched-filter output w.r.t. the vehicle angle."""
    w = np.asarray(w)
    if w.shape[0] < 2:
        raise ValueError("need at least two transmit antennas")
    return complex(np.sum(dr_dtheta_coeffs(theta, beta, p, w.shape[0]) * w))


def crlb_angle(theta: float, beta: complex, w, p: SystemParams) -> float:
    g = abs(dr_dtheta(theta, beta, w, p)) ** 2
    return math.inf if g == 0.0 else p.sigma_r2 / g


def crlb_distance(states, W, k: int, p: SystemParams) -> float:
    return delay_variance(states, W, k, p) * p.wave_speed_mps ** 2 / 4.0


def crlb_all(thetas, dists, W, p: SystemParams) -> tuple:
    """Exact per-vehicle ``(crlb_angle, crlb_dist)`` arrays; ``inf`` where undefined."""
    W = _matrix(W)
    thetas = np.asarray(thetas, dtype=float)
    dists = np.asarray(dists, dtype=float)
    ang = np.array([crlb_angle(t, reflection_coeff(d, p), W[:, k], p)
                    for k, (t, d) in enumerate(zip(thetas, dists))])
    signal, noise = _echo_terms(thetas, dists, W, p)
    with np.errstate(divide="ignore"):
        var_nu = np.where(signal > 0, p.delay_const ** 2 * noise / np.where(signal > 0, signal, 1.0),
                          np.inf)
    return ang, var_nu * p.wave_speed_mps ** 2 / 4.0


def echo_statistics(states, W, k: int, p: SystemParams) -> EchoStatistics:
    W = _matrix(W)
    s = states[k]
    return EchoStatistics(
        snr=echo_snr(states, W, k, p),
        var_delay=delay_variance(states, W, k, p),
        var_doppler=doppler_variance(states, W, k, p),
        var_obs=p.sigma_r2,
        dr_dtheta=dr_dtheta(s.theta, reflection_coeff(s.dist, p), W[:, k], p),
    )


def observation_mean(x, beta: complex, w, p: SystemParams) -> np.ndarray:
    """Noise-free observation ``[r, delay, doppler]`` for motion parameters ``x``.

    ``x = (theta, d, radial_speed)``.  The reflection coefficient is held at
    the true-distance value, so only the first entry depends on the angle.
    """
    theta, d, vr = x
    w = np.asarray(w)
    a = steering_vector(theta, w.shape[0])
    r = math.sqrt(w.shape[0] * p.n_rx) * beta * p.mf_gain * np.vdot(a, w)
    return np.array([r, 2.0 * d / p.wave_speed_mps,
                     2.0 * vr * p.carrier_hz / p.wave_speed_mps], dtype=complex)


def numerical_fim_oracle(x, W, p: SystemParams, k: int, states, steps=FD_STEPS) -> np.ndarray:
    """3x3 Fisher information of ``(theta, d, radial_speed)`` by central differences.

    Independent of the closed forms: the Jacobian of :func:`observation_mean`
    is differenced numerically and combined with the diagonal noise
    covariance evaluated at ``states``.
    """
    W = _matrix(W)
    x = np.asarray(x, dtype=float)
    beta = reflection_coeff(float(x[1]), p)
    sigma = np.array([p.sigma_r2, delay_variance(states, W, k, p),
                      doppler_variance(states, W, k, p)])
    if not np.all(np.isfinite(sigma)) or np.any(sigma <= 0):
        raise ValueError(f"singular observation covariance {sigma}")
    J = np.empty((3, 3), dtype=complex)
    for j in range(3):
        dx = np.zeros(3)
        dx[j] = steps[j]
        J[:, j] = (observation_mean(x + dx, beta, W[:, k], p)
                   - observation_mean(x - dx, beta, W[:, k], p)) / (2.0 * steps[j])
    return np.real(J.conj().T @ np.diag(1.0 / sigma) @ J)
