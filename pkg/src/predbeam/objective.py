"""Penalty-transformed sum-rate objective over a batch of examples.

The batch cost is

    mean_i sum_k log2(1 + SINR_ik)
      - lam1 * ramp(mean_ik CRLB_theta - gamma_theta)^2
      - lam2 * ramp(mean_ik CRLB_d - gamma_d)^2
      - lam3 * mean_i ramp(||W_i||_F^2 - P)^2

The CRLB hinges act on batch means while the power hinge is averaged per
example.  Complex quantities are carried as (real, imag) pairs so the whole
expression stays differentiable by :mod:`predbeam.nn`.  CRLBs saturate
smoothly at ``crlb_cap``: ``num / (den + num / cap)``, which equals the cap
exactly when the beam carries no energy toward the vehicle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .crlb import dr_dtheta_coeffs
from .nn import engine as E
from .nn.engine import Node
from .system import SystemParams, reflection_coeff

__all__ = ["PenaltyBreakdown", "BatchTargets", "make_targets", "objective_graph",
           "batch_objective", "feasibility_report", "example_parts"]


@dataclass(frozen=True)
class PenaltyBreakdown:
    sum_rate_term: float
    angle_penalty: float
    dist_penalty: float
    power_penalty: float
    total: float
    mean_crlb_angle: float
    mean_crlb_dist: float
    power_used_w: float


@dataclass(frozen=True)
class BatchTargets:
    """Constant tensors for one batch, all shaped ``(B, Nt, K)`` unless noted."""

    h_re: np.ndarray
    h_im: np.ndarray
    dr_re: np.ndarray
    dr_im: np.ndarray
    a_re: np.ndarray
    a_im: np.ndarray
    beta2: np.ndarray  # (B, K)


def example_parts(ex):
    """``(H, thetas, dists)`` from an example object or a ``(snapshot, states)`` pair."""
    if hasattr(ex, "channel") and hasattr(ex, "states"):
        snap, states = ex.channel, ex.states
    else:
        snap, states = ex
    H = np.asarray(getattr(snap, "entries", snap))
    thetas = np.array([s.theta for s in states], dtype=float)
    dists = np.array([s.dist for s in states], dtype=float)
    return H, thetas, dists


def make_targets(channels: np.ndarray, thetas: np.ndarray, dists: np.ndarray,
                 p: SystemParams) -> BatchTargets:
    """Precompute channel, angle-derivative and steering constants for a batch.

    ``channels`` is ``(B, Nt, K)`` complex; ``thetas``/``dists`` are ``(B, K)``.
    """
    B, Nt, K = channels.shape
    dr = np.empty((B, Nt, K), dtype=complex)
    a = np.empty((B, Nt, K), dtype=complex)
    beta2 = np.empty((B, K))
    m = np.arange(Nt)
    for b in range(B):
        for k in range(K):
            beta = reflection_coeff(dists[b, k], p)
            beta2[b, k] = abs(beta) ** 2
            dr[b, :, k] = dr_dtheta_coeffs(thetas[b, k], beta, p, Nt)
            a[b, :, k] = np.exp(-1j * np.pi * m * math.cos(thetas[b, k])) / math.sqrt(Nt)
    return BatchTargets(channels.real.copy(), channels.imag.copy(), dr.real, dr.imag,
                        a.real, a.imag, beta2)


def _gram_power(v_re: np.ndarray, v_im: np.ndarray, w_re: Node, w_im: Node) -> Node:
    """``|v_k^H w_j|^2`` for every pair, shape ``(B, K, K)``."""
    vt_re = np.swapaxes(v_re, -1, -2)
    vt_im = np.swapaxes(v_im, -1, -2)
    s_re = E.add(E.matmul(vt_re, w_re), E.matmul(vt_im, w_im))
    s_im = E.sub(E.matmul(vt_re, w_im), E.matmul(vt_im, w_re))
    return E.add(E.square(s_re), E.square(s_im))


def objective_graph(w_re: Node, w_im: Node, t: BatchTargets, p: SystemParams) -> dict:
    """Build every objective term as graph nodes.

    ``w_re``/``w_im`` are ``(B, Nt, K)``.  Returns a dict with scalar nodes
    ``rate``, ``angle_penalty``, ``dist_penalty``, ``power_penalty``,
    ``total``, ``cost`` (= -total), ``mean_crlb_angle``, ``mean_crlb_dist``
    and per-example ``power`` of shape ``(B,)``.
    """
    K = t.h_re.shape[-1]
    eye = np.eye(K)
    noise = p.rx_noise() if K == p.n_vehicles else np.full(K, p.noise_rx_w)

    gains = _gram_power(t.h_re, t.h_im, w_re, w_im)
    signal = E.sum(E.mul(gains, eye), axis=-1)
    interference = E.sub(E.sum(gains, axis=-1), signal)
    sinr = E.div(signal, E.add(interference, noise))
    rate = E.mean(E.sum(E.log2(E.add(sinr, 1.0)), axis=-1))

    cap = p.crlb_cap
    dr_re = E.sum(E.sub(E.mul(t.dr_re, w_re), E.mul(t.dr_im, w_im)), axis=-2)
    dr_im = E.sum(E.add(E.mul(t.dr_re, w_im), E.mul(t.dr_im, w_re)), axis=-2)
    dr2 = E.add(E.square(dr_re), E.square(dr_im))
    crlb_theta = E.div(p.sigma_r2, E.add(dr2, p.sigma_r2 / cap))

    echo = E.mul(_gram_power(t.a_re, t.a_im, w_re, w_im),
                 (p.array_gain ** 2) * t.beta2[:, None, :])
    echo_sig = E.sum(E.mul(echo, eye), axis=-1)
    if p.echo_interference:
        echo_noise = E.add(E.sub(E.sum(echo, axis=-1), echo_sig), p.noise_echo_w)
    else:
        echo_noise = E.add(E.scale(echo_sig, 0.0), p.noise_echo_w)
    num = E.scale(echo_noise, p.delay_const ** 2 * p.wave_speed_mps ** 2 / 4.0)
    crlb_d = E.div(num, E.add(echo_sig, E.scale(num, 1.0 / cap)))

    mean_theta = E.mean(crlb_theta)
    mean_d = E.mean(crlb_d)
    angle_pen = E.scale(E.square(E.ramp(E.sub(mean_theta, p.crlb_angle_max))), p.penalty_angle)
    dist_pen = E.scale(E.square(E.ramp(E.sub(mean_d, p.crlb_dist_max))), p.penalty_dist)
    power = E.sum(E.add(E.square(w_re), E.square(w_im)), axis=(-2, -1))
    power_pen = E.scale(E.mean(E.square(E.ramp(E.sub(power, p.power_budget_w)))),
                        p.penalty_power)
    total = E.sub(rate, E.add(E.add(angle_pen, dist_pen), power_pen))
    return {
        "rate": rate, "angle_penalty": angle_pen, "dist_penalty": dist_pen,
        "power_penalty": power_pen, "total": total, "cost": E.neg(total),
        "mean_crlb_angle": mean_theta, "mean_crlb_dist": mean_d, "power": power,
        "crlb_theta": crlb_theta, "crlb_dist": crlb_d,
    }


def breakdown(terms: dict) -> PenaltyBreakdown:
    return PenaltyBreakdown(
        sum_rate_term=float(terms["rate"].value),
        angle_penalty=float(terms["angle_penalty"].value),
        dist_penalty=float(terms["dist_penalty"].value),
        power_penalty=float(terms["power_penalty"].value),
        total=float(terms["total"].value),
        mean_crlb_angle=float(terms["mean_crlb_angle"].value),
        mean_crlb_dist=float(terms["mean_crlb_dist"].value),
        power_used_w=float(np.mean(terms["power"].value)),
    )


def _stack(examples, Ws):
    if len(examples) == 0:
        raise ValueError("empty batch")
    if len(Ws) != len(examples):
        raise ValueError(f"{len(examples)} examples but {len(Ws)} beamformers")
    parts = [example_parts(ex) for ex in examples]
    H = np.stack([pt[0] for pt in parts])
    th = np.stack([pt[1] for pt in parts])
    ds = np.stack([pt[2] for pt in parts])
    W = np.stack([np.asarray(getattr(w, "entries", w)) for w in Ws])
    if W.shape != H.shape:
        raise ValueError(f"beamformer shape {W.shape[1:]} does not match channel {H.shape[1:]}")
    return H, th, ds, W


def batch_objective(examples: Sequence, Ws: Sequence, p: SystemParams) -> PenaltyBreakdown:
    """Evaluate the penalised objective for fixed beamformers."""
    H, th, ds, W = _stack(examples, Ws)
    terms = objective_graph(E.const(W.real), E.const(W.imag), make_targets(H, th, ds, p), p)
    return breakdown(terms)


def feasibility_report(W, example, p: SystemParams) -> tuple:
    """Slacks ``(gamma_theta - CRLB_theta, gamma_d - CRLB_d, P - ||W||^2)``.

    CRLBs are the per-vehicle means with the saturating cap applied; a
    nonnegative slack means the constraint holds.
    """
    H, th, ds, Wm = _stack([example], [W])
    terms = objective_graph(E.const(Wm.real), E.const(Wm.imag), make_targets(H, th, ds, p), p)
    return (p.crlb_angle_max - float(terms["mean_crlb_angle"].value),
            p.crlb_dist_max - float(terms["mean_crlb_dist"].value),
            p.power_budget_w - float(terms["power"].value[0]))
