"""Vehicle trajectories on a straight road and noisy channel histories.

Geometry: the roadside unit sits at the origin with its array along the
x-axis, vehicles drive parallel to it (towards -x).  ``theta`` is the angle
between the line of sight and the array axis, so ``cos(theta) = x / d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .system import ChannelSnapshot, SystemParams, channel_matrix

__all__ = [
    "KinematicsError",
    "VehicleState",
    "TrajectoryWindow",
    "EstimatedHistory",
    "state_from_position",
    "radial_velocity",
    "advance",
    "step",
    "init_scenario",
    "simulate_window",
    "perturb_history",
    "recursion_residual",
    "DEFAULT_MEAN_POSITIONS",
]

DEFAULT_MEAN_POSITIONS = ((15.0, 20.0), (25.0, 20.0), (35.0, 20.0))

# arcsin arguments this far outside [-1, 1] are rounding, anything beyond is a bug
_ASIN_TOL = 1e-12


class KinematicsError(ArithmeticError):
    pass


@dataclass(frozen=True)
class VehicleState:
    theta: float
    dist: float
    speed: float
    radial_speed: float
    pos_xy: tuple


@dataclass
class TrajectoryWindow:
    """True states for slots ``n - tau .. n`` (row ``tau`` is the current slot)."""

    states: List[List[VehicleState]]
    params: SystemParams

    def array(self, name: str) -> np.ndarray:
        """Field ``name`` of every state as a ``(tau + 1, K)`` array."""
        return np.array([[getattr(s, name) for s in row] for row in self.states], dtype=float)

    @property
    def current(self) -> List[VehicleState]:
        return self.states[-1]


@dataclass
class EstimatedHistory:
    """Channels rebuilt from perturbed motion parameters, oldest slot first."""

    snapshots: List[ChannelSnapshot]
    nmse_applied: float
    thetas: np.ndarray  # (tau, K) perturbed angles
    dists: np.ndarray  # (tau, K) perturbed distances

    def stacked(self) -> np.ndarray:
        """``(tau, Nt, K)`` complex array of the snapshots."""
        return np.stack([s.entries for s in self.snapshots])


def radial_velocity(s: VehicleState) -> float:
    """Line-of-sight projection ``v * cos(theta)``; positive while closing in."""
    return s.speed * math.cos(s.theta)


def state_from_position(x: float, y: float, speed: float) -> VehicleState:
    d = math.hypot(x, y)
    if d == 0.0 or y == 0.0:
        raise ValueError(f"vehicle position ({x}, {y}) lies on the array axis")
    theta = math.atan2(abs(y), x)
    return VehicleState(theta, d, speed, speed * math.cos(theta), (float(x), float(y)))


def advance(s: VehicleState, v: float, dt: float) -> VehicleState:
    """Move ``s`` by ``v * dt`` along the road using the law-of-cosines recursion.

    The new speed is ``s.speed``; callers that redraw speeds replace it.
    """
    step_len = v * dt
    d2 = s.dist ** 2 + step_len ** 2 - 2.0 * s.dist * step_len * math.cos(s.theta)
    d_new = math.sqrt(max(d2, 0.0))
    if d_new == 0.0:
        raise KinematicsError("vehicle reached the array position")
    arg = step_len * math.sin(s.theta) / d_new
    if abs(arg) > 1.0 + _ASIN_TOL:
        raise KinematicsError(f"arcsin argument {arg!r} outside [-1, 1]")
    theta_new = s.theta + math.asin(min(1.0, max(-1.0, arg)))
    x, y = s.pos_xy
    return VehicleState(theta_new, d_new, s.speed, s.speed * math.cos(theta_new),
                        (x - step_len, y))


def step(s: VehicleState, p: SystemParams, rng: np.random.Generator) -> VehicleState:
    """One slot of motion: travel at the previous speed, then redraw the speed."""
    moved = advance(s, s.speed, p.slot_s)
    v_new = float(rng.uniform(p.speed_min_mps, p.speed_max_mps))
    return VehicleState(moved.theta, moved.dist, v_new, v_new * math.cos(moved.theta),
                        moved.pos_xy)


def init_scenario(p: SystemParams, mean_positions: Sequence[Sequence[float]],
                  rng: np.random.Generator, jitter_std: float = 1.0) -> List[VehicleState]:
    """Initial states at ``mean + N(0, jitter_std^2)`` per axis with uniform speeds."""
    if len(mean_positions) < p.n_vehicles:
        raise ValueError(f"{len(mean_positions)} mean positions for {p.n_vehicles} vehicles")
    states = []
    for mx, my in mean_positions[: p.n_vehicles]:
        if my == 0:
            raise ValueError("mean position on the array axis (y = 0)")
        dx, dy = rng.standard_normal(2) * jitter_std
        v = float(rng.uniform(p.speed_min_mps, p.speed_max_mps))
        states.append(state_from_position(mx + dx, my + dy, v))
    return states


def simulate_window(p: SystemParams, mean_positions, rng: np.random.Generator,
                    jitter_std: float = 1.0) -> TrajectoryWindow:
    rows = [init_scenario(p, mean_positions, rng, jitter_std)]
    for _ in range(p.history_len):
        rows.append([step(s, p, rng) for s in rows[-1]])
    return TrajectoryWindow(rows, p)


def recursion_residual(prev: VehicleState, nxt: VehicleState, dt: float) -> float:
    """Largest relative residual of the two kinematic equations between slots."""
    vdt = prev.speed * dt
    r1 = math.sin(nxt.theta - prev.theta) * nxt.dist - vdt * math.sin(prev.theta)
    r2 = nxt.dist ** 2 - (prev.dist ** 2 + vdt ** 2 - 2 * prev.dist * vdt * math.cos(prev.theta))
    return max(abs(r1) / prev.dist, abs(r2) / prev.dist ** 2)


def perturb_history(w: TrajectoryWindow, p: SystemParams,
                    rng: np.random.Generator) -> EstimatedHistory:
    """Multiplicative Gaussian errors of variance ``history_nmse`` on (theta, d).

    Only slots ``n - tau .. n - 1`` are used; the current slot stays hidden.
    """
    tau = len(w.states) - 1
    thetas = w.array("theta")[:tau]
    dists = w.array("dist")[:tau]
    std = math.sqrt(p.history_nmse)
    e = rng.standard_normal((2,) + thetas.shape) * std
    th = thetas * (1.0 + e[0])
    # keep the distance physical even for absurd nmse values
    ds = np.maximum(dists * (1.0 + e[1]), 1e-3 * dists)
    snaps = [ChannelSnapshot(channel_matrix(th[l], ds[l], p), slot_index=l - tau)
             for l in range(tau)]
    return EstimatedHistory(snaps, p.history_nmse, th, ds)
