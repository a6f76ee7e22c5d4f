"""Independent reference computations shared by the unit and acceptance tests."""

from __future__ import annotations

import numpy as np


def grid_search_rate(gains, power: float, units: int = 1000) -> float:
    """Best ``sum log2(1 + g_k p_k)`` over power splits on a grid of ``power / units``.

    Exact maximisation over the grid by dynamic programming: ``best[u]`` is
    the best rate of the channels seen so far using at most ``u`` grid units.
    """
    step = power / units
    u = np.arange(units + 1)
    best = np.zeros(units + 1)
    for g in np.asarray(gains, dtype=float):
        gain = np.log2(1.0 + g * step * u)
        # new[u] = max_j best[u - j] + gain[j]
        table = np.full((units + 1, units + 1), -np.inf)
        for j in range(units + 1):
            table[j:, j] = best[:units + 1 - j] + gain[j]
        best = table.max(axis=1)
    return float(best[-1])


def random_gain_sets(rng: np.random.Generator, n: int, k_max: int = 4):
    """Gain sets spanning three decades, so weak channels are often switched off."""
    return [10.0 ** rng.uniform(-1.0, 2.0, size=int(rng.integers(1, k_max + 1)))
            for _ in range(n)]
