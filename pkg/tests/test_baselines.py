import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from predbeam.baselines import (NaiveNetConfig, naive_input, naive_predict, naive_train,
                                random_beamformer, random_beamformers, upper_bound,
                                waterfilling, waterfilling_rate)
from predbeam.nn import engine as E
from predbeam.system import SystemParams, channel_matrix, sum_rate
from predbeam.training import TrainHyper, generate_dataset

from gradcheck import toy_gradient_error
from oracles import grid_search_rate

P = SystemParams()
gain_lists = st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=6)


def test_waterfilling_two_channel_example():
    p = waterfilling([2.0, 1.0], 1.0)
    np.testing.assert_allclose(p, [0.75, 0.25], rtol=1e-12)
    assert waterfilling_rate([2.0, 1.0], p) == pytest.approx(math.log2(2.5) + math.log2(1.25))
    assert waterfilling_rate([2.0, 1.0], p) == pytest.approx(1.6439, abs=1e-4)


def test_waterfilling_drops_weak_channel():
    # mu would be (1 + 1 + 100) / 2 = 51 > 1/0.01 fails, so only the strong channel is used
    np.testing.assert_allclose(waterfilling([1.0, 0.01], 1.0), [1.0, 0.0])


def test_waterfilling_special_cases():
    np.testing.assert_allclose(waterfilling([5.0], 2.0), [2.0])
    np.testing.assert_allclose(waterfilling([3.0] * 4, 2.0), [0.5] * 4)
    np.testing.assert_allclose(waterfilling([0.0, 4.0], 1.0), [0.0, 1.0])


@pytest.mark.parametrize("gains,power", [([], 1.0), ([1.0], 0.0), ([-1.0], 1.0),
                                         ([0.0, 0.0], 1.0), ([np.inf], 1.0)])
def test_waterfilling_rejects_bad_input(gains, power):
    with pytest.raises(ValueError):
        waterfilling(gains, power)


@settings(max_examples=200, deadline=None)
@given(gain_lists, st.floats(1e-3, 1e3))
def test_waterfilling_kkt_conditions(gains, power):
    g = np.array(gains)
    p = waterfilling(g, power)
    assert np.all(p >= 0)
    assert p.sum() == pytest.approx(power, rel=1e-12)
    # one water level: active channels share p + 1/g, inactive ones sit above it
    act = p > 0
    level = p[act] + 1 / g[act]
    np.testing.assert_allclose(level, level[0], rtol=1e-9)
    assert np.all(1 / g[~act] >= level[0] * (1 - 1e-9))


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0.1, 100.0), min_size=1, max_size=3))
def test_waterfilling_beats_grid_search(gains):
    rate = waterfilling_rate(gains, waterfilling(gains, 1.0))
    assert rate >= grid_search_rate(gains, 1.0, units=200) - 1e-9


def test_grid_search_oracle_on_closed_form():
    assert grid_search_rate([2.0, 1.0], 1.0) == pytest.approx(1.6439, abs=1e-4)
    assert grid_search_rate([3.0], 1.0) == pytest.approx(2.0)


def test_upper_bound_single_user_matches_matched_filter():
    q = P.replace(n_vehicles=1)
    H = channel_matrix([1.1], [25.0], q)
    W, rate = upper_bound(H, q)
    expected = math.log2(1 + q.power_budget_w * np.sum(np.abs(H) ** 2) / q.noise_rx_w)
    assert rate == pytest.approx(expected, rel=1e-12)
    assert rate == pytest.approx(sum_rate(H, W, q), rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_upper_bound_dominates_its_interfered_rate(seed):
    rng = np.random.default_rng(seed)
    H = channel_matrix(rng.uniform(0.3, 2.8, 3), rng.uniform(10, 50, 3), P)
    W, rate = upper_bound(H, P)
    assert np.sum(np.abs(W.entries) ** 2) == pytest.approx(P.power_budget_w, rel=1e-12)
    assert rate >= sum_rate(H, W, P) - 1e-12
    # the bound only depends on channel norms, not on their phases
    rotated = H * np.exp(1j * rng.uniform(0, 2 * np.pi, H.shape))
    assert upper_bound(rotated, P)[1] == pytest.approx(rate, rel=1e-12)


def test_upper_bound_three_vehicle_scenario():
    H = channel_matrix([math.atan2(20, 15), math.atan2(20, 25), math.atan2(20, 35)],
                       [25.0, math.hypot(25, 20), math.hypot(35, 20)], P)
    gains = np.sum(np.abs(H) ** 2, axis=0) / P.noise_rx_w
    _, rate = upper_bound(H, P)
    assert rate == pytest.approx(grid_search_rate(gains, P.power_budget_w), abs=1e-3)
    assert rate >= grid_search_rate(gains, P.power_budget_w)


def test_naive_shapes():
    cfg = NaiveNetConfig()
    assert cfg.input_dim == cfg.output_dim == 192
    model = cfg.build()
    ps = model.init_params(np.random.default_rng(0))
    assert ps["fc0.weight"].shape == (192, 256)
    assert ps["fc2.weight"].shape == (256, 192)
    leaves = {n: E.const(ps[n]) for n in ps}
    assert model.forward(leaves, np.zeros((5, 192))).shape == (5, 32, 6)
    with pytest.raises(ValueError):
        model.forward(leaves, np.zeros((5, 10)))


def test_naive_input_uses_last_snapshot():
    rng = np.random.default_rng(1)
    stack = rng.standard_normal((4, 32, 3)) + 1j * rng.standard_normal((4, 32, 3))
    x = naive_input(stack, NaiveNetConfig())
    np.testing.assert_array_equal(x[:96], stack[-1].real.ravel())
    np.testing.assert_array_equal(x[96:], stack[-1].imag.ravel())
    with pytest.raises(ValueError):
        naive_input(stack[:, :16], NaiveNetConfig())


def test_naive_training_and_prediction_run():
    q = SystemParams(n_tx=4, n_rx=4, n_vehicles=2, history_len=2)
    d = generate_dataset(q, 16, 0, mean_positions=((15.0, 20.0), (25.0, 20.0)))
    cfg = NaiveNetConfig(k_vehicles=2, n_tx=4, hidden=(8,))
    params, report = naive_train(cfg, d, TrainHyper(batch_size=8), epochs=2)
    W = naive_predict(params, d.examples[0].history, report.config, q).entries
    assert W.shape == (4, 2)
    assert np.sum(np.abs(W) ** 2) <= q.power_budget_w
    with pytest.raises(ValueError):
        naive_predict(params, d.examples[0].history, cfg, q)


def test_naive_end_to_end_gradient_on_toy_system():
    assert toy_gradient_error("naive") < 1e-6


def test_random_beams_spend_exact_budget():
    rng = np.random.default_rng(0)
    for W in random_beamformers(P, rng, 20):
        assert np.sum(np.abs(W) ** 2) == pytest.approx(P.power_budget_w, rel=1e-12)
    a = random_beamformer(P, np.random.default_rng(3)).entries
    b = random_beamformer(P, np.random.default_rng(3)).entries
    np.testing.assert_array_equal(a, b)
    assert random_beamformer(P, rng, n_tx=8, k=2).entries.shape == (8, 2)
