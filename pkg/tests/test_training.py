import math

import numpy as np
import pytest

from predbeam.baselines import random_beamformers
from predbeam.hcl import HclConfig, init_params
from predbeam.system import SystemParams, channel_matrix, sum_rate
from predbeam.training import (TrainHyper, TrainingError, dataset_from_json, dataset_to_json,
                               evaluate, evaluate_beamformers, generate_dataset, load_dataset,
                               predict, predict_batch, save_dataset, train)

P = SystemParams(n_tx=8, n_rx=8, n_vehicles=2, history_len=3, echo_interference=False)
MEANS = ((15.0, 20.0), (25.0, 20.0))
CFG = HclConfig(tau=3, k_vehicles=2, n_tx=8, conv_filters=2, pool=(2, 2), lstm_hidden=16)


@pytest.fixture(scope="module")
def data():
    return generate_dataset(P, 64, 1, mean_positions=MEANS)


@pytest.fixture(scope="module")
def trained(data):
    return train(CFG, data, TrainHyper(lr=1e-2, batch_size=16), epochs=8, seed=0)


def test_dataset_deterministic_and_seed_dependent():
    a = generate_dataset(P, 5, 3, mean_positions=MEANS)
    b = generate_dataset(P, 5, 3, mean_positions=MEANS)
    c = generate_dataset(P, 5, 4, mean_positions=MEANS)
    assert dataset_to_json(a) == dataset_to_json(b)
    assert dataset_to_json(a) != dataset_to_json(c)
    # examples use independent streams: a longer dataset extends a shorter one
    longer = generate_dataset(P, 7, 3, mean_positions=MEANS)
    np.testing.assert_array_equal(longer.channels()[:5], a.channels())


def test_dataset_json_round_trip(tmp_path, data):
    text = dataset_to_json(data)
    back = dataset_from_json(text)
    assert dataset_to_json(back) == text
    np.testing.assert_array_equal(back.channels(), data.channels())
    for x, y in zip(back.examples, data.examples):
        np.testing.assert_array_equal(x.history.stacked(), y.history.stacked())
    save_dataset(data, tmp_path / "d.json")
    assert dataset_to_json(load_dataset(tmp_path / "d.json")) == text


def test_dataset_rejects_bad_input():
    with pytest.raises(ValueError):
        generate_dataset(P, 0, 1, mean_positions=MEANS)
    with pytest.raises(ValueError):
        dataset_from_json('{"format": "other"}')


def test_current_channel_matches_geometry(data):
    th, ds = data.geometry()
    for i, ex in enumerate(data.examples):
        np.testing.assert_array_equal(ex.channel.entries, channel_matrix(th[i], ds[i], P))


def test_exact_history_when_nmse_zero():
    q = P.replace(history_nmse=0.0)
    d = generate_dataset(q, 3, 2, mean_positions=MEANS)
    for ex in d.examples:
        prev = ex.window.states[-2]
        np.testing.assert_array_equal(
            ex.history.stacked()[-1],
            channel_matrix([s.theta for s in prev], [s.dist for s in prev], q))


def test_training_lowers_cost(trained):
    costs = trained[1].costs()
    assert len(costs) == 8
    assert costs[-1] < costs[0]
    assert all(math.isfinite(c) for c in costs)


def test_zero_learning_rate_keeps_initial_parameters(data):
    params, report = train(CFG, data, TrainHyper(lr=0.0), epochs=1, seed=5)
    ref = init_params(report.config, np.random.default_rng(np.random.SeedSequence(5).spawn(2)[0]))
    for n in params:
        np.testing.assert_array_equal(params[n], ref[n])


def test_training_bit_identical_across_runs(data):
    a, ra = train(CFG, data, TrainHyper(batch_size=16), epochs=2, seed=3)
    b, rb = train(CFG, data, TrainHyper(batch_size=16), epochs=2, seed=3)
    assert a.equals(b)
    assert ra.to_csv() == rb.to_csv()
    c, _ = train(CFG, data, TrainHyper(batch_size=16), epochs=2, seed=4)
    assert not a.equals(c)


def test_report_resolves_scales(trained, data):
    cfg = trained[1].config
    assert cfg.output_scale == pytest.approx(math.sqrt(P.power_budget_w / (8 * 2)))
    rms = np.sqrt(np.mean(np.abs(np.stack([ex.history.stacked() for ex in data.examples])) ** 2))
    assert cfg.input_scale == pytest.approx(1 / rms)
    assert trained[1].to_csv().splitlines()[1].endswith(",0.0")


def test_predictions_respect_budget(trained, data):
    params, report = trained
    Ws = predict_batch(params, data.examples, report.config, P)
    assert Ws.shape == (64, 8, 2)
    assert np.all(np.sum(np.abs(Ws) ** 2, axis=(1, 2)) <= P.power_budget_w)
    one = predict(params, data.examples[0].history, report.config, P).entries
    np.testing.assert_allclose(one, Ws[0], rtol=1e-12)


def test_prediction_needs_resolved_scale(trained, data):
    with pytest.raises(ValueError):
        predict_batch(trained[0], data.examples, CFG, P)


def test_zero_beamformers_give_zero_rate_and_capped_crlb(data):
    res = evaluate_beamformers(np.zeros((64, 8, 2), complex), data)
    assert res.metrics["mean_sum_rate"] == 0.0
    assert res.metrics["mean_crlb_theta"] == P.crlb_cap
    assert res.metrics["violation_rate_theta"] == 1.0


def test_metrics_are_row_means(data):
    Ws = random_beamformers(P, np.random.default_rng(0), len(data))
    res = evaluate_beamformers(Ws, data)
    for key in ("sum_rate", "crlb_theta", "crlb_dist"):
        assert res.metrics[f"mean_{key}"] == pytest.approx(np.mean([r[key] for r in res.rows]))
    assert res.metrics["mean_power_w"] == pytest.approx(P.power_budget_w)
    assert res.rows[3]["sum_rate"] == pytest.approx(sum_rate(data.examples[3].channel, Ws[3], P))


def test_trained_model_beats_random_beams(trained, data):
    params, report = trained
    test = generate_dataset(P, 64, 2, mean_positions=MEANS)
    net = evaluate(params, test, P, report.config)["mean_sum_rate"]
    rnd = evaluate_beamformers(random_beamformers(P, np.random.default_rng(0), 64), test)
    assert net > rnd.metrics["mean_sum_rate"]


def test_nonfinite_cost_raises(data):
    ps = init_params(CFG.with_scale(1.0).with_output_scale(1.0), np.random.default_rng(0))
    ps.set_values("out.bias", np.full_like(ps["out.bias"], np.nan))
    with pytest.raises(TrainingError, match="non-finite cost"):
        train(CFG, data, epochs=1, init=ps)


def test_epochs_must_be_positive(data):
    with pytest.raises(ValueError):
        train(CFG, data, epochs=0)
