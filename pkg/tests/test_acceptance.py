"""Acceptance suite: one test per criterion, summarised as PASS/FAIL lines.

Run directly (``python tests/test_acceptance.py``) or through pytest; either
way the terminal summary ends with one line per criterion.
"""

import math
import time

import numpy as np
import pytest

from predbeam import cli
from predbeam import crlb as C
from predbeam.baselines import waterfilling, waterfilling_rate
from predbeam.harness.config import load_config
from predbeam.harness.runner import run_sweep
from predbeam.kinematics import VehicleState, state_from_position
from predbeam.system import SystemParams, dbm_to_w, reflection_coeff, steering_vector
from predbeam.training import predict_batch

from conftest import CONFIGS, DESK_SEEDS
from gradcheck import PRIMITIVES, check_primitive, toy_gradient_error
from oracles import grid_search_rate, random_gain_sets

ALL = ("upper_bound", "hcl", "naive", "random")
FULL_POWER = 30.0


def _random_configuration(rng):
    k_total = int(rng.integers(1, 4))
    p = SystemParams(n_vehicles=k_total, echo_interference=bool(rng.integers(0, 2)))
    states = []
    for _ in range(k_total):
        th, d, v = rng.uniform(0.2, math.pi - 0.2), rng.uniform(8.0, 60.0), rng.uniform(5, 15)
        states.append(VehicleState(th, d, v, v * math.cos(th), (d * math.cos(th), d * math.sin(th))))
    W = rng.standard_normal((32, k_total)) + 1j * rng.standard_normal((32, k_total))
    W *= math.sqrt(float(rng.uniform(0.1, 2.0)) / np.sum(np.abs(W) ** 2))
    return p, states, W, int(rng.integers(0, k_total))


@pytest.mark.criterion(1, "closed-form CRLBs match the numerical FIM inverse")
def test_crlb_closed_form_matches_fim():
    rng = np.random.default_rng(20240)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        p, states, W, k = _random_configuration(rng)
        s = states[k]
        inv = np.linalg.inv(C.numerical_fim_oracle((s.theta, s.dist, s.radial_speed), W, p, k, states))
        worst = max(worst,
                    abs(inv[0, 0] / C.crlb_angle(s.theta, reflection_coeff(s.dist, p), W[:, k], p) - 1),
                    abs(inv[1, 1] / C.crlb_distance(states, W, k, p) - 1))
    elapsed = time.perf_counter() - t0
    print(f"worst relative mismatch {worst:.2e} in {elapsed:.2f} s")
    assert worst < 1e-5
    assert elapsed < 10.0


@pytest.mark.criterion(2, "distance CRLB of an aligned single-vehicle beam")
def test_distance_crlb_absolute_value():
    p = SystemParams(n_vehicles=1, power_budget_w=dbm_to_w(30.0))
    W = (math.sqrt(p.power_budget_w) * steering_vector(math.pi / 2, 32))[:, None]
    root = math.sqrt(C.crlb_distance([state_from_position(0.0, 20.0, 8.0)], W, 0, p))
    print(f"sqrt CRLB(d) = {root:.5e} m")
    assert root == pytest.approx(8.38e-5, rel=0.02)


@pytest.mark.criterion(3, "autodiff gradients match central differences")
def test_gradient_integrity():
    t0 = time.perf_counter()
    errs = {m: toy_gradient_error(m) for m in ("hcl", "naive")}
    print("end-to-end relative errors:", errs)
    assert all(e < 1e-4 for e in errs.values())
    for name in PRIMITIVES:
        worst = max(check_primitive(name, seed) for seed in range(50))
        assert worst < 1e-6, f"{name}: {worst:.2e}"
    elapsed = time.perf_counter() - t0
    print(f"gradient checks took {elapsed:.1f} s")
    assert elapsed < 60.0


@pytest.mark.criterion(4, "water-filling is at least as good as a fine grid search")
def test_waterfilling_optimality():
    worst = -math.inf
    for gains in random_gain_sets(np.random.default_rng(4), 50):
        wf = waterfilling_rate(gains, waterfilling(gains, 1.0))
        worst = max(worst, grid_search_rate(gains, 1.0, units=1000) - wf)
    print(f"largest grid-search advantage {worst:.2e} bits/s/Hz")
    assert worst <= 1e-3


@pytest.mark.criterion(5, "method ordering upper_bound >= hcl >= 1.2 naive >= random")
def test_method_ordering(desk_runs):
    t0 = time.perf_counter()
    for seed in DESK_SEEDS:
        r = desk_runs.rates("power_dbm", FULL_POWER, seed, ALL)
        print(f"seed {seed}: " + ", ".join(f"{m} {r[m]:.3f}" for m in ALL))
        assert r["upper_bound"] > r["hcl"] > 1.2 * r["naive"] > r["random"]
    assert time.perf_counter() - t0 < 15 * 60


@pytest.mark.criterion(6, "hcl and upper-bound rates grow with transmit power")
def test_power_monotonicity(desk_runs, desk_cfg):
    for method in ("hcl", "upper_bound"):
        curve = [np.mean([desk_runs.rates("power_dbm", v, s, ALL)[method] for s in DESK_SEEDS])
                 for v in desk_cfg.values]
        print(method, [f"{c:.3f}" for c in curve])
        assert all(b >= a - 0.05 for a, b in zip(curve, curve[1:]))


@pytest.mark.criterion(7, "trained hcl meets the sensing thresholds and the power budget")
def test_constraint_satisfaction(desk_runs):
    for seed in DESK_SEEDS:
        res = desk_runs.run("power_dbm", FULL_POWER, seed, ALL)
        row = next(r for r in res.rows if r.method == "hcl")
        p, test = desk_runs.test_set("power_dbm", FULL_POWER, seed)
        print(f"seed {seed}: CRLB(theta) {row.mean_crlb_theta:.3e}, CRLB(d) {row.mean_crlb_dist:.3e}")
        assert row.mean_crlb_theta <= 1.05 * p.crlb_angle_max
        assert row.mean_crlb_dist <= 1.05 * p.crlb_dist_max
        Ws = predict_batch(res.checkpoints["hcl"], test.examples, res.reports["hcl"].config, p)
        assert np.all(np.sum(np.abs(Ws) ** 2, axis=(1, 2)) <= p.power_budget_w)


@pytest.mark.criterion(8, "training objective settles within six epochs")
def test_convergence_speed(desk_runs):
    curves = np.array([desk_runs.run("power_dbm", FULL_POWER, s, ALL).reports["hcl"].costs()
                       for s in DESK_SEEDS])
    assert curves.shape[1] == 6
    mean = curves.mean(axis=0)
    total, last = mean[0] - mean[5], mean[4] - mean[5]
    print("seed-mean cost per epoch:", [f"{c:.3f}" for c in mean])
    print(f"last-epoch share of improvement {last / total:.1%}")
    assert total > 0
    assert last < 0.05 * total


@pytest.mark.criterion(9, "a six-slot history beats a single slot")
def test_history_depth(desk_runs):
    for seed in DESK_SEEDS:
        deep = desk_runs.rates("power_dbm", FULL_POWER, seed, ALL)["hcl"]
        shallow = desk_runs.rates("tau", 1.0, seed, ("hcl",))["hcl"]
        print(f"seed {seed}: tau=6 {deep:.3f}, tau=1 {shallow:.3f}")
        assert deep > shallow


@pytest.mark.criterion(10, "a larger penalty weight does not raise violation rates")
def test_penalty_trend(desk_runs):
    for seed in DESK_SEEDS:
        strong = desk_runs.run("lambda", 1e3, seed, ("hcl",)).rows[0]
        weak = desk_runs.run("lambda", 1.0, seed, ("hcl",)).rows[0]
        print(f"seed {seed}: lambda=1e3 ({strong.violation_rate_theta}, "
              f"{strong.violation_rate_dist}), lambda=1 ({weak.violation_rate_theta}, "
              f"{weak.violation_rate_dist})")
        assert strong.violation_rate_theta <= weak.violation_rate_theta
        assert strong.violation_rate_dist <= weak.violation_rate_dist


@pytest.fixture(scope="module")
def tradeoff_rows():
    cfg = load_config(CONFIGS / "tradeoff.ini")
    return cfg, run_sweep(cfg, plots=False)


@pytest.mark.criterion(11, "rate-sensing tradeoff is non-decreasing and saturates")
def test_tradeoff_curve(tradeoff_rows):
    cfg, rows = tradeoff_rows
    curve = [r.mean_sum_rate for r in sorted(rows, key=lambda r: r.axis_value)]
    print("gamma:", cfg.values)
    print("rate: ", [f"{c:.3f}" for c in curve])
    assert abs(curve[-1] - curve[-2]) < 0.02 * abs(curve[-2])
    assert all(b >= a for a, b in zip(curve, curve[1:]))


@pytest.mark.criterion(12, "repeated CLI runs write byte-identical files")
def test_cli_determinism(tmp_path):
    text = (CONFIGS / "desk.ini").read_text()
    small = (text.replace("n_train = 500", "n_train = 64").replace("n_test = 500", "n_test = 64")
             .replace("epochs = 6", "epochs = 2").replace("values = 10, 20, 30", "values = 30"))
    cfg_path = tmp_path / "small.ini"
    cfg_path.write_text(small)
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert cli.main(["sweep", "--config", str(cfg_path), "--seed", "7", "--out", str(out)]) == 0
        assert cli.main(["train", "--config", str(cfg_path), "--seed", "7",
                         "--out", str(out / "train"), "--method", "hcl", "naive"]) == 0
        outputs.append({f.relative_to(out): f.read_bytes()
                        for f in sorted(out.rglob("*")) if f.is_file()})
    a, b = outputs
    assert any(str(name).endswith(".params") for name in a)
    assert any(str(name).endswith(".csv") for name in a)
    assert a.keys() == b.keys()
    for name in a:
        assert a[name] == b[name], f"{name} differs between runs"


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
