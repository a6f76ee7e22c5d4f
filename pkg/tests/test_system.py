import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from predbeam.system import (BeamformingMatrix, SystemParams, channel_matrix, channel_vector,
                             dbm_to_w, path_loss, reflection_coeff, sinr, sinr_all,
                             steering_vector, sum_rate, w_to_dbm)

P = SystemParams()
angles = st.floats(0.05, math.pi - 0.05)
dists = st.floats(5.0, 200.0)


def test_steering_broadside_is_flat():
    np.testing.assert_allclose(steering_vector(math.pi / 2, 4), np.full(4, 0.5 + 0j), atol=1e-15)


def test_steering_vectors_of_separated_angles_nearly_orthogonal():
    a, b = steering_vector(1.047, 32), steering_vector(2.094, 32)
    assert abs(np.vdot(a, b)) < 0.12


@pytest.mark.parametrize("bad", [0, -3, 2.5, None])
def test_steering_rejects_bad_size(bad):
    with pytest.raises(ValueError):
        steering_vector(1.0, bad)


def test_steering_rejects_nonfinite_angle():
    with pytest.raises(ValueError):
        steering_vector(float("nan"), 4)


@settings(max_examples=100, deadline=None)
@given(angles, st.integers(1, 64))
def test_steering_unit_norm_and_conjugate_symmetry(theta, n):
    a = steering_vector(theta, n)
    assert np.linalg.norm(a) == pytest.approx(1.0, abs=1e-12)
    # cos(pi - theta) = -cos(theta): mirroring the angle conjugates every entry
    np.testing.assert_allclose(steering_vector(math.pi - theta, n), a.conj(), atol=1e-12)


def test_path_loss_values():
    assert path_loss(1.0, P) == pytest.approx(1e-7, rel=1e-12)
    assert path_loss(10.0, P) == pytest.approx(2.8184e-10, rel=1e-4)
    q = P.replace(pathloss_exp=3.7)
    assert path_loss(q.ref_dist_m, q) == pytest.approx(q.pathloss_ref)


@given(st.floats(0.5, 500.0), st.floats(1.001, 10.0))
def test_path_loss_strictly_decreasing(d, factor):
    assert path_loss(d * factor, P) < path_loss(d, P)


def test_path_loss_rejects_nonpositive_distance():
    with pytest.raises(ValueError):
        path_loss(0.0, P)


def test_reflection_coefficient():
    beta = reflection_coeff(20.0, P)
    assert beta == pytest.approx(0.25 + 0.25j)
    assert abs(beta) ** 2 == pytest.approx(0.125)
    assert reflection_coeff(20.0, P.replace(rcs_coeff=0j)) == 0
    assert abs(reflection_coeff(40.0, P)) == pytest.approx(abs(beta) / 2)


def test_channel_vector_values():
    q = P.replace(n_tx=4, pathloss_ref=1.0)
    np.testing.assert_allclose(channel_vector(math.pi / 2, q.ref_dist_m, q), np.ones(4), atol=1e-12)
    h = channel_vector(1.107, 22.36, P)
    assert np.sum(np.abs(h) ** 2) == pytest.approx(1.17e-9, rel=1e-2)


@given(angles, dists)
def test_channel_norm_identity(theta, d):
    h = channel_vector(theta, d, P)
    assert np.sum(np.abs(h) ** 2) == pytest.approx(P.n_tx * path_loss(d, P), rel=1e-12)


def test_single_user_matched_beam_sinr():
    q = P.replace(n_vehicles=1)
    h = channel_matrix([1.0], [20.0], q)
    w = math.sqrt(q.power_budget_w) * h / np.linalg.norm(h)
    expected = q.power_budget_w * np.sum(np.abs(h) ** 2) / q.noise_rx_w
    assert sinr(h, w, 0, q) == pytest.approx(expected, rel=1e-12)
    assert sinr(h, np.zeros_like(h), 0, q) == 0.0


def test_orthogonal_users_have_no_interference():
    q = P.replace(n_tx=4, n_vehicles=2)
    # cos(theta) = 0 and 1 give orthogonal 4-antenna steering vectors
    H = channel_matrix([math.pi / 2, math.acos(0.5)], [20.0, 30.0], q)
    assert abs(np.vdot(H[:, 0], H[:, 1])) < 1e-20
    W = math.sqrt(q.power_budget_w / 2) * H / np.linalg.norm(H, axis=0)
    expected = (q.power_budget_w / 2) * np.sum(np.abs(H) ** 2, axis=0) / q.noise_rx_w
    np.testing.assert_allclose(sinr_all(H, W, q), expected, rtol=1e-10)


def test_sum_rate_examples():
    q = P.replace(n_vehicles=1)
    h = channel_matrix([1.0], [20.0], q)
    # choose the power that gives SINR = 3 exactly
    power = 3 * q.noise_rx_w / np.sum(np.abs(h) ** 2)
    w = math.sqrt(power) * h / np.linalg.norm(h)
    assert sum_rate(h, w, q) == pytest.approx(2.0, rel=1e-12)
    assert sum_rate(h, np.zeros_like(h), q) == 0.0


def test_sum_rate_matches_scalar_recomputation():
    rng = np.random.default_rng(7)
    for _ in range(20):
        H = channel_matrix(rng.uniform(0.3, 2.8, 3), rng.uniform(10, 50, 3), P)
        W = rng.standard_normal((32, 3)) + 1j * rng.standard_normal((32, 3))
        W *= 0.1
        total = 0.0
        for k in range(3):
            sig = abs(np.vdot(H[:, k], W[:, k])) ** 2
            intf = sum(abs(np.vdot(H[:, k], W[:, j])) ** 2 for j in range(3) if j != k)
            total += math.log2(1 + sig / (intf + P.noise_rx_w))
        assert sum_rate(H, BeamformingMatrix(W), P) == pytest.approx(total, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_sum_rate_invariant_to_column_phase(seed):
    rng = np.random.default_rng(seed)
    H = channel_matrix(rng.uniform(0.3, 2.8, 3), rng.uniform(10, 50, 3), P)
    W = (rng.standard_normal((32, 3)) + 1j * rng.standard_normal((32, 3))) * 0.1
    rotated = W * np.exp(1j * rng.uniform(0, 2 * np.pi, 3))
    assert sum_rate(H, rotated, P) == pytest.approx(sum_rate(H, W, P), rel=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1.0, 100.0))
def test_single_user_sinr_grows_with_scaling(seed, s):
    rng = np.random.default_rng(seed)
    q = P.replace(n_vehicles=1)
    h = channel_matrix([rng.uniform(0.3, 2.8)], [rng.uniform(10, 50)], q)
    w = (rng.standard_normal((32, 1)) + 1j * rng.standard_normal((32, 1))) * 0.1
    assert sinr(h, s * w, 0, q) >= sinr(h, w, 0, q)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_multiuser_sinr_scale_invariant_without_noise(seed):
    rng = np.random.default_rng(seed)
    q = P.replace(noise_rx_w=1e-40)
    H = channel_matrix(rng.uniform(0.3, 2.8, 3), rng.uniform(10, 50, 3), q)
    W = (rng.standard_normal((32, 3)) + 1j * rng.standard_normal((32, 3))) * 0.1
    np.testing.assert_allclose(sinr_all(H, 7.0 * W, q) / sinr_all(H, W, q), 1.0, atol=1e-6)


def test_sinr_shape_mismatch_rejected():
    H = channel_matrix([1.0, 2.0, 2.5], [20, 30, 40], P)
    with pytest.raises(ValueError):
        sinr_all(H, np.zeros((32, 2)), P)
    with pytest.raises(ValueError):
        sinr(H, np.zeros((32, 3)), 3, P)


def test_power_conversions():
    assert dbm_to_w(30.0) == pytest.approx(1.0)
    assert dbm_to_w(-80.0) == pytest.approx(1e-11)
    assert w_to_dbm(dbm_to_w(17.3)) == pytest.approx(17.3)


@pytest.mark.parametrize("field,value", [("n_tx", 0), ("n_vehicles", 1.5), ("power_budget_w", 0.0),
                                         ("noise_rx_w", float("nan")), ("penalty_angle", -1.0),
                                         ("speed_min_mps", 9.0)])
def test_params_validation(field, value):
    with pytest.raises(ValueError):
        P.replace(**{field: value})


def test_params_defaults_resolve():
    assert P.sigma_r2 == pytest.approx(P.mf_gain * P.noise_echo_w)
    assert P.rho_doppler == P.delay_const
    assert P.replace(echo_obs_var_w=3.0).sigma_r2 == 3.0
    assert P.rx_noise().shape == (3,)
    q = P.replace(noise_rx_per_vehicle=(1e-11, 2e-11, 3e-11))
    np.testing.assert_allclose(q.rx_noise(), [1e-11, 2e-11, 3e-11])
    assert q.replace(n_vehicles=2).noise_rx_per_vehicle is None
