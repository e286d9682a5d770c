import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from egvp.channel import FastAngleDelay, angle_delay_transform, channel_trajectory, kmh
from egvp.expfit import OrderError
from egvp.fmpp import (
    DelayBudget,
    active_bins,
    build_hankel_pair,
    flop_compare_mp_fmpp,
    fmpp_predict,
    pole_power,
    predict_amplitudes,
    predict_amplitudes_batch,
    predict_channel,
)
from egvp.metrics import channel_nmse
from helpers import DESK_GEOMETRY, DESK_GRID, exp_series, separated_poles, shared_path_channel


def test_hankel_pair_index_expansion():
    e0, e1 = build_hankel_pair(np.array([1, 2, 3]), 1)
    np.testing.assert_array_equal(e0, [[1], [2]])
    np.testing.assert_array_equal(e1, [[2], [3]])


def test_hankel_pair_square_boundary():
    e0, e1 = build_hankel_pair(np.arange(6), 3)
    assert e0.shape == e1.shape == (3, 3)
    # rows run backwards in time, eta1 leads eta0 by one sample
    np.testing.assert_array_equal(e0[0], [2, 1, 0])
    np.testing.assert_array_equal(e1[-1], [5, 4, 3])


def test_hankel_pair_constant():
    e0, e1 = build_hankel_pair(np.full(5, 2.0 + 1j), 2)
    np.testing.assert_array_equal(e0, e1)


def test_hankel_pair_short_series():
    with pytest.raises(OrderError):
        build_hankel_pair(np.ones(3), 2)


def test_static_series_holds_last_sample():
    y = np.full(4, 0.3 - 2j)
    for t_d in (0, 1, 5, 13):
        assert abs(fmpp_predict(y, 1, t_d) - y[-1]) <= 1e-12


def test_two_exponentials_exact():
    z = np.exp(1j * np.array([0.4, -1.3]))
    b = np.array([1.0, 0.5 - 0.5j])
    y = exp_series(z, b, 5 + 10)
    assert abs(fmpp_predict(y[:5], 2, 10) - y[14]) <= 1e-8


@pytest.mark.parametrize("t_d", [0, 1, 2, 7, 13])
def test_single_pole_closed_form(t_d):
    y1, y2 = 0.8 + 0.3j, -0.2 + 0.9j
    expected = y2 * (y2 / y1) ** t_d
    assert abs(fmpp_predict([y1, y2], 1, t_d, clamp=False) - expected) <= 1e-10 * max(1, abs(expected))


def test_negative_horizon_rejected():
    with pytest.raises(ValueError):
        fmpp_predict(np.ones(4), 1, -1)


def test_rank_collapse_warns_and_reduces():
    y = exp_series([np.exp(0.7j)], [2.0], 6)
    with pytest.warns(RuntimeWarning):
        pred, poles = fmpp_predict(y, 2, 4, return_poles=True)
    assert len(poles) == 1
    assert abs(pred - 2.0 * np.exp(0.7j * 9)) <= 1e-9


def test_zero_series_predicts_zero():
    with pytest.warns(RuntimeWarning):
        assert fmpp_predict(np.zeros(4), 1, 3) == 0


def test_batch_matches_single():
    rng = np.random.default_rng(0)
    ys = np.stack([exp_series(separated_poles(rng, 2, 0.3), rng.standard_normal(2), 7) for _ in range(5)])
    batch = fmpp_predict(ys, 2, 6)
    for y, p in zip(ys, batch):
        assert abs(fmpp_predict(y, 2, 6) - p) <= 1e-10


def test_pole_power():
    z = np.exp(1j * np.array([0.1, 2.0])) * np.array([1.0, 0.99])
    for k in (0, 1, 2, 13, 64):
        np.testing.assert_allclose(pole_power(z, k), z**k, rtol=1e-12)
    np.testing.assert_allclose(pole_power(z, 2.5), np.exp(2.5 * np.log(z)), rtol=1e-12)


def test_delay_budget():
    d = DelayBudget()
    assert d.baseline == 10 and d.total == 13
    with pytest.raises(ValueError):
        DelayBudget(t_int=-1)


def test_active_bins():
    eta = np.zeros((3, 4, 1), complex)
    eta[:, 0] = 1.0
    eta[:, 1] = 1e-2  # energy ratio 1e-4
    np.testing.assert_array_equal(active_bins(eta, 1e-6)[:, 0], [True, True, False, False])
    np.testing.assert_array_equal(active_bins(eta, 1e-3)[:, 0], [True, False, False, False])
    assert not active_bins(np.zeros((3, 2)), 1e-6).any()


def _shared_bin_channel(seed, n_paths=10):
    ps = shared_path_channel(seed, n_paths=n_paths, v_kmh=30)
    traj = channel_trajectory(ps, DESK_GEOMETRY, DESK_GRID, np.arange(20))
    fast = FastAngleDelay(DESK_GEOMETRY, DESK_GRID)
    return traj, fast, fast.forward(traj)


def test_on_grid_prediction_all_horizons():
    traj, fast, eta = _shared_bin_channel(0)
    for t_d in range(1, 14):
        pred = predict_channel(eta[:2], fast, t_d, 1)
        assert channel_nmse(traj[1 + t_d], pred) <= 1e-6


def test_predict_channel_accepts_dense_transform():
    traj, fast, eta = _shared_bin_channel(1)
    w = angle_delay_transform(DESK_GRID, DESK_GEOMETRY)
    np.testing.assert_allclose(predict_channel(eta[:2], w, 5, 1), predict_channel(eta[:2], fast, 5, 1), atol=1e-12)


def test_static_channel_prediction():
    ps = shared_path_channel(2, n_paths=6, v_kmh=0.0)
    traj = channel_trajectory(ps, DESK_GEOMETRY, DESK_GRID, np.arange(7))
    fast = FastAngleDelay(DESK_GEOMETRY, DESK_GRID)
    pred = predict_channel(fast.forward(traj), fast, 9, 3)
    assert np.linalg.norm(pred - traj[-1]) <= 1e-9 * np.linalg.norm(traj[-1])


def test_prediction_beats_stale_csi():
    from egvp.channel import generate_path_set

    fast = FastAngleDelay(DESK_GEOMETRY, DESK_GRID)
    wins = 0
    for seed in range(10):
        ps = generate_path_set(seed, 20, kmh(30), DESK_GEOMETRY, DESK_GRID, grid_bias=0.5)
        traj = channel_trajectory(ps, DESK_GEOMETRY, DESK_GRID, np.arange(7 + 10))
        pred = predict_channel(fast.forward(traj[:7]), fast, 10, 3)
        wins += channel_nmse(traj[16], pred) < channel_nmse(traj[16], traj[6])
    assert wins == 10


def test_bin_permutation_invariance():
    rng = np.random.default_rng(3)
    eta = rng.standard_normal((7, 40, 2)) + 1j * rng.standard_normal((7, 40, 2))
    perm = rng.permutation(40)
    a = predict_amplitudes(eta, 3, 4)
    b = predict_amplitudes(eta[:, perm], 3, 4)
    np.testing.assert_allclose(b, a[perm], atol=1e-12)


def test_reciprocity_identity():
    traj, fast, eta = _shared_bin_channel(4)
    uplink = traj.copy()  # reciprocity modeled as identity
    np.testing.assert_array_equal(predict_channel(fast.forward(uplink[:2]), fast, 3, 1), predict_channel(eta[:2], fast, 3, 1))


def test_batch_amplitudes_and_mdl_mode():
    rng = np.random.default_rng(5)
    eta = rng.standard_normal((3, 7, 10, 2)) + 1j * rng.standard_normal((3, 7, 10, 2))
    batch = predict_amplitudes_batch(eta, 3, 5)
    for i in range(3):
        np.testing.assert_allclose(batch[i], predict_amplitudes(eta[i], 3, 5), atol=1e-12)
    out = predict_amplitudes(eta[0], 3, 5, order_mode="mdl")
    assert out.shape == (10, 2) and np.all(np.isfinite(out))
    with pytest.raises(ValueError):
        predict_amplitudes(eta[0], 3, 5, order_mode="nope")


def test_flops_examples():
    pair = flop_compare_mp_fmpp(7, 3, 13, 64, 51)
    assert pair.fmpp < pair.mp
    edge = flop_compare_mp_fmpp(6, 3, 1, 16, 8)
    assert np.isfinite(edge.ratio)
    with pytest.raises(OrderError):
        flop_compare_mp_fmpp(5, 3, 1, 16, 8)


@pytest.mark.parametrize("l_ce", [1, 2, 3, 4, 5])
def test_flops_margin_closed_form(l_ce):
    n_ce = 2 * l_ce + 1
    pair = flop_compare_mp_fmpp(n_ce, l_ce, 13, 16, 8)
    margin = n_ce**2 + l_ce**2 + l_ce**3 - l_ce**2 * n_ce
    assert pair.mp - pair.fmpp == pytest.approx(16 * 8 * margin)


@pytest.mark.parametrize("l_ce", [1, 2, 3, 4, 5])
def test_fmpp_cheaper_at_minimum_sample_count(l_ce):
    # at N_ce = 2 L_ce the margin is L_ce^2 (5 - L_ce): strict below 5, a tie at 5
    pair = flop_compare_mp_fmpp(2 * l_ce, l_ce, 13, 64, 51)
    assert pair.mp - pair.fmpp == pytest.approx(64 * 51 * l_ce**2 * (5 - l_ce))
    if l_ce < 5:
        assert pair.fmpp < pair.mp
    else:
        assert pair.fmpp == pair.mp


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), l=st.integers(1, 4), t_d=st.integers(0, 20))
def test_exact_extrapolation_property(seed, l, t_d):
    rng = np.random.default_rng(seed)
    z = separated_poles(rng, l, 0.2)
    b = rng.standard_normal(l) + 1j * rng.standard_normal(l)
    y = exp_series(z, b, 2 * l + 1 + t_d)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        pred = fmpp_predict(y[: 2 * l + 1], l, t_d)
    assert abs(pred - y[-1]) <= 1e-6 * np.sum(np.abs(b))
