import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from egvp.channel import ArrayGeometry, GridConfig, channel_trajectory, generate_path_set, kmh
from egvp.eigen import (
    CalibrationError,
    ScheduleError,
    SvdSchedule,
    eigen_sample,
    ezf_all,
    ezf_precoders,
    phase_calibrate,
    sample_eigenvectors,
    subcarrier_slice,
    svd_truncate,
)
from egvp.metrics import link_gains, se_from_gains
from helpers import DESK_GEOMETRY, DESK_GRID


def _crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_rank_one():
    rng = np.random.default_rng(0)
    u = _crandn(rng, 16)
    u /= np.linalg.norm(u)
    v = _crandn(rng, 2)
    v /= np.linalg.norm(v)
    h = 3.5 * np.outer(u, v.conj())
    uu, s, _ = svd_truncate(h, 1)
    assert s[0] == pytest.approx(3.5, rel=1e-12)
    assert abs(abs(np.vdot(uu[:, 0], u)) - 1) <= 1e-12


def test_reconstruction_random_block():
    rng = np.random.default_rng(1)
    h = _crandn(rng, 32, 2)
    u, s, vh = svd_truncate(h)
    assert np.linalg.norm(u * s @ vh - h) / np.linalg.norm(h) <= 1e-10


def test_table_size_block():
    rng = np.random.default_rng(2)
    u, s, _ = svd_truncate(_crandn(rng, 3264, 4))
    assert u.shape == (3264, 4) and len(s) == 4
    assert np.all(np.diff(s) <= 0) and np.all(s >= 0)


def test_non_finite_rejected():
    h = np.ones((4, 2), complex)
    h[0, 0] = np.nan
    with pytest.raises(ValueError):
        svd_truncate(h)


def test_calibration_removes_phase():
    rng = np.random.default_rng(3)
    ref = np.linalg.qr(_crandn(rng, 10, 2))[0]
    np.testing.assert_allclose(phase_calibrate(ref * np.exp(1j * np.array([0.7, -2.0])), ref), ref, atol=1e-12)
    np.testing.assert_allclose(phase_calibrate(ref, ref), ref, atol=1e-15)


def test_calibration_random_pair():
    rng = np.random.default_rng(4)
    a, b = _crandn(rng, 10, 3), _crandn(rng, 10, 3)
    c = phase_calibrate(a, b)
    ip = np.sum(c.conj() * b, axis=0)
    assert np.max(np.abs(ip.imag)) <= 1e-10
    assert np.all(ip.real >= 0)


def test_calibration_zero_overlap_flagged():
    ref = np.eye(4, 1, dtype=complex)
    raw = np.eye(4, 1, k=-1, dtype=complex)
    with pytest.warns(RuntimeWarning):
        out = phase_calibrate(raw, ref)
    np.testing.assert_array_equal(out, raw)
    with pytest.raises(CalibrationError):
        phase_calibrate(raw, np.ones((3, 1)))


def test_schedule_sample_times():
    s = SvdSchedule(t_svd=5, n_svd=7)
    np.testing.assert_array_equal(s.sample_times, [0, 5, 10, 15, 20, 25, 30])
    assert s.t_ed == 30 and s.t_egsp == 35
    with pytest.raises(ScheduleError):
        SvdSchedule(t_svd=0)
    with pytest.raises(ScheduleError):
        SvdSchedule(n_svd=5, l_svd=3)


def test_sampling_every_subframe():
    ps = generate_path_set(0, 5, kmh(30), DESK_GEOMETRY, DESK_GRID)
    traj = channel_trajectory(ps, DESK_GEOMETRY, DESK_GRID, np.arange(6))
    samples = sample_eigenvectors(traj, SvdSchedule(t_svd=1, n_svd=6))
    assert [s.t for s in samples] == list(range(6))


def test_static_channel_samples_equal():
    ps = generate_path_set(1, 5, 0.0, DESK_GEOMETRY, DESK_GRID)
    traj = channel_trajectory(ps, DESK_GEOMETRY, DESK_GRID, np.arange(31))
    samples = sample_eigenvectors(traj, SvdSchedule(t_svd=5, n_svd=7))
    for s in samples:
        np.testing.assert_allclose(s.u, samples[0].u, atol=1e-8)


def test_missing_subframe():
    traj = np.ones((10, 4, 1), complex)
    with pytest.raises(ScheduleError):
        sample_eigenvectors(traj, SvdSchedule(t_svd=5, n_svd=3))


def test_eigen_sample_invariants():
    ps = generate_path_set(2, 8, kmh(60), DESK_GEOMETRY, DESK_GRID)
    traj = channel_trajectory(ps, DESK_GEOMETRY, DESK_GRID, np.arange(31))
    samples = sample_eigenvectors(traj, SvdSchedule(t_svd=5, n_svd=7))
    ref = samples[0].u
    for s in samples:
        np.testing.assert_allclose(np.linalg.norm(s.u, axis=0), 1, atol=1e-10)
        assert np.all(np.diff(s.sigma) <= 0)
        ip = np.sum(s.u.conj() * ref, axis=0)
        assert np.all(ip.real >= 0) and np.max(np.abs(ip.imag)) <= 1e-9
        h = traj[s.t]
        resid = h @ (h.conj().T @ s.u) - s.u * s.chi
        assert np.linalg.norm(resid) <= 1e-8 * s.chi[0]


def test_ezf_single_ue():
    rng = np.random.default_rng(5)
    u = _crandn(rng, 32, 1)
    g = ezf_precoders(u, 1, 4)
    sl = subcarrier_slice(u, 1, 4)
    np.testing.assert_allclose(g, sl / np.linalg.norm(sl), atol=1e-12)


def test_ezf_orthogonal_slices():
    q = np.linalg.qr(np.random.default_rng(6).standard_normal((8, 2)) + 0j)[0]
    g = ezf_precoders(q, None, 1)
    np.testing.assert_allclose(np.abs(np.sum(g.conj() * q, axis=0)), 1, atol=1e-12)
    assert abs(np.vdot(q[:, 0], g[:, 1])) <= 1e-10


def test_ezf_singular_gram_warns():
    u = np.ones((8, 2), complex)
    with pytest.warns(RuntimeWarning):
        g = ezf_precoders(u, None, 1)
    assert np.all(np.isfinite(g))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 4))
def test_ezf_zero_forcing_and_unit_norm(seed, k):
    rng = np.random.default_rng(seed)
    n_f, n_t = 3, 8
    u = _crandn(rng, n_t * n_f, k)
    g_all = ezf_all(u, n_f)
    for f in range(n_f):
        g = ezf_precoders(u, f, n_f)
        np.testing.assert_allclose(np.linalg.norm(g, axis=0), 1, atol=1e-12)
        np.testing.assert_allclose(g_all[f], g, atol=1e-8)
        sl = subcarrier_slice(u, f, n_f)
        cross = np.abs(sl.conj().T @ g)
        off = cross[~np.eye(k, dtype=bool)]
        assert np.all(off <= 1e-8 * np.linalg.norm(sl, axis=0).max())


def test_se_invariant_under_calibration():
    geom, grid = ArrayGeometry(2, 2, 1), GridConfig(n_f=4)
    hs, raw, cal = [], [], []
    for ue in range(2):
        ps = generate_path_set(10 + ue, 6, kmh(30), geom, grid)
        h = channel_trajectory(ps, geom, grid, [0, 3])
        ref = eigen_sample(h[0], m=1).u
        u_raw = svd_truncate(h[1], 1)[0] * np.exp(1j * (ue + 0.3))
        hs.append(h[1])
        raw.append(u_raw[:, 0])
        cal.append(phase_calibrate(u_raw, ref)[:, 0])
    h = np.stack(hs)  # (K, n, M)
    slices = h.reshape(2, geom.n_t, grid.n_f, 2).transpose(2, 0, 3, 1).conj()
    se = [se_from_gains(link_gains(slices, ezf_all(np.stack(u, axis=1), grid.n_f)), 0.1).sum_se for u in (raw, cal)]
    assert abs(se[0] - se[1]) <= 1e-9
