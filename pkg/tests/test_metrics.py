import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from egvp.metrics import (
    MAX_SINR_DB,
    FlopModel,
    channel_nmse,
    eigen_nmse,
    eigen_nmse_batch,
    flop_count,
    noise_power_from_snr,
    relative_change,
    spectral_efficiency,
)


def _crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_single_ue_unit_sinr():
    h = np.ones((1, 1, 1), complex)
    g = np.ones((1, 1), complex)
    assert spectral_efficiency(h, g, 1.0).sum_se == pytest.approx(1.0)


def test_zero_precoders_give_zero():
    rng = np.random.default_rng(0)
    h = _crandn(rng, 5, 2, 2, 4)
    assert spectral_efficiency(h, np.zeros((5, 4, 2)), 0.1).sum_se == 0.0


def test_orthogonal_zf_closed_form():
    h = np.zeros((2, 1, 4), complex)
    h[0, 0, 0] = 2.0
    h[1, 0, 1] = 1.0
    g = np.eye(4, 2, dtype=complex)
    rep = spectral_efficiency(h, g, 0.5)
    np.testing.assert_allclose(rep.per_ue, np.log2(1 + np.array([4.0, 1.0]) / 0.5))
    assert rep.n_samples == 1


def test_noise_free_links_hit_cap():
    h = np.ones((1, 1, 1), complex)
    rep = spectral_efficiency(h, np.ones((1, 1)), 0.0)
    assert rep.sum_se == pytest.approx(np.log2(1 + 10 ** (MAX_SINR_DB / 10)))


def test_per_ue_noise_and_averaging():
    h = np.ones((3, 2, 1, 2), complex)
    h[..., 1] = 0
    h[:, 1] = [0, 1]
    g = np.broadcast_to(np.eye(2, dtype=complex), (3, 2, 2))
    rep = spectral_efficiency(h, g, [1.0, 3.0])
    np.testing.assert_allclose(rep.per_ue, np.log2(1 + 1 / np.array([1.0, 3.0])))
    assert rep.n_samples == 3
    assert noise_power_from_snr(20) == pytest.approx(0.01)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 3))
def test_se_invariant_to_precoder_phase(seed, k):
    rng = np.random.default_rng(seed)
    h = _crandn(rng, 4, k, 2, 6)
    g = _crandn(rng, 4, 6, k)
    g /= np.linalg.norm(g, axis=-2, keepdims=True)
    rot = g * np.exp(1j * rng.uniform(0, 2 * np.pi, k))
    a = spectral_efficiency(h, g, 0.3).sum_se
    b = spectral_efficiency(h, rot, 0.3).sum_se
    assert a == pytest.approx(b, rel=1e-12)


def test_eigen_nmse_examples():
    u = np.array([1.0, 0.0])
    assert eigen_nmse(u, u * np.exp(0.8j)) == pytest.approx(0.0, abs=1e-15)
    assert eigen_nmse(u, np.array([0.0, 1.0])) == pytest.approx(2.0)
    c = 0.6
    assert eigen_nmse(u, np.array([c, np.sqrt(1 - c**2)])) == pytest.approx(2 * (1 - c))
    assert eigen_nmse(u, c * u) == pytest.approx((1 - c) ** 2)
    with pytest.raises(ValueError):
        eigen_nmse(np.zeros(2), u)
    with pytest.raises(ValueError):
        eigen_nmse(u, np.ones(3))


def test_eigen_nmse_batch_matches_scalar():
    rng = np.random.default_rng(1)
    u, v = _crandn(rng, 5, 8), _crandn(rng, 5, 8)
    batch = eigen_nmse_batch(u, v)
    np.testing.assert_allclose(batch, [eigen_nmse(a, b) for a, b in zip(u, v)], rtol=1e-12)


def test_channel_nmse_examples():
    h = np.array([[1.0, 1.0j]])
    assert channel_nmse(h, h) == 0.0
    assert channel_nmse(h, np.zeros_like(h)) == pytest.approx(1.0)
    assert channel_nmse(h, 0.5 * h) == pytest.approx(0.25)
    # not phase invariant, unlike the eigenvector metric
    assert channel_nmse(h, -h) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        channel_nmse(np.zeros(2), np.ones(2))


def test_flop_unit_cycle_full_equals_periodic():
    f = FlopModel(t_svd=1)
    assert f.count("full_time") == f.count("periodic") == f.count("agmi")


def test_flop_counts_positive_and_ordered():
    t = FlopModel(t_svd=7).table()
    assert all(v > 0 for v in t.values())
    assert t["periodic"] < t["egvp"] < t["wiener"] < t["full_time"]
    with pytest.raises(ValueError):
        flop_count("bogus")


def test_flop_count_keywords():
    assert flop_count("egvp", n_t=16, n_f=8, m=2) == FlopModel(n_t=16, n_f=8, m=2).count("egvp")


def test_relative_change():
    assert relative_change(80, 100) == pytest.approx(20.0)
    assert relative_change(101, 100) == pytest.approx(-1.0)


@pytest.mark.xfail(strict=True, reason="the closed-form model gives 0.490 % EGVP overhead over periodic SVD, "
                   "just outside the 0.29 +/- 0.2 % example; see decisions ledger")
def test_overhead_example_band():
    t = FlopModel(t_svd=7).table()
    overhead = -relative_change(t["egvp"], t["periodic"])
    assert abs(overhead - 0.29) <= 0.2


def test_wiener_reduction_example():
    t = FlopModel(t_svd=7).table()
    assert relative_change(t["egvp"], t["wiener"]) == pytest.approx(0.87, abs=0.5)
