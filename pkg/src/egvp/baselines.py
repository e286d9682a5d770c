"""Reference precoder trackers: full-time SVD, periodic hold, AGMI and Wiener."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eigen import SvdSchedule, calibration_phases, sample_eigenvectors


def full_time_svd(trajectory, m: int | None = None, t_offset: int = 0) -> np.ndarray:
    """Calibrated eigenvectors at every subframe, shape ``(T, n, M)``.

    Equivalent to periodic sampling with ``T_svd = 1``; the first subframe
    is the calibration reference.
    """
    trajectory = np.asarray(trajectory)
    sched = SvdSchedule(t_svd=1, n_svd=len(trajectory), t_in=t_offset)
    return np.stack([s.u for s in sample_eigenvectors(trajectory, sched, m, t_offset)])


def periodic_hold(samples, schedule: SvdSchedule, t_p):
    """Most recent sample at or before ``t_p`` (zero-order hold).

    ``samples`` is indexed like ``schedule.sample_times``; a sample at
    ``t_p`` itself is returned unchanged. Times past ``t_ed`` keep holding
    the last sample.
    """
    if t_p < schedule.t_in:
        raise ValueError(f"t_p={t_p} precedes the first sample at {schedule.t_in}")
    k = min(int((t_p - schedule.t_in) // schedule.t_svd), len(samples) - 1)
    return samples[k]


def agmi_interpolate(u_k: np.ndarray, u_k1: np.ndarray, t_k: float, t_k1: float, t_p: float, normalize: bool = False) -> np.ndarray:
    """Linear time interpolation between two eigenvector samples.

    ``u(t_p) = u_k * (t_k1 - t_p)/T + u_k1 * (1 - (t_k1 - t_p)/T)`` with
    ``T = t_k1 - t_k``. Requires ``t_k < t_p < t_k1``. Pass calibrated
    samples (see :func:`align`), otherwise the mix cancels out.
    """
    if not t_k < t_p < t_k1:
        raise ValueError(f"t_p={t_p} must lie strictly between {t_k} and {t_k1}")
    c = (t_k1 - t_p) / (t_k1 - t_k)
    u = c * u_k + (1.0 - c) * u_k1
    if normalize:
        u = u / np.linalg.norm(u, axis=0, keepdims=True)
    return u


def align(u: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Phase-calibrate ``u`` against ``reference`` column by column (silent)."""
    delta, _ = calibration_phases(u, reference)
    return u * delta


@dataclass(frozen=True)
class WienerFilter:
    """Linear predictor ``x(n + T_d) = sum_i w[i] x(n - i)``.

    Attributes
    ----------
    w : ndarray
        ``L_w`` complex taps, newest sample first.
    autocorr : ndarray
        Estimated autocorrelation ``r(0..L_w - 1 + T_d)`` (fractional lags
        interpolated); ``r[k]`` is at lag ``k`` for ``k < L_w`` and the
        trailing ``L_w`` entries hold ``r(T_d + k)``.
    """

    w: np.ndarray
    autocorr: np.ndarray
    t_d: float

    @property
    def l_w(self) -> int:
        return len(self.w)


def autocorrelation(series, max_lag: int) -> np.ndarray:
    """Time-average estimate ``r(tau) = mean_k x_k^H x_{k+tau}``.

    ``series`` is ``(T,)`` for scalars or ``(T, n)`` for vector samples; the
    inner product runs over the vector entries.
    """
    x = np.asarray(series, dtype=complex)
    if x.ndim == 1:
        x = x[:, None]
    t = len(x)
    if max_lag >= t:
        raise ValueError(f"lag {max_lag} needs more than {t} samples")
    return np.array([np.mean(np.sum(x[: t - k].conj() * x[k:], axis=1)) for k in range(max_lag + 1)])


def _lag(r: np.ndarray, tau: float) -> complex:
    """``r`` at a possibly fractional or negative lag; polar interpolation between integers."""
    if tau < 0:
        return np.conj(_lag(r, -tau))
    lo = int(np.floor(tau))
    frac = tau - lo
    if frac == 0 or lo + 1 >= len(r):
        return r[min(lo, len(r) - 1)]
    a, b = r[lo], r[lo + 1]
    mag = (1 - frac) * abs(a) + frac * abs(b)
    dphi = np.angle(b * np.conj(a)) if abs(a) > 0 else 0.0
    return mag * np.exp(1j * (np.angle(a) + frac * dphi))


def wiener_fit(series, l_w: int = 4, t_d: float = 1) -> WienerFilter:
    """Solve the Wiener-Hopf equations for an ``l_w``-tap predictor.

    Parameters
    ----------
    series : array_like, shape (T,) or (T, n)
        Training samples, oldest first.
    l_w : int
        Filter order; needs ``T >= 2 * l_w``.
    t_d : float
        Horizon in sample units; fractional horizons interpolate ``r``.

    Notes
    -----
    ``R[k, i] = r(k - i)`` is Hermitian Toeplitz and the right-hand side is
    ``r(t_d + k)``; the pseudo-inverse covers singular ``R`` (a pure
    exponential gives a rank-one ``R``).
    """
    x = np.asarray(series, dtype=complex)
    if len(x) < 2 * l_w:
        raise ValueError(f"{len(x)} samples cannot train an order-{l_w} filter (need {2 * l_w})")
    max_lag = min(len(x) - 1, int(np.ceil(t_d)) + l_w - 1)
    r = autocorrelation(x, max_lag)
    big_r = np.array([[_lag(r, k - i) for i in range(l_w)] for k in range(l_w)])
    rhs = np.array([_lag(r, t_d + k) for k in range(l_w)])
    w = np.linalg.pinv(big_r, rcond=1e-10, hermitian=True) @ rhs
    return WienerFilter(w=w, autocorr=np.concatenate([r[:l_w], rhs]), t_d=t_d)


def wiener_predict(filt: WienerFilter, recent) -> np.ndarray:
    """Apply the filter to the ``L_w`` most recent samples (oldest first).

    Works on scalars or entrywise on vector samples, shape ``(L_w, ...)``.
    """
    x = np.asarray(recent, dtype=complex)
    if len(x) != filt.l_w:
        raise ValueError(f"need exactly {filt.l_w} recent samples, got {len(x)}")
    newest_first = x[::-1]
    return np.tensordot(filt.w, newest_first, axes=(0, 0))
