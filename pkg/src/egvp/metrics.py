"""Spectral efficiency, prediction error and FLOP models."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_SINR_DB = 60.0


@dataclass(frozen=True)
class SeReport:
    """Sum spectral efficiency averaged uniformly over (t, f).

    ``per_ue`` holds each UE's average; ``sum_se`` is their sum.
    """

    sum_se: float
    per_ue: np.ndarray
    n_samples: int
    snr_db: float | None = None


def noise_power_from_snr(snr_db: float) -> float:
    return 10.0 ** (-snr_db / 10.0)


def spectral_efficiency(channels, precoders, noise_power, max_sinr_db: float = MAX_SINR_DB) -> SeReport:
    """Sum SE of linearly precoded multi-user downlink.

    Parameters
    ----------
    channels : ndarray, shape (..., K, M, N_t)
        Per-(t, f) channel slice of every UE; received signal is ``H_k g``.
    precoders : ndarray, shape (..., N_t, K)
        Unit-norm precoders per (t, f).
    noise_power : float or array_like
        ``sigma_k^2``, scalar or per UE.
    max_sinr_db : float
        SINR cap that keeps interference- and noise-free links finite.

    Returns
    -------
    SeReport
        ``log2(1 + SINR)`` with SINR ``||H_k g_k||^2 / (sigma_k^2 + sum_{j!=k} ||H_k g_j||^2)``,
        averaged over every leading index.
    """
    return se_from_gains(link_gains(channels, precoders), noise_power, max_sinr_db)


def link_gains(channels, precoders) -> np.ndarray:
    """``G[..., k, j] = ||H_k g_j||^2`` for every UE pair."""
    h = np.asarray(channels)
    g = np.asarray(precoders)
    return np.sum(np.abs(h @ g[..., None, :, :]) ** 2, axis=-2)


def se_from_gains(gain: np.ndarray, noise_power, max_sinr_db: float = MAX_SINR_DB) -> SeReport:
    """SE from precomputed link gains (see :func:`link_gains`)."""
    k = gain.shape[-1]
    sig = np.diagonal(gain, axis1=-2, axis2=-1)
    interf = gain.sum(axis=-1) - sig
    sigma2 = np.broadcast_to(np.asarray(noise_power, dtype=float), (k,))
    denom = sigma2 + interf
    cap = 10.0 ** (max_sinr_db / 10.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        sinr = np.where(denom > 0, sig / np.where(denom > 0, denom, 1.0), np.where(sig > 0, cap, 0.0))
    sinr = np.minimum(sinr, cap)
    rate = np.log2(1.0 + sinr)
    per_ue = rate.reshape(-1, k).mean(axis=0)
    return SeReport(sum_se=float(per_ue.sum()), per_ue=per_ue, n_samples=rate.size // k)


def eigen_nmse(true_u, est_u) -> float:
    """Phase-invariant NMSE ``min_phi ||u - e^{j phi} u_hat||^2 / ||u||^2``.

    The optimum rotation aligns ``u_hat`` with ``u``, giving
    ``(||u||^2 + ||u_hat||^2 - 2 |u^H u_hat|) / ||u||^2``.
    """
    u = np.asarray(true_u).ravel()
    v = np.asarray(est_u).ravel()
    if u.shape != v.shape:
        raise ValueError("shape mismatch")
    nu = np.vdot(u, u).real
    if nu == 0:
        raise ValueError("reference vector is zero")
    err = nu + np.vdot(v, v).real - 2.0 * abs(np.vdot(u, v))
    return float(max(err, 0.0) / nu)


def eigen_nmse_batch(true_u: np.ndarray, est_u: np.ndarray) -> np.ndarray:
    """Phase-invariant NMSE per vector; vectors run along axis ``-1``."""
    nu = np.sum(np.abs(true_u) ** 2, axis=-1)
    nv = np.sum(np.abs(est_u) ** 2, axis=-1)
    cross = np.abs(np.sum(true_u.conj() * est_u, axis=-1))
    return np.maximum(nu + nv - 2 * cross, 0.0) / nu


def channel_nmse(true_h, est_h) -> float:
    """``||h - h_hat||^2 / ||h||^2`` pooled over every antenna and subframe given."""
    h = np.asarray(true_h)
    e = np.asarray(est_h)
    if h.shape != e.shape:
        raise ValueError("shape mismatch")
    nh = np.sum(np.abs(h) ** 2)
    if nh == 0:
        raise ValueError("reference channel is zero")
    return float(np.sum(np.abs(h - e) ** 2) / nh)


SCHEMES = ("full_time", "periodic", "agmi", "wiener", "egvp")


@dataclass(frozen=True)
class FlopModel:
    """Closed-form FLOPs per EGVP interval ``T_egsp = N_svd * T_svd``.

    One M-truncated SVD of the stacked channel costs ``c_svd * M * n**2``
    with ``n = N_f * N_t``; linear-combination work costs ``c_lin`` per
    complex multiply-add.
    """

    n_t: int = 64
    n_f: int = 51
    m: int = 4
    n_svd: int = 7
    t_svd: int = 5
    c_svd: float = 14.0
    c_lin: float = 8.0

    @property
    def n(self) -> int:
        return self.n_t * self.n_f

    def svd_term(self, count: int) -> float:
        return self.c_svd * count * self.m * float(self.n) ** 2

    def count(self, scheme: str) -> float:
        periodic = self.svd_term(self.n_svd)
        if scheme == "full_time":
            return self.svd_term(self.n_svd * self.t_svd)
        if scheme in ("periodic", "agmi"):
            return periodic
        if scheme == "wiener":
            return periodic + self.c_lin * (self.n_svd * self.t_svd) ** 2 * self.n
        if scheme == "egvp":
            return periodic + self.c_lin * self.n_svd * self.t_svd * self.m**2 * self.n
        raise ValueError(f"unknown scheme {scheme!r}")

    def table(self) -> dict:
        return {s: self.count(s) for s in SCHEMES}


def flop_count(scheme: str, **params) -> float:
    """FLOPs of ``scheme`` per EGVP interval; ``params`` are :class:`FlopModel` fields."""
    return FlopModel(**params).count(scheme)


def relative_change(a: float, b: float) -> float:
    """Percentage by which ``a`` is below ``b`` (negative when above)."""
    return 100.0 * (b - a) / b
