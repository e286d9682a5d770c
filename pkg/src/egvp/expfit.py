"""Harmonic retrieval: Matrix Pencil fitting, MDL order detection and
evaluation of undamped complex-exponential models.

A model ``sum_l b_l z_l^((t - t0)/step)`` is stored as poles and amplitudes
referenced to the first sample time ``t0`` of the fitted series.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import hankel

RANK_TOL = 1e-10
MERGE_TOL = 1e-6


class OrderError(ValueError):
    """Raised when a series is too short for the requested model order."""


@dataclass(frozen=True)
class ExpModel:
    """Sum of complex exponentials.

    Attributes
    ----------
    b : ndarray
        Complex amplitudes at ``t0``.
    z : ndarray
        Poles per ``sample_step`` subframes.
    sample_step : float
        Spacing of the fitted samples in subframes.
    t0 : float
        Time of the first fitted sample.
    reduced : bool
        True when the fit fell back to a lower order than requested.
    residual : float
        Relative least-squares residual on the fitted samples.
    """

    b: np.ndarray
    z: np.ndarray
    sample_step: float = 1.0
    t0: float = 0.0
    reduced: bool = False
    residual: float = 0.0

    @property
    def order(self) -> int:
        return len(self.z)

    @property
    def omega(self) -> np.ndarray:
        """Pole angles in rad per sample step."""
        return np.angle(self.z)

    def __call__(self, t):
        return evaluate(self, t)


class MdlResult(NamedTuple):
    order: int
    criterion: np.ndarray
    confident: bool


def _check_series(y, n_terms: int) -> np.ndarray:
    y = np.asarray(y, dtype=complex)
    if y.ndim != 1:
        raise ValueError("series must be one-dimensional")
    if len(y) < 2:
        raise OrderError("series needs at least two samples")
    if n_terms < 1:
        raise OrderError("model order must be at least 1")
    if len(y) < 2 * n_terms:
        raise OrderError(f"{len(y)} samples cannot support order {n_terms} (need N >= 2L)")
    if not np.all(np.isfinite(y)):
        raise ValueError("series contains non-finite values")
    return y


def clamp_poles(z: np.ndarray, eps_damp: float = 0.0) -> np.ndarray:
    """Project poles into the annulus ``1 - eps <= |z| <= 1 + eps``."""
    mag = np.abs(z)
    target = np.clip(mag, 1.0 - eps_damp, 1.0 + eps_damp)
    return np.where(mag > 0, z * target / np.where(mag > 0, mag, 1.0), 1.0 + 0j)


def merge_poles(z: np.ndarray, tol: float = MERGE_TOL) -> np.ndarray:
    """Collapse poles whose angles lie within ``tol`` rad of each other."""
    if len(z) < 2:
        return z
    order = np.argsort(np.angle(z))
    z = z[order]
    keep = [z[0]]
    for zi in z[1:]:
        if abs(np.angle(zi * np.conj(keep[-1]))) < tol and abs(abs(zi) - abs(keep[-1])) < tol:
            continue
        keep.append(zi)
    if len(keep) > 1 and abs(np.angle(keep[0] * np.conj(keep[-1]))) < tol:
        keep.pop()
    return np.array(keep)


def vandermonde(z: np.ndarray, n: int) -> np.ndarray:
    """``V[i, l] = z_l**i`` for ``i = 0..n-1``."""
    return z[None, :] ** np.arange(n)[:, None]


def fit_amplitudes(y: np.ndarray, z: np.ndarray):
    """Least-squares amplitudes for fixed poles; returns ``(b, relative residual)``."""
    v = vandermonde(z, len(y))
    b, *_ = np.linalg.lstsq(v, y, rcond=None)
    ny = np.linalg.norm(y)
    res = np.linalg.norm(v @ b - y) / ny if ny > 0 else 0.0
    return b, float(res)


def pencil_poles(y: np.ndarray, n_terms: int, eps_damp: float = 0.0, clamp: bool = True):
    """Poles of a series from the shifted Hankel pencil.

    Returns ``(poles, reduced)``. The pencil uses ``ceil(N/2)`` as the window
    parameter and a rank-``L`` SVD truncation of the Hankel data matrix.
    """
    n = len(y)
    p = (n + 1) // 2
    p = max(p, n_terms)
    h = hankel(y[: n - p], y[n - p - 1 :])  # (N-P) x (P+1)
    u, s, vh = np.linalg.svd(h, full_matrices=False)
    if s[0] == 0:
        return np.array([1.0 + 0j]), n_terms > 1
    rank = int(np.sum(s > RANK_TOL * s[0]))
    order = min(n_terms, rank)
    reduced = order < n_terms
    v = vh[:order].T  # (P+1) x order; rows of h share the shift structure
    v1, v2 = v[:-1], v[1:]
    z = np.linalg.eigvals(np.linalg.pinv(v1) @ v2)
    if clamp:
        z = clamp_poles(z, eps_damp)
    merged = merge_poles(z)
    reduced = reduced or len(merged) < len(z)
    return merged, reduced


def pencil_fit(series, n_terms: int, sample_step: float = 1.0, t0: float = 0.0, eps_damp: float = 0.0) -> ExpModel:
    """Fit ``n_terms`` undamped exponentials to a uniformly sampled series.

    Parameters
    ----------
    series : array_like
        Complex samples ``y(t0), y(t0 + step), ...``.
    n_terms : int
        Model order ``L``; requires ``len(series) >= 2 * L``.
    sample_step : float
        Spacing between samples in subframes.
    t0 : float
        Time of the first sample.
    eps_damp : float
        Allowed deviation of pole magnitudes from 1.

    Returns
    -------
    ExpModel
        Poles per sample step and least-squares amplitudes at ``t0``.

    Raises
    ------
    OrderError
        If the series is shorter than ``2 * n_terms``.
    """
    y = _check_series(series, n_terms)
    if not np.any(y):
        return ExpModel(b=np.zeros(1, complex), z=np.ones(1, complex), sample_step=sample_step, t0=t0, reduced=n_terms > 1)
    z, reduced = pencil_poles(y, n_terms, eps_damp)
    b, res = fit_amplitudes(y, z)
    if reduced:
        warnings.warn(f"pencil rank below requested order {n_terms}; fitted {len(z)} terms", RuntimeWarning, stacklevel=2)
    return ExpModel(b=b, z=z, sample_step=sample_step, t0=t0, reduced=reduced, residual=res)


def mdl_order(series, l_max: int, penalty: float = 2.0) -> MdlResult:
    """Wax-Kailath MDL order estimate from Hankel singular values.

    The Hankel matrix gets ``l_max + 2`` columns when the series is long
    enough, so that even the largest order leaves two noise eigenvalues for
    the sphericity term. Overlapping Hankel rows are far from independent
    snapshots, which makes the plain criterion overfit; ``penalty`` scales
    the description-length term to compensate. Ties go to the smaller order.
    ``confident`` is False when the selected signal subspace is not
    separated from the noise floor by a clear eigenvalue gap.
    """
    y = _check_series(series, l_max)
    crit, lam = _mdl_criterion(y[None], l_max, penalty)
    crit, lam = crit[0], lam[0]
    if lam[0] == 0:
        return MdlResult(order=1, criterion=np.zeros(l_max), confident=False)
    order = int(np.argmin(crit)) + 1
    gap = lam[order - 1] / lam[order] if order < len(lam) else np.inf
    return MdlResult(order=order, criterion=crit, confident=bool(gap > 10.0))


def mdl_order_batch(series: np.ndarray, l_max: int, penalty: float = 2.0, allow_zero: bool = False) -> np.ndarray:
    """MDL orders of a batch of series, shape ``(B, N)``.

    With ``allow_zero`` the noise-only hypothesis competes as order 0, which
    lets callers drop series that carry no detectable exponential. All-zero
    rows give order 0 in that mode and 1 otherwise.
    """
    y = np.asarray(series, dtype=complex)
    _check_series(y[0], l_max)
    crit, raw = _mdl_criterion(y, l_max, penalty)
    order = np.argmin(crit, axis=1) + 1
    if allow_zero:
        zero = _mdl_noise_only(raw, y.shape[-1], l_max) <= crit.min(axis=1)
        order = np.where(zero | (raw[:, 0] == 0), 0, order)
    return order


def _hankel_cols(n: int, l_max: int) -> int:
    return l_max + 2 if n >= 2 * l_max + 3 else l_max + 1


def _mdl_noise_only(raw: np.ndarray, n: int, l_max: int) -> np.ndarray:
    rows = n - _hankel_cols(n, l_max) + 1
    lam = np.maximum(raw, 1e-12 * raw[:, :1])
    lam = np.where(lam > 0, lam, 1.0)
    return -rows * lam.shape[1] * (np.log(lam).mean(axis=1) - np.log(lam.mean(axis=1)))


def _mdl_criterion(y: np.ndarray, l_max: int, penalty: float):
    n = y.shape[-1]
    p = _hankel_cols(n, l_max)
    rows = n - p + 1
    h = y[:, np.arange(rows)[:, None] + np.arange(p)[None, :]]
    lam = np.linalg.svd(h, compute_uv=False) ** 2  # (B, q) descending
    raw = lam.copy()
    lam = np.maximum(lam, 1e-12 * lam[:, :1])
    lam = np.where(lam > 0, lam, 1.0)
    q = lam.shape[1]
    crit = np.full((len(y), l_max), np.inf)
    logs = np.log(lam)
    for k in range(1, min(l_max, q - 1) + 1):
        tail = lam[:, k:]
        log_geo = logs[:, k:].mean(axis=1)
        crit[:, k - 1] = -rows * (q - k) * (log_geo - np.log(tail.mean(axis=1))) + penalty * 0.5 * k * (2 * q - k) * np.log(rows)
    return crit, raw


def evaluate(model: ExpModel, t):
    """Evaluate a model at scalar or array time ``t`` (subframes)."""
    t = np.asarray(t, dtype=float)
    k = (t - model.t0) / model.sample_step
    # principal-branch fractional powers via exp(k log z)
    logs = np.log(model.z.astype(complex))
    out = np.exp(np.multiply.outer(k, logs)) @ model.b
    return out[()] if out.ndim == 0 else out
