"""Periodic SVD sampling, phase calibration and eigen zero-forcing precoders."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


class CalibrationError(ValueError):
    pass


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class EigenSample:
    """Calibrated M-truncated eigenvectors of one stacked channel.

    ``u`` has shape ``(N_f*N_t, M)``; ``sigma`` holds the singular values in
    descending order and ``chi = sigma**2``.
    """

    u: np.ndarray
    sigma: np.ndarray
    t: int = 0

    @property
    def chi(self) -> np.ndarray:
        return self.sigma**2


@dataclass(frozen=True)
class SvdSchedule:
    """Periodic SVD sampling inside one EGVP interval.

    Samples are taken at ``t_in + k*T_svd`` for ``k = 0..N_svd-1``; the
    interval spans ``[t_in, t_ed]`` with ``t_ed = t_in + (N_svd-1)*T_svd``.
    """

    t_svd: int = 5
    n_svd: int = 7
    t_in: int = 0
    l_svd: int = 1

    def __post_init__(self):
        if self.t_svd < 1:
            raise ScheduleError("T_svd must be at least one subframe")
        if self.n_svd < 2 * self.l_svd:
            raise ScheduleError(f"N_svd={self.n_svd} violates N_svd >= 2*L_svd={2 * self.l_svd}")
        if self.t_in < 0:
            raise ScheduleError("t_in must be nonnegative")

    @property
    def t_ed(self) -> int:
        return self.t_in + (self.n_svd - 1) * self.t_svd

    @property
    def t_egsp(self) -> int:
        return self.n_svd * self.t_svd

    @property
    def sample_times(self) -> np.ndarray:
        return self.t_in + self.t_svd * np.arange(self.n_svd)

    def is_sample(self, t) -> np.ndarray:
        return np.mod(np.asarray(t) - self.t_in, self.t_svd) == 0


def svd_truncate(h, m: int | None = None):
    """Left singular vectors and singular values of a stacked channel.

    Returns ``(u, sigma, vh)`` with ``u`` of shape ``(n, M)``.
    """
    h = np.asarray(getattr(h, "h", h))
    if not np.all(np.isfinite(h)):
        raise ValueError("channel contains non-finite entries")
    m = h.shape[1] if m is None else m
    if m > h.shape[0]:
        raise ValueError("cannot keep more streams than channel rows")
    u, s, vh = np.linalg.svd(h, full_matrices=False)
    return u[:, :m], s[:m], vh[:m]


def phase_calibrate(raw_u: np.ndarray, reference_u: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    """Rotate each column so that its inner product with the reference is real and nonnegative.

    Columns with (numerically) zero overlap are left unrotated and a
    :class:`RuntimeWarning` is issued; use :func:`calibration_phases` to get
    the mask directly.
    """
    delta, ok = calibration_phases(raw_u, reference_u, tol)
    if not np.all(ok):
        warnings.warn(f"calibration undefined for streams {np.flatnonzero(~ok).tolist()}", RuntimeWarning, stacklevel=2)
    return raw_u * delta


def calibration_phases(raw_u: np.ndarray, reference_u: np.ndarray, tol: float = 1e-14):
    """Unit-modulus factors ``u_m^H u_ref,m / |u_m^H u_ref,m|`` and a validity mask."""
    if raw_u.shape != reference_u.shape:
        raise CalibrationError(f"shape mismatch {raw_u.shape} vs {reference_u.shape}")
    ip = np.sum(raw_u.conj() * reference_u, axis=0)
    mag = np.abs(ip)
    scale = np.linalg.norm(raw_u, axis=0) * np.linalg.norm(reference_u, axis=0)
    ok = mag > tol * np.maximum(scale, 1e-300)
    delta = np.where(ok, ip / np.where(ok, mag, 1.0), 1.0)
    return delta, ok


def eigen_sample(h, reference: np.ndarray | None = None, t: int = 0, m: int | None = None) -> EigenSample:
    u, s, _ = svd_truncate(h, m)
    if reference is not None:
        u = phase_calibrate(u, reference)
    return EigenSample(u=u, sigma=s, t=int(t))


def sample_eigenvectors(trajectory, schedule: SvdSchedule, m: int | None = None, t_offset: int = 0):
    """Calibrated eigenvector samples at every schedule subframe.

    Parameters
    ----------
    trajectory : ndarray, shape (T, n, M)
        Stacked channels; entry ``i`` belongs to subframe ``t_offset + i``.
    schedule : SvdSchedule
    m : int, optional
        Streams to keep (defaults to all channel columns).

    Returns
    -------
    list of EigenSample
        The first sample of the window is the calibration reference.
    """
    idx = schedule.sample_times - t_offset
    if idx[0] < 0 or idx[-1] >= len(trajectory):
        raise ScheduleError(f"trajectory covers subframes {t_offset}..{t_offset + len(trajectory) - 1}, schedule needs {schedule.t_in}..{schedule.t_ed}")
    out = []
    ref = None
    for t, i in zip(schedule.sample_times, idx):
        s = eigen_sample(trajectory[i], ref, t, m)
        if ref is None:
            ref = s.u
        out.append(s)
    return out


def subcarrier_slice(u: np.ndarray, f: int, n_f: int) -> np.ndarray:
    """Rows of a stacked vector that belong to frequency sample ``f`` (length ``N_t``)."""
    return u[f::n_f]


def ezf_precoders(dominant, f: int | None, n_f: int, noise_power: float = 0.0) -> np.ndarray:
    """Eigen zero-forcing precoders for one frequency sample.

    Parameters
    ----------
    dominant : ndarray, shape (n, K) or (N_t, K)
        Dominant (stacked) eigenvector of each UE. If ``f`` is None the
        columns are taken as per-subcarrier slices already.
    f : int or None
        Frequency sample to slice.
    n_f : int
        Number of frequency samples in the stacked vector.
    noise_power : float
        Optional regularization added to the Gram diagonal (0 gives plain ZF).

    Returns
    -------
    ndarray, shape (N_t, K)
        Unit-norm precoders ``g_k``.
    """
    ubar = dominant if f is None else subcarrier_slice(dominant, f, n_f)
    norms = np.linalg.norm(ubar, axis=0)
    ubar = ubar / np.where(norms > 0, norms, 1.0)
    gram = ubar.conj().T @ ubar
    k = gram.shape[0]
    gram = gram + noise_power * np.eye(k)
    if np.linalg.cond(gram) > 1e12:
        warnings.warn("eigen-slice Gram matrix is singular; applying diagonal loading", RuntimeWarning, stacklevel=2)
        gram = gram + 1e-12 * np.real(np.trace(gram)) * np.eye(k)
    g = ubar @ np.linalg.inv(gram)
    gn = np.linalg.norm(g, axis=0)
    return g / np.where(gn > 0, gn, 1.0)


def ezf_all(dominant: np.ndarray, n_f: int, noise_power: float = 0.0) -> np.ndarray:
    """EZF precoders for every frequency sample at once.

    ``dominant`` has shape ``(..., n, K)``; the result has shape
    ``(..., N_f, N_t, K)``. Singular Gram matrices get the same diagonal
    loading as :func:`ezf_precoders`, without a warning per subcarrier.
    """
    n = dominant.shape[-2]
    n_t = n // n_f
    u = dominant.reshape(*dominant.shape[:-2], n_t, n_f, dominant.shape[-1])
    u = np.swapaxes(u, -3, -2)  # (..., N_f, N_t, K)
    u = u / np.maximum(np.linalg.norm(u, axis=-2, keepdims=True), 1e-300)
    gram = np.swapaxes(u.conj(), -1, -2) @ u
    k = gram.shape[-1]
    eye = np.eye(k)
    tr = np.real(np.trace(gram, axis1=-2, axis2=-1))[..., None, None]
    gram = gram + noise_power * eye + 1e-12 * tr * eye
    g = u @ np.linalg.inv(gram)
    return g / np.maximum(np.linalg.norm(g, axis=-2, keepdims=True), 1e-300)
