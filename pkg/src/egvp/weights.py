"""Eigenvector prediction through channel weights.

Every retained eigenvector of ``H H^H`` is a combination of the per-antenna
channels, ``u_m = sum_j a_{m,j} h_j`` with ``a_{m,j} = h_j^H u_m / chi_m``.
The weights evolve far more smoothly than the eigenvectors themselves, so
they are fitted with complex-exponential models across the SVD samples of a
window and evaluated in the gaps.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .channel import SPEED_OF_LIGHT
from .eigen import EigenSample, SvdSchedule, calibration_phases, sample_eigenvectors
from .expfit import ExpModel, OrderError, evaluate, mdl_order, pencil_fit

CALIBRATION = "anchor"


class DegenerateStreamError(ValueError):
    pass


@dataclass(frozen=True)
class WeightMatrix:
    """``a[j, m]`` is the weight of antenna channel ``j`` in eigenvector ``m``."""

    a: np.ndarray
    t: float = 0.0
    residual: float = 0.0
    extrapolated: bool = False


@dataclass(frozen=True)
class WeightModelBank:
    """One exponential model per weight trajectory, ``models[j][m]``."""

    models: tuple
    t_svd: int
    t_in: int
    t_ed: int

    @property
    def shape(self):
        return len(self.models), len(self.models[0])

    def orders(self) -> np.ndarray:
        return np.array([[mod.order for mod in row] for row in self.models])


def decompose_weights(sample: EigenSample, h, eps: float = 1e-12) -> WeightMatrix:
    """Channel weights of calibrated eigenvectors.

    Parameters
    ----------
    sample : EigenSample
        Eigenvectors ``u`` and singular values of ``h``.
    h : ndarray or ChannelBlock
        The stacked channel the eigenvectors came from, shape ``(n, M)``.
    eps : float
        Streams with ``chi_m <= eps * chi_1`` are dropped (zero weights).

    Returns
    -------
    WeightMatrix
        ``a`` such that ``u = h @ a``; ``residual`` is the relative error of
        that identity over the kept streams.
    """
    h = np.asarray(getattr(h, "h", h))
    u, chi = sample.u, sample.chi
    if h.shape[0] != u.shape[0]:
        raise ValueError(f"channel rows {h.shape[0]} do not match eigenvector length {u.shape[0]}")
    keep = chi > eps * max(chi[0], np.finfo(float).tiny)
    if not np.all(keep):
        warnings.warn(f"dropping streams {np.flatnonzero(~keep).tolist()} with vanishing eigenvalue", RuntimeWarning, stacklevel=2)
    a = np.zeros((h.shape[1], u.shape[1]), dtype=complex)
    a[:, keep] = (h.conj().T @ u[:, keep]) / chi[keep]
    un = np.linalg.norm(u[:, keep])
    res = float(np.linalg.norm(h @ a[:, keep] - u[:, keep]) / un) if un > 0 else 0.0
    return WeightMatrix(a=a, t=sample.t, residual=res)


def calibrate_weights(weights, reference: np.ndarray | None = None, mode: str = "reference") -> list:
    """Remove the arbitrary per-stream SVD phase from a window of weight matrices.

    Parameters
    ----------
    weights : sequence of WeightMatrix
    reference : ndarray, optional
        Weight matrix defining the alignment (defaults to the first sample).
    mode : {"reference", "anchor"}
        ``"reference"`` rotates stream ``m`` so that ``a_m(t)^H a_m(t_ref)``
        is real and nonnegative. ``"anchor"`` instead makes the entry
        ``a_{m,j*}(t)`` real and nonnegative, where ``j*`` is the largest
        entry of the reference; the remaining entries then carry only the
        Doppler differences relative to channel ``j*``.

    Notes
    -----
    Aligning weights rather than eigenvectors keeps the trajectories on
    their exponential model; the eigenvector overlap ``u_m(t)^H u_m(t_ref)``
    has a time-varying phase of its own.
    """
    ref = weights[0].a if reference is None else reference
    if mode == "anchor":
        anchor = np.argmax(np.abs(ref), axis=0)
        cols = np.arange(ref.shape[1])
    elif mode != "reference":
        raise ValueError(f"unknown calibration mode {mode!r}")
    out = []
    for w in weights:
        if mode == "anchor":
            pivot = w.a[anchor, cols]
            mag = np.abs(pivot)
            delta = np.where(mag > 0, pivot.conj() / np.where(mag > 0, mag, 1.0), 1.0)
        else:
            delta, _ = calibration_phases(w.a, ref)
        out.append(WeightMatrix(a=w.a * delta, t=w.t, residual=w.residual))
    return out


def _series_order(series: np.ndarray, l_svd: int, order_mode: str) -> int:
    if order_mode == "fixed":
        return l_svd
    if order_mode == "mdl":
        return mdl_order(series, l_svd).order
    raise ValueError(f"unknown order mode {order_mode!r}")


def fit_weight_models(weight_samples, t_svd: int, l_svd: int, order_mode: str = "fixed", calibrate: bool | str = True) -> WeightModelBank:
    """Fit an exponential model to each weight trajectory of a window.

    Parameters
    ----------
    weight_samples : sequence of WeightMatrix
        ``N_svd`` samples spaced ``t_svd`` subframes apart.
    t_svd : int
        SVD cycle in subframes.
    l_svd : int
        Model order (``"fixed"``) or the largest order MDL may pick (``"mdl"``).
    calibrate : bool or {"reference", "anchor"}
        Phase-align streams across samples first (see :func:`calibrate_weights`);
        True selects ``CALIBRATION``.

    Raises
    ------
    OrderError
        If ``N_svd < 2 * l_svd``.
    """
    n = len(weight_samples)
    if n < 2 * l_svd:
        raise OrderError(f"N_svd={n} samples cannot support L_svd={l_svd} (need N_svd >= 2*L_svd)")
    if calibrate:
        mode = CALIBRATION if calibrate is True else calibrate
        weight_samples = calibrate_weights(weight_samples, mode=mode)
    stack = np.stack([w.a for w in weight_samples])  # (N_svd, M, M)
    t_in = weight_samples[0].t
    models = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for j in range(stack.shape[1]):
            row = []
            for m in range(stack.shape[2]):
                series = stack[:, j, m]
                order = _series_order(series, l_svd, order_mode) if np.any(series) else 1
                row.append(pencil_fit(series, order, sample_step=t_svd, t0=t_in))
            models.append(tuple(row))
    return WeightModelBank(models=tuple(models), t_svd=t_svd, t_in=int(t_in), t_ed=int(t_in + (n - 1) * t_svd))


def interpolate_weights(bank: WeightModelBank, t_p: float) -> WeightMatrix:
    """Evaluate every weight model at subframe ``t_p``.

    Times outside ``[t_in, t_ed]`` are allowed and tagged as extrapolated.
    """
    a = np.array([[evaluate(mod, t_p) for mod in row] for row in bank.models])
    outside = t_p < bank.t_in or t_p > bank.t_ed
    return WeightMatrix(a=a, t=t_p, extrapolated=bool(outside))


def interpolate_weights_many(bank: WeightModelBank, ts) -> np.ndarray:
    """Weights at every time in ``ts``, shape ``(len(ts), M, M)``."""
    ts = np.asarray(ts, dtype=float)
    return np.stack([[evaluate(mod, ts) for mod in row] for row in bank.models]).transpose(2, 0, 1)


def reconstruct_eigenvector(weights, h, normalize: bool = True) -> np.ndarray:
    """``u_hat = h @ a`` with optional unit-norm columns.

    Raises
    ------
    DegenerateStreamError
        If any reconstructed column is zero.
    """
    a = getattr(weights, "a", weights)
    h = np.asarray(getattr(h, "h", h))
    u = h @ a
    if not normalize:
        return u
    nrm = np.linalg.norm(u, axis=-2, keepdims=True)
    if np.any(nrm == 0):
        raise DegenerateStreamError("reconstructed eigenvector is zero")
    return u / nrm


class SvdCycleBound(NamedTuple):
    subframes: float
    duration: float
    exact: float


def max_svd_cycle(v_max: float, f0: float, delta_t: float) -> SvdCycleBound:
    """Longest SVD cycle that still samples the weight Doppler at Nyquist rate.

    Parameters
    ----------
    v_max : float
        Largest UE speed in m/s.
    f0 : float
        Carrier frequency in Hz.
    delta_t : float
        Subframe duration in s.

    Returns
    -------
    SvdCycleBound
        ``subframes`` is ``c / (2 v f0)`` rounded to the nearest whole
        subframe (at least one), ``duration`` the matching time in s and
        ``exact`` the unrounded bound in s. A zero speed is unbounded and
        returns ``inf`` everywhere.
    """
    if v_max < 0:
        raise ValueError("speed must be nonnegative")
    if v_max == 0:
        return SvdCycleBound(math.inf, math.inf, math.inf)
    exact = SPEED_OF_LIGHT / (2 * v_max * f0)
    n = max(1, int(np.floor(exact / delta_t + 0.5)))
    return SvdCycleBound(n, n * delta_t, exact)


def run_egvp_interval(trajectory, schedule: SvdSchedule, l_svd: int | None = None, order_mode: str = "fixed", t_offset: int = 0, m: int | None = None):
    """EGVP over one window ``[t_in, t_ed]``.

    Parameters
    ----------
    trajectory : ndarray, shape (T, n, M)
        Channels (true or predicted); entry ``i`` is subframe ``t_offset + i``.
    schedule : SvdSchedule
    l_svd : int, optional
        Defaults to ``schedule.l_svd``.
    m : int, optional
        Streams to predict (defaults to ``M``).

    Returns
    -------
    u : ndarray, shape (t_ed - t_in + 1, n, m)
        Sample subframes carry the calibrated SVD samples unchanged; gap
        subframes carry unit-norm reconstructions.
    samples : list of EigenSample
    """
    l_svd = schedule.l_svd if l_svd is None else l_svd
    samples = sample_eigenvectors(trajectory, schedule, m, t_offset)
    weights = [decompose_weights(s, trajectory[s.t - t_offset]) for s in samples]
    bank = fit_weight_models(weights, schedule.t_svd, l_svd, order_mode)
    ts = np.arange(schedule.t_in, schedule.t_ed + 1)
    a = interpolate_weights_many(bank, ts)
    h = trajectory[ts - t_offset]
    u = reconstruct_eigenvector(a, h)
    for s in samples:
        u[s.t - schedule.t_in] = s.u
    return u, samples
