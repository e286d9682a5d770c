"""Fast Matrix Pencil Prediction of angle-delay channel amplitudes.

Each angle-delay bin amplitude ``eta(t) = sum_l lambda_l z_l^t`` is pushed
``T_d`` subframes ahead without solving for the amplitudes ``lambda``: the
last row of the leading Hankel matrix already carries ``lambda_l z_l^t``
mixed through the Vandermonde factor ``Z2``, so undoing ``Z2`` and
advancing each pole by ``z^T_d`` gives the prediction directly.

All routines work on a batch of series, shape ``(B, N)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .expfit import OrderError, clamp_poles, mdl_order_batch

RANK_TOL = 1e-9
ACTIVE_TOL = 1e-10
WELL_COND = 1e-5


@dataclass(frozen=True)
class DelayBudget:
    """CSI delay components in subframes."""

    t_trs: float = 5.0
    t_svd: float = 5.0
    t_int: float = 3.0

    def __post_init__(self):
        if min(self.t_trs, self.t_svd, self.t_int) < 0:
            raise ValueError("delays must be nonnegative")

    @property
    def baseline(self) -> float:
        """Delay seen by schemes without interpolation (transmission plus SVD)."""
        return self.t_trs + self.t_svd

    @property
    def total(self) -> float:
        return self.t_trs + self.t_svd + self.t_int


def build_hankel_pair(series, l_ce: int):
    """Leading and lagging Hankel matrices of a series (or batch of series).

    ``eta0[i, c] = y[L - 1 + i - c]`` and ``eta1[i, c] = y[L + i - c]`` with
    zero-based sample indices, so every row runs backwards in time and
    ``eta1`` leads ``eta0`` by one sample. Both have shape ``(N - L, L)``.
    """
    y = np.asarray(series, dtype=complex)
    n = y.shape[-1]
    if l_ce < 1:
        raise OrderError("L_ce must be at least 1")
    if n < 2 * l_ce:
        raise OrderError(f"{n} samples cannot support L_ce={l_ce} (need N_ce >= 2*L_ce)")
    i = np.arange(n - l_ce)[:, None]
    c = np.arange(l_ce)[None, :]
    idx = l_ce - 1 + i - c
    return y[..., idx], y[..., idx + 1]


def pole_power(z: np.ndarray, k) -> np.ndarray:
    """``z**k`` by repeated squaring for integer ``k``; principal branch otherwise."""
    if float(k) != int(k) or k < 0:
        return np.exp(k * np.log(z.astype(complex)))
    k = int(k)
    out = np.ones_like(z, dtype=complex)
    base = z.astype(complex)
    while k:
        if k & 1:
            out = out * base
        base = base * base
        k >>= 1
    return out


def _poles_full_rank(eta0, eta1):
    """Pencil poles when ``eta0`` has full column rank: eig of ``eta0^+ eta1``."""
    e0h = eta0.conj().swapaxes(-1, -2)
    return np.linalg.eigvals(np.linalg.solve(e0h @ eta0, e0h @ eta1))


def _poles_truncated(eta0, eta1, rank: int):
    """Pencil poles from a rank-``rank`` truncation of ``eta0``."""
    u, s, vh = np.linalg.svd(eta0, full_matrices=False)
    ur, sr, vr = u[..., :rank], s[..., :rank], vh[..., :rank, :].conj().swapaxes(-1, -2)
    return np.linalg.eigvals((ur.conj().swapaxes(-1, -2) @ eta1 @ vr) / sr[..., :, None])


def _predict_rank(eta0, eta1, rank: int, l_ce: int, t_d, clamp: bool, well_conditioned: bool = False):
    """Prediction for a batch whose pencils all have the same rank.

    ``well_conditioned`` allows the normal-equation shortcut for the poles,
    which squares the condition number of ``eta0``.
    """
    z = _poles_full_rank(eta0, eta1) if well_conditioned else _poles_truncated(eta0, eta1, rank)
    if clamp:
        z = clamp_poles(z)
    z2 = z[..., :, None] ** (l_ce - np.arange(l_ce))[None, None, :]  # (B, r, L)
    last = eta1[..., -1, :]  # (B, L)
    r = None
    if rank == l_ce:
        try:
            r = np.linalg.solve(z2.swapaxes(-1, -2), last[..., None])[..., 0]
        except np.linalg.LinAlgError:
            pass  # coincident poles: least squares below
    if r is None:
        r = np.einsum("bl,blr->br", last, np.linalg.pinv(z2))
    return np.sum(r * pole_power(z, t_d) * z2[..., :, 0], axis=-1), z


def fmpp_predict(series, l_ce: int, t_d, clamp: bool = True, order=None, return_poles: bool = False):
    """Predict ``y(t_N + t_d)`` for one series or a batch.

    Parameters
    ----------
    series : array_like, shape (N,) or (B, N)
        Uniformly sampled amplitudes ``y(t_1) .. y(t_N)``.
    l_ce : int
        Model order; ``N >= 2 * l_ce``.
    t_d : int or float
        Prediction horizon in samples, counted from the latest sample.
    clamp : bool
        Project estimated poles onto the unit circle.
    order : int or array of int, optional
        Per-series order overrides (e.g. from MDL), each at most ``l_ce``.

    Returns
    -------
    complex or ndarray
        The predicted amplitude(s). With ``return_poles`` a list of per-series
        pole arrays is returned as well.

    Notes
    -----
    When a series' pencil has fewer than ``l_ce`` significant singular
    values (or a smaller ``order`` is requested) its poles are taken from a
    rank-truncated pencil, and a :class:`RuntimeWarning` reports any rank
    collapse.
    """
    y = np.asarray(series, dtype=complex)
    single = y.ndim == 1
    y = np.atleast_2d(y)
    if t_d < 0:
        raise ValueError("prediction horizon must be nonnegative")
    eta0, eta1 = build_hankel_pair(y, l_ce)
    s = np.linalg.svd(eta0, compute_uv=False)
    smax = s[:, :1]
    rank = np.sum(s > RANK_TOL * np.where(smax > 0, smax, 1.0), axis=1)
    rank = np.where(smax[:, 0] > 0, rank, 0)
    well = s[:, -1] > WELL_COND * np.where(smax[:, 0] > 0, smax[:, 0], 1.0)
    want = np.full(len(y), l_ce) if order is None else np.minimum(np.broadcast_to(order, (len(y),)), l_ce)
    if order is None and np.any(rank < l_ce):
        warnings.warn(f"{int(np.sum(rank < l_ce))} series have pencil rank below L_ce={l_ce}; order reduced", RuntimeWarning, stacklevel=2)
    rank = np.minimum(rank, want)
    out = np.zeros(len(y), dtype=complex)
    poles = [np.ones(0, complex)] * len(y)
    for r in np.unique(rank):
        if r == 0:
            continue
        for fast in (True, False):
            sel = np.flatnonzero((rank == r) & (well == fast) if r == l_ce else (rank == r) & (not fast))
            if len(sel) == 0:
                continue
            pred, z = _predict_rank(eta0[sel], eta1[sel], int(r), l_ce, t_d, clamp, fast)
            out[sel] = pred
            for k, i in enumerate(sel):
                poles[i] = z[k]
    res = out[0] if single else out
    if return_poles:
        return res, (poles[0] if single else poles)
    return res


class FlopPair(NamedTuple):
    mp: float
    fmpp: float

    @property
    def ratio(self) -> float:
        return self.fmpp / self.mp


def flop_compare_mp_fmpp(n_ce: int, l_ce: int, t_d: float, n_t: int, n_f: int) -> FlopPair:
    """Leading-order operation counts of classic Matrix Pencil prediction and FMPP.

    Both count per bin and multiply by the ``N_t*N_f`` bins, with unit
    constants. The pole-power term uses ``log2(T_d)`` (zero for ``T_d <= 1``).
    """
    if n_ce < 2 * l_ce:
        raise OrderError(f"N_ce={n_ce} cannot support L_ce={l_ce}")
    lg = l_ce * math.log2(t_d) if t_d > 1 else 0.0
    bins = n_t * n_f
    mp = bins * (n_ce**2 + l_ce**2 + lg)
    fm = bins * (l_ce**2 * (n_ce - l_ce) + lg)
    return FlopPair(float(mp), float(fm))


def active_bins(eta_hist: np.ndarray, threshold: float = ACTIVE_TOL) -> np.ndarray:
    """Mask of bins whose history energy is at least ``threshold`` of the total.

    ``eta_hist`` has shape ``(N, bins...)``; the mask has shape ``(bins...)``.
    """
    energy = np.sum(np.abs(eta_hist) ** 2, axis=0)
    total = energy.sum()
    if total == 0:
        return np.zeros(energy.shape, dtype=bool)
    return energy >= threshold * total


def predict_amplitudes(eta_hist: np.ndarray, l_ce: int, t_d, threshold: float = ACTIVE_TOL, order_mode: str = "fixed", clamp: bool = True) -> np.ndarray:
    """FMPP over every active bin of an amplitude history.

    Parameters
    ----------
    eta_hist : ndarray, shape (N_ce, n, M)
        Angle-delay amplitudes, oldest first, one sample per subframe.
    order_mode : {"fixed", "mdl"}
        Use ``l_ce`` for every bin or let MDL pick up to ``l_ce`` per bin.

    Returns
    -------
    ndarray, shape (n, M)
        Predicted amplitudes ``t_d`` subframes after the last sample;
        inactive bins are zero.
    """
    return predict_amplitudes_batch(eta_hist[None], l_ce, t_d, threshold, order_mode, clamp)[0]


def predict_amplitudes_batch(eta_hists: np.ndarray, l_ce: int, t_d, threshold: float = ACTIVE_TOL, order_mode: str = "fixed", clamp: bool = True) -> np.ndarray:
    """:func:`predict_amplitudes` for a stack of independent histories, shape ``(B, N_ce, ...)``.

    The energy threshold is applied per history; all active series of the
    stack go through a single batched pencil solve.
    """
    energy = np.sum(np.abs(eta_hists) ** 2, axis=1)  # (B, bins...)
    total = energy.reshape(len(energy), -1).sum(axis=1)
    mask = energy >= threshold * total.reshape((-1,) + (1,) * (energy.ndim - 1))
    mask &= (total > 0).reshape((-1,) + (1,) * (energy.ndim - 1))
    out = np.zeros(energy.shape, dtype=complex)
    series = np.moveaxis(eta_hists, 1, -1)[mask]  # (S, N)
    if series.shape[0] == 0:
        return out
    order = None
    if order_mode == "mdl":
        order = mdl_order_batch(series, l_ce, allow_zero=True)
    elif order_mode != "fixed":
        raise ValueError(f"unknown order mode {order_mode!r}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        out[mask] = fmpp_predict(series, l_ce, t_d, clamp=clamp, order=order)
    return out


def predict_channel(eta_hist: np.ndarray, transform, t_d, l_ce: int, threshold: float = ACTIVE_TOL, order_mode: str = "fixed") -> np.ndarray:
    """Predicted stacked channel ``t_d`` subframes after the last history sample.

    ``transform`` is either the dense unitary ``W`` or an object with an
    ``inverse`` method (:class:`~egvp.channel.FastAngleDelay`).
    """
    eta_hat = predict_amplitudes(eta_hist, l_ce, t_d, threshold, order_mode)
    if hasattr(transform, "inverse"):
        return transform.inverse(eta_hat)
    return np.asarray(transform) @ eta_hat
