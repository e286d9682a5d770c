"""Seeded Monte Carlo runs of every precoding scheme and result emission."""
from __future__ import annotations

import csv
import io
import json
import math
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..baselines import align, wiener_fit, wiener_predict
from ..channel import FastAngleDelay, channel_trajectory, generate_path_set
from ..eigen import SvdSchedule, ezf_all
from ..fmpp import flop_compare_mp_fmpp, predict_amplitudes_batch
from ..metrics import FlopModel, eigen_nmse_batch, link_gains, noise_power_from_snr, se_from_gains
from ..weights import run_egvp_interval
from .config import ScenarioConfig

CSV_FIELDS = ("scheme", "axis", "axis_value", "snr_db", "se", "eigen_nmse", "channel_nmse", "flops", "n_seeds")
TIMING_FIELD = "wall_time_s"


@dataclass(frozen=True)
class ResultRow:
    """Seed-averaged metrics of one scheme at one axis point and SNR."""

    scheme: str
    axis: str
    axis_value: float
    snr_db: float
    se: float
    eigen_nmse: float
    channel_nmse: float
    flops: float
    n_seeds: int
    wall_time_s: float = 0.0

    def sort_key(self):
        return (self.axis, self.axis_value, self.scheme, self.snr_db)


@dataclass(frozen=True)
class Timeline:
    """Subframe bookkeeping shared by every scheme of a run.

    SVD samples sit at multiples of ``t_svd``; EGVP windows span
    ``span = (n_svd - 1) * t_svd`` and share their boundary samples.
    Metrics cover ``[t_start, t_end]``; channels exist on ``[0, t_last]``.
    """

    t_svd: int
    span: int
    t_start: int
    t_end: int
    t_last: int

    @property
    def eval_ts(self) -> np.ndarray:
        return np.arange(self.t_start, self.t_end + 1)

    @property
    def all_ts(self) -> np.ndarray:
        return np.arange(self.t_last + 1)


def make_timeline(cfg: ScenarioConfig) -> Timeline:
    s = cfg.schedule
    span = (s.n_svd - 1) * s.t_svd
    burn = max(
        cfg.fmpp_delay + cfg.fmpp.n_ce,
        cfg.baseline_delay + 2 * cfg.l_w * s.t_svd,
        cfg.baseline_delay + span,
    )
    t_start = math.ceil(burn / span) * span
    t_end = t_start + cfg.n_subframes - 1
    t_last = math.ceil(t_end / span) * span
    return Timeline(s.t_svd, span, t_start, t_end, t_last)


def _seed_seq(*key) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(k) for k in key])


def point_key(axis: str, value) -> int:
    """Stable 32-bit key of a sweep point used to split noise streams."""
    return zlib.crc32(f"{axis}={value!r}".encode())


def add_sampling_noise(x, snr_db, seed=None):
    """Copy of ``x`` plus circular complex Gaussian noise at ``snr_db`` per element.

    The noise variance is the mean element power of ``x`` scaled by
    ``10**(-snr_db/10)``. ``snr_db`` of None or ``inf`` returns ``x`` unchanged.
    """
    x = np.asarray(x)
    if snr_db is None or np.isinf(snr_db):
        return x.copy()
    if np.isnan(snr_db):
        raise ValueError("snr_db must not be NaN")
    rng = np.random.default_rng(seed)
    var = np.mean(np.abs(x) ** 2) * 10.0 ** (-snr_db / 10.0)
    noise = rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape)
    return x + np.sqrt(var / 2.0) * noise


def ue_path_set(cfg: ScenarioConfig, seed: int, ue: int):
    ch = cfg.channel
    return generate_path_set(
        _seed_seq(seed, 0, ue), ch.n_paths, cfg.v, cfg.geometry, cfg.grid, ch.delay_spread,
        n_rx=cfg.m, on_grid=ch.on_grid, grid_bias=ch.grid_bias,
    )


def dominant_eigenvectors(h: np.ndarray) -> np.ndarray:
    """First left singular vector of every stacked channel, shape ``(T, n)``."""
    u, _, _ = np.linalg.svd(h, full_matrices=False)
    return u[..., 0]


def _sample_grid(tl: Timeline, h: np.ndarray):
    """Chain-calibrated dominant eigenvectors at every SVD sample."""
    st = np.arange(0, tl.t_last + 1, tl.t_svd)
    us = dominant_eigenvectors(h[st])
    for i in range(1, len(us)):
        us[i] = align(us[i][:, None], us[i - 1][:, None])[:, 0]
    return st, us


def scheme_full_time(h, tl, cfg, delay):
    return dominant_eigenvectors(h[tl.eval_ts - delay])


def scheme_periodic(h, tl, cfg, delay):
    st, us = _sample_grid(tl, h)
    ts = tl.eval_ts - delay
    return us[ts // tl.t_svd]


def scheme_agmi(h, tl, cfg, delay):
    st, us = _sample_grid(tl, h)
    ts = tl.eval_ts - delay
    k = ts // tl.t_svd
    c = ((k + 1) * tl.t_svd - ts) / tl.t_svd
    k1 = np.minimum(k + 1, len(us) - 1)
    u = c[:, None] * us[k] + (1 - c)[:, None] * us[k1]
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def scheme_wiener(h, tl, cfg, delay):
    """Wiener prediction of the eigenvector at ``t`` from samples up to ``t - delay``.

    The filter is trained per prediction on the latest ``max(N_svd, 2 L_w)``
    calibrated samples; horizons are in units of ``T_svd``.
    """
    st, us = _sample_grid(tl, h)
    n_fit = max(cfg.schedule.n_svd, 2 * cfg.l_w)
    out = np.empty((len(tl.eval_ts), us.shape[1]), dtype=complex)
    cache = {}
    for i, t in enumerate(tl.eval_ts):
        k = (t - delay) // tl.t_svd
        horizon = (t - st[k]) / tl.t_svd
        if horizon == 0:
            out[i] = us[k]
            continue
        if k + 1 < n_fit:
            out[i] = us[k]
            continue
        key = (k, horizon)
        if key not in cache:
            train = us[k - n_fit + 1 : k + 1]
            filt = wiener_fit(train, cfg.l_w, horizon)
            cache[key] = wiener_predict(filt, train[-cfg.l_w :])
        out[i] = cache[key]
    return out / np.linalg.norm(out, axis=1, keepdims=True)


def _egvp_over(h, t0, t1, cfg, t_offset=0):
    """EGVP dominant eigenvectors on ``[t0, t1]``; ``t0`` must be a window boundary."""
    s = cfg.schedule
    span = (s.n_svd - 1) * s.t_svd
    out = np.empty((t1 - t0 + 1, h.shape[1]), dtype=complex)
    for w0 in range(t0, t1, span):
        sched = SvdSchedule(t_svd=s.t_svd, n_svd=s.n_svd, t_in=w0, l_svd=s.l_svd)
        u, _ = run_egvp_interval(h, sched, s.l_svd, s.order_mode, t_offset=t_offset, m=1)
        out[w0 - t0 : w0 - t0 + span + 1] = u[:, :, 0]
    return out


def scheme_egvp(h, tl, cfg, delay):
    t0 = ((tl.t_start - delay) // tl.span) * tl.span
    u = _egvp_over(h, t0, tl.t_last, cfg)
    return u[tl.eval_ts - delay - t0]


def predicted_channels(h_obs, tl, cfg, delay, transform, chunk: int = 64):
    """FMPP channel predictions on ``[t_start, t_last]`` from history ending ``delay`` earlier."""
    f = cfg.fmpp
    eta = transform.forward(h_obs)
    ts = np.arange(tl.t_start, tl.t_last + 1)
    out = np.empty((len(ts),) + h_obs.shape[1:], dtype=complex)
    lags = np.arange(-f.n_ce + 1, 1)
    for c in range(0, len(ts), chunk):
        idx = ts[c : c + chunk, None] - delay + lags[None, :]
        pred = predict_amplitudes_batch(eta[idx], f.l_ce, delay, f.threshold, f.order_mode)
        out[c : c + chunk] = transform.inverse(pred)
    return out


SCHEMES = {
    "full_time": scheme_full_time,
    "periodic": scheme_periodic,
    "agmi": scheme_agmi,
    "wiener": scheme_wiener,
    "egvp": scheme_egvp,
}


def scheme_flops(cfg: ScenarioConfig, scheme: str) -> float:
    s = cfg.schedule
    model = FlopModel(n_t=cfg.geometry.n_t, n_f=cfg.grid.n_f, m=cfg.m, n_svd=s.n_svd, t_svd=s.t_svd)
    if scheme != "egvp_fmpp":
        return model.count(scheme)
    f = cfg.fmpp
    per_subframe = flop_compare_mp_fmpp(f.n_ce, f.l_ce, max(cfg.fmpp_delay, 1), cfg.geometry.n_t, cfg.grid.n_f).fmpp
    return model.count("egvp") + per_subframe * cfg.m * s.n_svd * s.t_svd


def simulate(cfg: ScenarioConfig, seed: int, key: int = 0) -> dict:
    """Run every configured scheme for one seed.

    Returns
    -------
    dict
        ``{scheme: {"se": array over cfg.snr_db, "eigen_nmse": float,
        "eigen_nmse_t": array over eval subframes (UE average),
        "channel_nmse": float, "wall_time_s": float}}`` plus a ``"_timeline"``
        entry.
    """
    tl = make_timeline(cfg)
    transform = FastAngleDelay(cfg.geometry, cfg.grid)
    h_true, h_obs = [], []
    for ue in range(cfg.k):
        h = channel_trajectory(ue_path_set(cfg, seed, ue), cfg.geometry, cfg.grid, tl.all_ts)
        h_true.append(h)
        h_obs.append(add_sampling_noise(h, cfg.sampling_snr_db, _seed_seq(seed, 1, key, ue)))
    u_true = np.stack([dominant_eigenvectors(h[tl.eval_ts]) for h in h_true])  # (K, T, n)
    h_eval = np.stack([h[tl.eval_ts] for h in h_true])  # (K, T, n, M)
    n_f, n_t = cfg.grid.n_f, cfg.geometry.n_t
    # per-(t, f) channel slices H_k(t, f) = h[f::N_f]^H, shape (T, N_f, K, M, N_t)
    slices = h_eval.reshape(cfg.k, len(tl.eval_ts), n_t, n_f, cfg.m).transpose(1, 3, 0, 4, 2).conj()

    results = {"_timeline": tl}
    for scheme in cfg.schemes:
        start = time.perf_counter()
        est_h = None
        if scheme == "egvp_fmpp":
            delay = cfg.fmpp_delay
            u_hat, est_h = [], []
            for h in h_obs:
                hp = predicted_channels(h, tl, cfg, delay, transform)
                est_h.append(hp[: len(tl.eval_ts)])
                u_hat.append(_egvp_over(hp, tl.t_start, tl.t_last, cfg, t_offset=tl.t_start)[: len(tl.eval_ts)])
            u_hat = np.stack(u_hat)
            est_h = np.stack(est_h)
        else:
            delay = cfg.baseline_delay
            u_hat = np.stack([SCHEMES[scheme](h, tl, cfg, delay) for h in h_obs])
            est_h = np.stack([h[tl.eval_ts - delay] for h in h_obs])
        nmse_t = eigen_nmse_batch(u_true, u_hat)  # (K, T)
        g = ezf_all(u_hat.transpose(1, 2, 0), n_f)  # (T, N_f, N_t, K)
        gain = link_gains(slices, g)  # (T, N_f, K, K)
        se = np.array([se_from_gains(gain, noise_power_from_snr(snr)).sum_se for snr in cfg.snr_db])
        ch = float(np.sum(np.abs(h_eval - est_h) ** 2) / np.sum(np.abs(h_eval) ** 2))
        results[scheme] = {
            "se": se,
            "eigen_nmse": float(nmse_t.mean()),
            "eigen_nmse_t": nmse_t.mean(axis=0),
            "channel_nmse": ch,
            "wall_time_s": time.perf_counter() - start,
        }
    return results


def _points(cfg: ScenarioConfig):
    if not cfg.sweep:
        return [("", 0.0, cfg)]
    (axis, values), = cfg.sweep.items()
    return [(axis, v, cfg.with_axis(axis, v)) for v in values]


def _work(args):
    axis, value, cfg, seed = args
    try:
        return axis, value, seed, simulate(cfg, seed, point_key(axis, value)), None
    except Exception as exc:  # recorded per row, the sweep continues
        return axis, value, seed, None, f"{type(exc).__name__}: {exc}"


def run_scenario(cfg: ScenarioConfig, workers: int = 1, progress=None):
    """Every (axis point, seed) of a scenario, aggregated over seeds.

    Returns
    -------
    rows : list of ResultRow
        Sorted by axis value, scheme and SNR.
    failures : list of str
        One message per failed (axis point, seed).
    """
    tasks = [(axis, value, pcfg, seed) for axis, value, pcfg in _points(cfg) for seed in pcfg.seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(_work, tasks))
    else:
        outs = []
        for task in tasks:
            outs.append(_work(task))
            if progress:
                progress(len(outs), len(tasks))
    outs.sort(key=lambda o: (o[0], float(o[1]) if o[1] is not None else -np.inf, o[2]))
    failures = [f"{axis}={value} seed={seed}: {err}" for axis, value, seed, _, err in outs if err]
    rows = []
    for axis, value, pcfg in _points(cfg):
        got = [o[3] for o in outs if o[0] == axis and o[1] == value and o[3] is not None]
        if not got:
            continue
        for scheme in pcfg.schemes:
            se = np.mean([g[scheme]["se"] for g in got], axis=0)
            nm = float(np.mean([g[scheme]["eigen_nmse"] for g in got]))
            ch = float(np.mean([g[scheme]["channel_nmse"] for g in got]))
            wt = float(np.sum([g[scheme]["wall_time_s"] for g in got]))
            fl = scheme_flops(pcfg, scheme)
            for snr, val in zip(pcfg.snr_db, se):
                rows.append(ResultRow(scheme, axis, _num(value), float(snr), float(val), nm, ch, fl, len(got), wt))
    rows.sort(key=ResultRow.sort_key)
    return rows, failures


def _num(value) -> float:
    return float("nan") if value is None else float(value)


def _fmt(value) -> str:
    if isinstance(value, float):
        return "%.9g" % value
    return str(value)


def emit_results(rows, path=None, fmt: str = "csv", timing: bool = False) -> str:
    """Write rows as CSV (fixed header and column order, 9 significant digits) or JSON.

    Wall time is left out unless ``timing`` is set, so repeated runs give
    byte-identical files. Returns the text; writes it when ``path`` is given.
    """
    fields = CSV_FIELDS + ((TIMING_FIELD,) if timing else ())
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(fields)
        for r in rows:
            d = asdict(r)
            writer.writerow([_fmt(d[f]) for f in fields])
        text = buf.getvalue()
    elif fmt == "json":
        text = json.dumps([{f: asdict(r)[f] for f in fields} for r in rows], indent=2, allow_nan=True) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        Path(path).write_text(text)
    return text


def read_results(path_or_text) -> list:
    """Parse a CSV written by :func:`emit_results` back into rows."""
    text = path_or_text
    if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text):
        text = Path(path_or_text).read_text()
    rows = []
    for d in csv.DictReader(io.StringIO(text)):
        rows.append(ResultRow(
            scheme=d["scheme"], axis=d["axis"], axis_value=float(d["axis_value"]), snr_db=float(d["snr_db"]),
            se=float(d["se"]), eigen_nmse=float(d["eigen_nmse"]), channel_nmse=float(d["channel_nmse"]),
            flops=float(d["flops"]), n_seeds=int(d["n_seeds"]), wall_time_s=float(d.get(TIMING_FIELD) or 0.0),
        ))
    return rows
