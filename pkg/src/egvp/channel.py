"""Wideband multipath channel synthesis and the angle-delay transform.

The stacked channel of one UE at subframe ``t`` is a ``(N_f*N_t) x M`` matrix
whose column ``m`` is the channel from every BS antenna, at every frequency
sample, to UE antenna ``m``. Rows are antenna-major: row ``a*N_f + f`` holds
BS antenna ``a`` at frequency sample ``f``.

BS antennas are ordered ``(polarization, vertical, horizontal)``, so the
spatial steering vector of a path is ``pol ⊗ a_v ⊗ a_h``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform planar array at the BS with half-wavelength spacing."""

    n_v: int = 4
    n_h: int = 8
    n_pl: int = 2
    spacing: float = 0.5

    def __post_init__(self):
        if min(self.n_v, self.n_h) < 1:
            raise ValueError(f"array needs at least one element, got ({self.n_v}, {self.n_h})")
        if self.n_pl not in (1, 2):
            raise ValueError(f"polarizations must be 1 or 2, got {self.n_pl}")

    @property
    def n_t(self) -> int:
        return self.n_v * self.n_h * self.n_pl


@dataclass(frozen=True)
class GridConfig:
    """Time/frequency grid. One channel sample per resource block.

    ``delta_f`` is the subcarrier spacing; frequency samples are
    ``rb_size * delta_f`` apart.
    """

    n_f: int = 51
    delta_f: float = 30e3
    delta_t: float = 0.5e-3
    f0: float = 3.5e9
    rb_size: int = 12

    def __post_init__(self):
        for name in ("n_f", "delta_f", "delta_t", "f0", "rb_size"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def sample_spacing(self) -> float:
        return self.rb_size * self.delta_f


@dataclass(frozen=True)
class PathSet:
    """Multipath parameters of one UE.

    Geometry (angles, delay, Doppler) is per path; gains are per path and UE
    antenna. A path that only reaches some UE antennas simply carries zero
    gain on the others.

    Attributes
    ----------
    beta : ndarray, shape (P, M)
        Complex gains.
    theta, phi : ndarray, shape (P,)
        Zenith and azimuth departure angles (rad).
    tau : ndarray, shape (P,)
        Delays (s).
    omega : ndarray, shape (P,)
        Doppler angular frequency in rad/subframe.
    pol : ndarray, shape (P, n_pl)
        Polarization weights, each row of squared norm ``n_pl``.
    """

    beta: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    tau: np.ndarray
    omega: np.ndarray
    pol: np.ndarray
    omega_max: float = field(default=np.inf)

    def __post_init__(self):
        p = self.beta.shape[0]
        for name in ("theta", "phi", "tau", "omega"):
            if getattr(self, name).shape != (p,):
                raise ValueError(f"{name} must have shape ({p},)")
        if self.pol.shape[0] != p:
            raise ValueError("pol must have one row per path")
        if np.any(self.tau < 0):
            raise ValueError("delays must be nonnegative")
        if np.any(np.abs(self.omega) > self.omega_max * (1 + 1e-12)):
            raise ValueError("Doppler exceeds the bound set by the UE speed")

    @property
    def n_paths(self) -> int:
        return self.beta.shape[0]

    @property
    def n_rx(self) -> int:
        return self.beta.shape[1]


@dataclass(frozen=True)
class ChannelBlock:
    h: np.ndarray
    t: int
    ue: int = 0


def max_doppler(v: float, grid: GridConfig) -> float:
    """Largest Doppler magnitude in rad/subframe for speed ``v`` in m/s."""
    return 2 * np.pi * v * grid.f0 / SPEED_OF_LIGHT * grid.delta_t


def kmh(v_kmh: float) -> float:
    return v_kmh / 3.6


def _grid_freqs(n: int) -> np.ndarray:
    """Spatial frequencies ``u`` in [-1, 1) whose steering vectors are DFT columns."""
    u = 2.0 * np.arange(n) / n
    return np.where(u >= 1.0, u - 2.0, u)


def _feasible_cells(geometry: ArrayGeometry):
    """All on-grid (u_v, u_h) pairs realizable by a real departure direction."""
    uv = _grid_freqs(geometry.n_v)
    uh = _grid_freqs(geometry.n_h)
    if geometry.n_v > 1:
        uv = uv[np.abs(uv) < 1.0]
    cells = [(a, b) for a in uv for b in uh if a * a + b * b <= 1.0 + 1e-12]
    return np.array(cells)


def _angles_from_freqs(uv: np.ndarray, uh: np.ndarray):
    theta = np.arccos(np.clip(uv, -1.0, 1.0))
    s = np.sin(theta)
    ratio = np.divide(uh, s, out=np.zeros_like(uh), where=s > 0)
    phi = np.arcsin(np.clip(ratio, -1.0, 1.0))
    return theta, phi


def generate_path_set(
    rng_seed,
    n_paths: int,
    v: float,
    geometry: ArrayGeometry,
    grid: GridConfig,
    delay_spread: float = 300e-9,
    n_rx: int = 2,
    on_grid: bool = False,
    grid_bias: float = 0.0,
) -> PathSet:
    """Draw a random multipath realization for one UE.

    Parameters
    ----------
    rng_seed : int or numpy.random.Generator or SeedSequence
    n_paths : int
        Number of paths ``P``.
    v : float
        UE speed in m/s.
    delay_spread : float
        Delays are uniform on ``[0, 2*delay_spread]`` with an exponential
        power profile of that scale.
    n_rx : int
        UE antennas ``M``.
    on_grid : bool
        Place every path on a distinct DFT angle-delay bin (falls back to
        shared bins only when ``P`` exceeds the number of bins).
    grid_bias : float
        In ``[0, 1]``; pulls off-grid spatial frequencies and delays toward
        the nearest grid point. Ignored when ``on_grid`` is set.

    Returns
    -------
    PathSet
        Gains are normalized so that ``sum_p |beta_{p,m}|^2 = 1`` for every
        UE antenna, which makes ``E||h_m||^2 ≈ N_f*N_t``.
    """
    if n_paths < 1:
        raise ValueError("need at least one path")
    if v < 0:
        raise ValueError("speed must be nonnegative")
    if not 0.0 <= grid_bias <= 1.0:
        raise ValueError("grid_bias must lie in [0, 1]")
    rng = np.random.default_rng(rng_seed)
    t_bin = 1.0 / (grid.n_f * grid.sample_spacing)

    if on_grid:
        cells = _feasible_cells(geometry)
        n_cells = len(cells) * grid.n_f
        idx = rng.choice(n_cells, size=n_paths, replace=n_paths > n_cells)
        uv, uh = cells[idx // grid.n_f].T
        tau = (idx % grid.n_f) * t_bin
        theta, phi = _angles_from_freqs(uv, uh)
    else:
        theta = rng.uniform(np.pi / 3, 2 * np.pi / 3, n_paths)
        phi = rng.uniform(-np.pi / 3, np.pi / 3, n_paths)
        tau = rng.uniform(0.0, 2 * delay_spread, n_paths)
        if grid_bias > 0:
            uv, uh = np.cos(theta), np.sin(theta) * np.sin(phi)
            cells = _feasible_cells(geometry)
            d = (uv[:, None] - cells[None, :, 0]) ** 2 + (uh[:, None] - cells[None, :, 1]) ** 2
            near = cells[np.argmin(d, axis=1)]
            uv = uv + grid_bias * (near[:, 0] - uv)
            uh = uh + grid_bias * (near[:, 1] - uh)
            theta, phi = _angles_from_freqs(uv, uh)
            tau = tau + grid_bias * (np.round(tau / t_bin) * t_bin - tau)

    # Doppler follows the angle between the arriving path and the UE velocity
    w_max = max_doppler(v, grid)
    omega = w_max * np.cos(rng.uniform(0.0, 2 * np.pi, n_paths))

    power = np.exp(-tau / delay_spread) if delay_spread > 0 else np.ones(n_paths)
    power = power / power.sum()
    g = (rng.standard_normal((n_paths, n_rx)) + 1j * rng.standard_normal((n_paths, n_rx))) / np.sqrt(2)
    beta = np.sqrt(power)[:, None] * g
    beta = beta / np.linalg.norm(beta, axis=0, keepdims=True)

    if geometry.n_pl == 2:
        chi = rng.uniform(0.0, np.pi / 2, n_paths)
        psi = rng.uniform(0.0, 2 * np.pi, n_paths)
        pol = np.sqrt(2.0) * np.stack([np.cos(chi), np.sin(chi) * np.exp(1j * psi)], axis=1)
    else:
        pol = np.ones((n_paths, 1), dtype=complex)

    return PathSet(beta=beta, theta=theta, phi=phi, tau=tau, omega=omega, pol=pol, omega_max=w_max)


def steering_vectors(path_set: PathSet, geometry: ArrayGeometry) -> np.ndarray:
    """Spatial steering vectors, shape ``(N_t, P)``."""
    k = 2 * np.pi * geometry.spacing
    nv = np.arange(geometry.n_v)[:, None]
    nh = np.arange(geometry.n_h)[:, None]
    a_v = np.exp(1j * k * nv * np.cos(path_set.theta))
    a_h = np.exp(1j * k * nh * np.sin(path_set.theta) * np.sin(path_set.phi))
    spatial = (a_v[:, None, :] * a_h[None, :, :]).reshape(-1, path_set.n_paths)
    return (path_set.pol.T[:, None, :] * spatial[None, :, :]).reshape(-1, path_set.n_paths)


def delay_vectors(path_set: PathSet, grid: GridConfig) -> np.ndarray:
    """Delay signatures, shape ``(N_f, P)``."""
    n = np.arange(grid.n_f)[:, None]
    carrier = np.exp(2j * np.pi * path_set.tau * grid.f0)
    return carrier * np.exp(2j * np.pi * path_set.tau * n * grid.sample_spacing)


def signatures(path_set: PathSet, geometry: ArrayGeometry, grid: GridConfig) -> np.ndarray:
    """Angle-delay signatures ``d_p = alpha_p ⊗ tau_p`` as columns, shape ``(N_t*N_f, P)``."""
    a = steering_vectors(path_set, geometry)
    d = delay_vectors(path_set, grid)
    return (a[:, None, :] * d[None, :, :]).reshape(-1, path_set.n_paths)


def channel_trajectory(path_set: PathSet, geometry: ArrayGeometry, grid: GridConfig, ts) -> np.ndarray:
    """Stacked channels for every subframe in ``ts``, shape ``(len(ts), N_f*N_t, M)``."""
    ts = np.asarray(ts, dtype=float)
    if np.any(ts < 0):
        raise ValueError("subframe indices must be nonnegative")
    d = signatures(path_set, geometry, grid)
    phase = np.exp(1j * np.outer(ts, path_set.omega))  # (T, P)
    coeff = phase[:, :, None] * path_set.beta[None, :, :]  # (T, P, M)
    return np.einsum("np,tpm->tnm", d, coeff)


def synthesize_channel(path_set: PathSet, geometry: ArrayGeometry, grid: GridConfig, t: int, ue: int = 0) -> ChannelBlock:
    if t < 0 or int(t) != t:
        raise ValueError(f"subframe must be a nonnegative integer, got {t}")
    h = channel_trajectory(path_set, geometry, grid, [t])[0]
    return ChannelBlock(h=h, t=int(t), ue=ue)


def _dft(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def spatial_dft(geometry: ArrayGeometry) -> np.ndarray:
    """Unitary ``N_t x N_t`` DFT: 2-D over the planar array, identity across polarizations."""
    return np.kron(np.eye(geometry.n_pl), np.kron(_dft(geometry.n_v), _dft(geometry.n_h)))


def angle_delay_transform(grid: GridConfig, geometry: ArrayGeometry) -> np.ndarray:
    """Unitary ``W = W_1^H ⊗ W_2`` with ``W_1`` spatial and ``W_2`` frequency DFTs."""
    return np.kron(spatial_dft(geometry).conj().T, _dft(grid.n_f))


def project_to_angle_delay(w: np.ndarray, h) -> np.ndarray:
    """Angle-delay amplitudes ``g_m = W^H h_m`` for every column of ``h``."""
    h = np.asarray(getattr(h, "h", h))
    if h.shape[0] != w.shape[0]:
        raise ValueError(f"channel length {h.shape[0]} does not match transform size {w.shape[0]}")
    return w.conj().T @ h


def from_angle_delay(w: np.ndarray, g: np.ndarray) -> np.ndarray:
    return w @ g


@dataclass(frozen=True)
class FastAngleDelay:
    """FFT realization of ``W`` that never forms the dense matrix.

    ``forward`` computes ``W^H h`` and ``inverse`` computes ``W g`` for
    stacked vectors along axis ``-2`` (any trailing column count).
    """

    geometry: ArrayGeometry
    grid: GridConfig

    @property
    def size(self) -> int:
        return self.geometry.n_t * self.grid.n_f

    def _split(self, x):
        g = self.geometry
        return x.reshape(*x.shape[:-2], g.n_pl, g.n_v, g.n_h, self.grid.n_f, x.shape[-1])

    def forward(self, h: np.ndarray) -> np.ndarray:
        h = np.asarray(h)
        if h.shape[-2] != self.size:
            raise ValueError(f"channel length {h.shape[-2]} does not match transform size {self.size}")
        x = self._split(h)
        x = np.fft.fft(x, axis=-4, norm="ortho")
        x = np.fft.fft(x, axis=-3, norm="ortho")
        x = np.fft.ifft(x, axis=-2, norm="ortho")
        return x.reshape(h.shape)

    def inverse(self, g: np.ndarray) -> np.ndarray:
        g = np.asarray(g)
        x = self._split(g)
        x = np.fft.ifft(x, axis=-4, norm="ortho")
        x = np.fft.ifft(x, axis=-3, norm="ortho")
        x = np.fft.fft(x, axis=-2, norm="ortho")
        return x.reshape(g.shape)
