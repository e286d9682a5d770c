"""Synthetic channel constructions shared by the test modules."""
from __future__ import annotations

import numpy as np

from egvp.channel import ArrayGeometry, GridConfig, PathSet, generate_path_set, kmh

DESK_GRID = GridConfig(n_f=8)
DESK_GEOMETRY = ArrayGeometry(n_v=2, n_h=4, n_pl=2)


def shared_path_channel(seed: int, n_paths: int = 3, v_kmh: float = 30.0, geometry=DESK_GEOMETRY, grid=DESK_GRID, n_rx: int = 2) -> PathSet:
    """On-grid paths that reach every UE antenna, each with its own Doppler.

    Every pair of antenna channels shares all ``n_paths`` bins, so the
    number of non-orthogonal paths between them is ``n_paths``.
    """
    return generate_path_set(seed, n_paths, kmh(v_kmh), geometry, grid, on_grid=True, n_rx=n_rx)


def doppler_offset_channel(seed: int, v_kmh: float, geometry=DESK_GEOMETRY, grid=DESK_GRID, spread=(0.5, 0.95)) -> PathSet:
    """Two antennas whose channels overlap in one bin with different Dopplers.

    Antenna 1 sees the shared bin with Doppler ``c * omega_max`` (``c``
    drawn from ``spread``), antenna 2 sees it static, and each antenna has
    one private bin of equal power. The Gram matrix of the two channels then
    has a constant diagonal and a single-exponential off-diagonal entry, so
    the weights are single exponentials in the Doppler difference.
    """
    base = generate_path_set(seed, 3, kmh(v_kmh), geometry, grid, on_grid=True, n_rx=1)
    rng = np.random.default_rng(seed)
    w = base.omega_max
    phases = np.exp(2j * np.pi * rng.uniform(size=4))
    beta = np.zeros((4, 2), dtype=complex)
    beta[0, 0], beta[1, 1], beta[2, 0], beta[3, 1] = phases
    omega = np.array([rng.uniform(*spread) * w, 0.0, rng.uniform(-w, w), rng.uniform(-w, w)])
    pick = np.array([0, 0, 1, 2])
    return PathSet(
        beta=beta, theta=base.theta[pick], phi=base.phi[pick], tau=base.tau[pick],
        omega=omega, pol=base.pol[pick], omega_max=w,
    )


def exp_series(poles, amps, n: int) -> np.ndarray:
    k = np.arange(n)
    return (np.asarray(amps)[None, :] * np.asarray(poles)[None, :] ** k[:, None]).sum(axis=1)


def separated_poles(rng, count: int, min_sep: float = 0.05) -> np.ndarray:
    """Unit-modulus poles whose angles are pairwise at least ``min_sep`` apart (circularly)."""
    while True:
        ang = rng.uniform(-np.pi, np.pi, count)
        if count == 1:
            return np.exp(1j * ang)
        d = np.abs(ang[:, None] - ang[None, :])
        d = np.minimum(d, 2 * np.pi - d)
        if np.min(d[np.triu_indices(count, 1)]) >= min_sep:
            return np.exp(1j * ang)
