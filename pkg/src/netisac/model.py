"""Physical scene: array geometry, targets, path gains and downlink channels.

All positions are 2-D coordinates in meters and all powers are in watts.
Angles are measured counter-clockwise from each BS array's boresight, so the
ULA phase progression ``exp(j 2 pi (d/lambda) m sin(theta))`` is well defined.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, DimensionError


@dataclass(frozen=True)
class ArrayConfig:
    """Uniform linear array shared by every base station.

    Parameters
    ----------
    n_tx, n_rx : int
        Number of transmit / receive elements.
    spacing_ratio : float
        Element spacing in wavelengths (0.5 for half-wavelength).
    boresight : float or None
        Absolute array normal direction in radians. ``None`` points each
        array from its BS toward the origin.
    """

    n_tx: int
    n_rx: int
    spacing_ratio: float = 0.5
    boresight: float | None = None

    def __post_init__(self):
        if int(self.n_tx) < 1 or int(self.n_rx) < 1:
            raise ValueError("array needs at least one transmit and one receive element")
        if not self.spacing_ratio > 0:
            raise ValueError("spacing_ratio must be positive")


@dataclass(frozen=True, eq=False)
class SystemLayout:
    """K base stations, their K associated users and the common array."""

    bs_positions: np.ndarray
    cu_positions: np.ndarray
    array: ArrayConfig

    def __post_init__(self):
        bs = np.asarray(self.bs_positions, dtype=float).reshape(-1, 2)
        cu = np.asarray(self.cu_positions, dtype=float).reshape(-1, 2)
        if bs.shape[0] < 1 or bs.shape != cu.shape:
            raise DimensionError(
                f"need equal, nonzero numbers of BSs and CUs, got {bs.shape[0]} and {cu.shape[0]}"
            )
        if not (np.all(np.isfinite(bs)) and np.all(np.isfinite(cu))):
            raise ValueError("positions must be finite")
        object.__setattr__(self, "bs_positions", bs)
        object.__setattr__(self, "cu_positions", cu)

    @property
    def n_bs(self) -> int:
        return self.bs_positions.shape[0]

    def boresights(self) -> np.ndarray:
        """Absolute boresight direction (radians) of every BS array."""
        if self.array.boresight is not None:
            return np.full(self.n_bs, float(self.array.boresight))
        to_origin = -self.bs_positions
        angles = np.arctan2(to_origin[:, 1], to_origin[:, 0])
        # a BS sitting at the origin has no preferred direction
        at_origin = np.all(to_origin == 0.0, axis=1)
        angles[at_origin] = 0.0
        return angles


@dataclass(frozen=True)
class SensingParams:
    """Target reflection constants and post-matched-filter noise power.

    ``rcs`` is the reflection amplitude zeta, ``kappa_sq`` the reference
    path loss (power) at ``d_ref`` meters, ``noise_power_d`` the noise
    power after matched filtering in watts.
    """

    rcs: float = 1.0
    kappa_sq: float = 1e-10
    d_ref: float = 1.0
    noise_power_d: float = 10 ** ((-102 - 30) / 10)

    def __post_init__(self):
        for name in ("rcs", "kappa_sq", "d_ref", "noise_power_d"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True, eq=False)
class TargetGrid:
    """Sample target locations and their per-BS geometry.

    Attributes
    ----------
    points : (M, 2) array
    angles : (M, K) array
        Angle of each point seen from each BS, relative to that BS's boresight.
    distances : (M, K) array
    path_gains : (M, K, K) array
        Round-trip gain ``beta[m, k, i]`` for the path BS i -> target -> BS k.
    """

    points: np.ndarray
    angles: np.ndarray
    distances: np.ndarray
    path_gains: np.ndarray

    @property
    def n_points(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True, eq=False)
class CommChannelSet:
    """Downlink channels; ``channels[k, i]`` is the vector from BS i to CU k."""

    channels: np.ndarray
    noise_power_c: float

    def __post_init__(self):
        h = np.asarray(self.channels, dtype=complex)
        if h.ndim != 3 or h.shape[0] != h.shape[1]:
            raise DimensionError(f"channels must have shape (K, K, N_t), got {h.shape}")
        if not np.all(np.isfinite(h)):
            raise ValueError("channel entries must be finite")
        if not self.noise_power_c > 0:
            raise ValueError("noise_power_c must be strictly positive")
        object.__setattr__(self, "channels", h)

    @property
    def n_users(self) -> int:
        return self.channels.shape[0]

    @property
    def n_tx(self) -> int:
        return self.channels.shape[2]


def steering_vector(theta, n_elems, spacing_ratio=0.5):
    """ULA response ``[1, e^{j 2 pi s sin(theta)}, ..., e^{j 2 pi s (n-1) sin(theta)}]``.

    ``theta`` may be an array; the element axis is appended last.
    """
    if n_elems < 1:
        raise ValueError("n_elems must be at least 1")
    theta = np.asarray(theta, dtype=float)
    phase = 2 * np.pi * spacing_ratio * np.sin(theta)[..., None] * np.arange(n_elems)
    return np.exp(1j * phase)


def _bearings(layout, point):
    delta = np.asarray(point, dtype=float) - layout.bs_positions
    distances = np.hypot(delta[:, 0], delta[:, 1])
    if np.any(distances == 0.0):
        raise DegenerateGeometryError(f"point {tuple(point)} coincides with a base station")
    bearing = np.arctan2(delta[:, 1], delta[:, 0])
    # wrap into (-pi, pi]
    rel = bearing - layout.boresights()
    angles = np.pi - np.mod(np.pi - rel, 2 * np.pi)
    return angles, distances


def target_geometry(layout: SystemLayout, point) -> tuple[np.ndarray, np.ndarray]:
    """Angles (relative to boresight) and distances from every BS to ``point``."""
    return _bearings(layout, point)


def path_gain(params: SensingParams, d_k, d_i):
    """Round-trip gain ``kappa^2 d_ref^4 / (d_k^2 d_i^2)``."""
    d_k = np.asarray(d_k, dtype=float)
    d_i = np.asarray(d_i, dtype=float)
    if np.any(d_k <= 0) or np.any(d_i <= 0):
        raise ValueError("distances must be positive")
    return params.kappa_sq * params.d_ref**4 / (d_k**2 * d_i**2)


def target_response(params: SensingParams, beta, a_r, a_t):
    """Rank-one response ``sqrt(beta) * zeta * a_r a_t^T`` (plain transpose)."""
    a_r = np.asarray(a_r, dtype=complex)
    a_t = np.asarray(a_t, dtype=complex)
    if a_r.ndim != 1 or a_t.ndim != 1:
        raise DimensionError("steering vectors must be one-dimensional")
    if not beta > 0:
        raise ValueError("beta must be positive")
    return np.sqrt(beta) * params.rcs * np.outer(a_r, a_t)


def build_target_grid(layout, params, area_center=(0.0, 0.0), side=3.0, grid_dim=3) -> TargetGrid:
    """Uniform ``grid_dim x grid_dim`` lattice over a square, corners included."""
    if not side > 0:
        raise ValueError("side must be positive")
    if grid_dim < 1:
        raise ValueError("grid_dim must be at least 1")
    cx, cy = (float(c) for c in area_center)
    if grid_dim == 1:
        offsets = np.zeros(1)
    else:
        offsets = np.linspace(-side / 2, side / 2, grid_dim)
    xs, ys = np.meshgrid(cx + offsets, cy + offsets, indexing="ij")
    points = np.column_stack([xs.ravel(), ys.ravel()])

    geo = [target_geometry(layout, p) for p in points]
    angles = np.array([g[0] for g in geo])
    distances = np.array([g[1] for g in geo])
    gains = path_gain(params, distances[:, :, None], distances[:, None, :])
    return TargetGrid(points=points, angles=angles, distances=distances, path_gains=gains)


def sample_comm_channels(
    layout: SystemLayout,
    rician_factor=10.0,
    pl_exponent=3.0,
    pl_ref_gain=1e-3,
    seed=0,
    noise_power_c=10 ** ((-84 - 30) / 10),
) -> CommChannelSet:
    """Draw Rician downlink channels for every (CU k, BS i) pair.

    The LOS part is the phase-conjugated transmit steering vector toward
    the CU, so ``h^H w = a^T w`` follows the same convention as the radar
    links. ``seed`` may be an int or a ``numpy.random.SeedSequence``.
    """
    if rician_factor < 0:
        raise ValueError("rician_factor must be nonnegative")
    n_t = layout.array.n_tx
    K = layout.n_bs
    rng = np.random.default_rng(seed)

    h = np.empty((K, K, n_t), dtype=complex)
    los_w = np.sqrt(rician_factor / (1 + rician_factor))
    nlos_w = np.sqrt(1 / (1 + rician_factor))
    for k in range(K):
        angles, dists = target_geometry(layout, layout.cu_positions[k])
        gains = pl_ref_gain * dists ** (-pl_exponent)
        for i in range(K):
            los = np.conj(steering_vector(angles[i], n_t, layout.array.spacing_ratio))
            nlos = (rng.standard_normal(n_t) + 1j * rng.standard_normal(n_t)) / np.sqrt(2)
            h[k, i] = np.sqrt(gains[i]) * (los_w * los + nlos_w * nlos)
    return CommChannelSet(channels=h, noise_power_c=noise_power_c)


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)
