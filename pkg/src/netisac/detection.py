"""Matched-filter observation model and Neyman-Pearson target detection.

Given the stacked reflections ``alpha`` seen by the central controller, the
clairvoyant detector compares ``Re(alpha^H d)`` against a threshold. Its
statistic is Gaussian with mean 0 (target absent) or ``E = ||alpha||^2``
(target present) and variance ``sigma_d^2 E / 2``, which gives

    p_D = Q(Q^{-1}(p_FA) - sqrt(2 E / sigma_d^2)).

Scenario I (synchronized BSs) collects every BS i -> target -> BS k link;
Scenario II only the direct links k -> target -> k.
"""

from __future__ import annotations

import enum

import numpy as np
from scipy import special

from .errors import DegenerateDetectorError, DimensionError
from .model import steering_vector, target_response


class Scenario(enum.Enum):
    SYNCHRONIZED = "I"
    UNSYNCHRONIZED = "II"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        text = str(value).strip().upper()
        for member in cls:
            if text in (member.value, member.name):
                return member
        raise ValueError(f"unknown scenario {value!r}; expected I or II")

    def link_mask(self, n_bs):
        """Boolean (K, K) mask of usable receive/transmit links (k, i)."""
        if self is Scenario.SYNCHRONIZED:
            return np.ones((n_bs, n_bs), dtype=bool)
        return np.eye(n_bs, dtype=bool)


def _check_beamformers(beamformers, n_bs, n_tx):
    w = np.asarray(beamformers, dtype=complex)
    if w.shape != (n_bs, n_tx):
        raise DimensionError(f"beamformers must have shape ({n_bs}, {n_tx}), got {w.shape}")
    return w


def _check_point(grid, point_index):
    if not 0 <= point_index < grid.n_points:
        raise IndexError(f"point_index {point_index} out of range for {grid.n_points} points")


def transmit_steering(grid, array):
    """Transmit steering vectors, shape (M, K, N_t), toward every grid point."""
    return steering_vector(grid.angles, array.n_tx, array.spacing_ratio)


def link_weights(scenario, grid, params, array):
    """Per-(point, transmitting BS) weights ``N_r zeta^2 sum_k beta[m, k, i]``.

    Shape (M, K). Reflection energy at point m is
    ``sum_i weight[m, i] * |a_{t,i}^T w_i|^2``.
    """
    scenario = Scenario.parse(scenario)
    K = grid.path_gains.shape[1]
    masked = grid.path_gains * scenario.link_mask(K)[None, :, :]
    return array.n_rx * params.rcs**2 * masked.sum(axis=1)


def reflection_energies(scenario, beamformers, grid, params, array):
    """Reflection energy at every grid point, shape (M,)."""
    K = grid.path_gains.shape[1]
    w = _check_beamformers(beamformers, K, array.n_tx)
    gains = np.abs(np.einsum("mkn,kn->mk", transmit_steering(grid, array), w)) ** 2
    return np.sum(link_weights(scenario, grid, params, array) * gains, axis=1)


def reflection_energy(scenario, beamformers, grid, point_index, params, array) -> float:
    """Total received reflection power over the scenario's usable links."""
    _check_point(grid, point_index)
    return float(reflection_energies(scenario, beamformers, grid, params, array)[point_index])


def _check_covariances(covariances, n_bs, n_tx, tol=1e-9):
    W = np.asarray(covariances, dtype=complex)
    if W.shape != (n_bs, n_tx, n_tx):
        raise DimensionError(f"covariances must have shape ({n_bs}, {n_tx}, {n_tx}), got {W.shape}")
    herm_err = np.abs(W - np.conj(np.swapaxes(W, 1, 2))).max(initial=0.0)
    scale = max(1.0, np.abs(W).max(initial=0.0))
    if herm_err > tol * scale:
        raise ValueError(f"covariance matrices are not Hermitian (error {herm_err:.3g})")
    return W


def reflection_energies_from_covariance(scenario, covariances, grid, params, array):
    """Energy at every grid point for covariances ``W_i``: ``sum_i c_i tr(W_i A_i)``."""
    K = grid.path_gains.shape[1]
    W = _check_covariances(covariances, K, array.n_tx)
    a = transmit_steering(grid, array)
    # tr(W a* a^T) = a^T W a*
    quad = np.einsum("mkp,kpq,mkq->mk", a, W, np.conj(a)).real
    return np.sum(link_weights(scenario, grid, params, array) * quad, axis=1)


def reflection_energy_from_covariance(scenario, covariances, grid, point_index, params, array) -> float:
    _check_point(grid, point_index)
    return float(reflection_energies_from_covariance(scenario, covariances, grid, params, array)[point_index])


def stacked_reflection(scenario, beamformers, grid, point_index, params, array):
    """Noise-free MF output ``alpha`` stacked in (k, i) order over usable links.

    Length ``N_r K^2`` for Scenario I and ``N_r K`` for Scenario II; its
    squared norm equals :func:`reflection_energy`.
    """
    scenario = Scenario.parse(scenario)
    _check_point(grid, point_index)
    K = grid.path_gains.shape[1]
    w = _check_beamformers(beamformers, K, array.n_tx)
    theta = grid.angles[point_index]
    a_t = steering_vector(theta, array.n_tx, array.spacing_ratio)
    a_r = steering_vector(theta, array.n_rx, array.spacing_ratio)
    mask = scenario.link_mask(K)
    parts = []
    for k in range(K):
        for i in range(K):
            if mask[k, i]:
                H = target_response(params, grid.path_gains[point_index, k, i], a_r[k], a_t[i])
                parts.append(H @ w[i])
    return np.concatenate(parts)


def q_function(x):
    """Standard normal upper tail probability."""
    return special.ndtr(-np.asarray(x, dtype=float))


def q_inverse(p):
    """Inverse of :func:`q_function` on (0, 1)."""
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError("q_inverse requires 0 < p < 1")
    # ndtri(p) is accurate in the lower tail, so Q^{-1}(p) = -ndtri(p)
    # keeps precision for tiny false-alarm rates
    return -special.ndtri(p)


def _check_pfa(p_fa):
    p_fa = np.asarray(p_fa, dtype=float)
    if np.any((p_fa <= 0) | (p_fa >= 1)):
        raise ValueError("p_fa must lie strictly between 0 and 1")
    return p_fa


def detection_probability(energy, p_fa, sigma_d_sq):
    """Detection probability at false-alarm rate ``p_fa`` for reflection energy ``energy``."""
    energy = np.asarray(energy, dtype=float)
    p_fa = _check_pfa(p_fa)
    if np.any(energy < 0):
        raise ValueError("energy must be nonnegative")
    if not sigma_d_sq > 0:
        raise ValueError("sigma_d_sq must be positive")
    pd = q_function(q_inverse(p_fa) - np.sqrt(2.0 * energy / sigma_d_sq))
    return pd if pd.ndim else float(pd)


def detector_threshold(energy, p_fa, sigma_d_sq):
    """Threshold on ``Re(alpha^H d)`` that yields false-alarm rate ``p_fa``."""
    p_fa = _check_pfa(p_fa)
    if not energy > 0:
        raise DegenerateDetectorError("detector threshold undefined for zero reflection energy")
    if not sigma_d_sq > 0:
        raise ValueError("sigma_d_sq must be positive")
    return float(q_inverse(p_fa) * np.sqrt(sigma_d_sq * energy / 2.0))


def _seed_sequence(seed):
    return seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)


def simulate_statistic(alpha, sigma_d_sq, trials, seed, target_present, chunk=8192):
    """Draw ``trials`` samples of ``Re(alpha^H d)`` under the chosen hypothesis.

    Noise is CSCG with per-entry variance ``sigma_d_sq``. Trials are drawn
    in fixed-size chunks, each from its own child seed, so the result is
    reproducible for a given ``(seed, chunk)``. ``seed`` is an int or a
    ``numpy.random.SeedSequence``.
    """
    alpha = np.asarray(alpha, dtype=complex).ravel()
    if trials < 1:
        raise ValueError("trials must be at least 1")
    n = alpha.size
    out = np.empty(trials)
    scale = np.sqrt(sigma_d_sq / 2.0)
    n_chunks = -(-trials // chunk)
    for c, child in enumerate(_seed_sequence(seed).spawn(n_chunks)):
        rng = np.random.default_rng(child)
        lo, hi = c * chunk, min(trials, (c + 1) * chunk)
        z = scale * (rng.standard_normal((hi - lo, n)) + 1j * rng.standard_normal((hi - lo, n)))
        d = z + alpha if target_present else z
        out[lo:hi] = (d @ np.conj(alpha)).real
    return out


def simulate_detector(alpha, sigma_d_sq, p_fa, trials=200_000, seed=0):
    """Monte Carlo detection and false-alarm frequencies of the NP detector.

    Returns ``(empirical_pd, empirical_pfa)``.
    """
    alpha = np.asarray(alpha, dtype=complex).ravel()
    energy = float(np.vdot(alpha, alpha).real)
    if energy == 0.0:
        raise DegenerateDetectorError("alpha must be nonzero")
    threshold = detector_threshold(energy, p_fa, sigma_d_sq)
    s0, s1 = _seed_sequence(seed).spawn(2)
    t1 = simulate_statistic(alpha, sigma_d_sq, trials, s1, target_present=True)
    t0 = simulate_statistic(alpha, sigma_d_sq, trials, s0, target_present=False)
    return float(np.mean(t1 > threshold)), float(np.mean(t0 > threshold))


def sinr_eval(beamformers, channels):
    """Per-user SINR ``|h_kk^H w_k|^2 / (sum_{i != k} |h_ki^H w_i|^2 + sigma_c^2)``."""
    h = channels.channels
    K = channels.n_users
    w = _check_beamformers(beamformers, K, channels.n_tx)
    gains = np.abs(np.einsum("kin,in->ki", np.conj(h), w)) ** 2
    signal = np.diag(gains)
    interference = gains.sum(axis=1) - signal
    return signal / (interference + channels.noise_power_c)
