import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netisac.detection import (
    Scenario,
    detection_probability,
    detector_threshold,
    link_weights,
    q_function,
    q_inverse,
    reflection_energies_from_covariance,
    reflection_energy,
    reflection_energy_from_covariance,
    simulate_detector,
    simulate_statistic,
    sinr_eval,
    stacked_reflection,
    transmit_steering,
)
from netisac.errors import DegenerateDetectorError, DimensionError
from netisac.model import ArrayConfig, CommChannelSet, SensingParams, SystemLayout, build_target_grid

from conftest import crandn


def q_oracle(x):
    return 0.5 * math.erfc(x / math.sqrt(2))


def q_inverse_oracle(p, lo=-40.0, hi=40.0):
    """Bisection on the complementary error function."""
    if p > 0.5:
        # 1 - p is exact here; bisecting the upper tail keeps full precision
        return -q_inverse_oracle(1.0 - p)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if q_oracle(mid) > p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_q_examples():
    assert q_function(0.0) == 0.5
    assert q_inverse(0.5) == 0.0
    assert abs(q_inverse(1e-3) - q_inverse_oracle(1e-3)) < 1e-10
    assert abs(q_inverse(1e-3) - 3.09023) < 1e-5


@pytest.mark.parametrize("p", [1e-12, 1e-6, 1e-3, 0.1, 0.5, 0.9, 1 - 1e-9])
def test_q_inverse_matches_bisection(p):
    assert abs(q_inverse(p) - q_inverse_oracle(p)) < 1e-9


def test_q_inverse_domain():
    for p in (0.0, 1.0, -0.1, 2.0):
        with pytest.raises(ValueError):
            q_inverse(p)


@given(st.floats(-6, 6))
def test_q_roundtrip(x):
    # For x < -5.6, Q(x) is within 1e-9 of one and half an ulp of p already
    # moves x by more than 1e-9; allow that conditioning floor here. The
    # literal 1e-9 check lives in test_acceptance.py.
    p = q_function(x)
    floor = np.spacing(p) / (np.exp(-x * x / 2) / np.sqrt(2 * np.pi))
    assert abs(q_inverse(p) - x) <= max(1e-9, floor)


@given(st.floats(-6, 6))
def test_q_roundtrip_upper_half(x):
    x = abs(x)
    assert abs(q_inverse(q_function(x)) - x) < 1e-9


def test_pd_examples():
    assert detection_probability(0.0, 0.01, 1.0) == pytest.approx(0.01, abs=1e-12)
    pfa = 1e-3
    e_half = 1.0 * q_inverse_oracle(pfa) ** 2 / 2
    assert detection_probability(e_half, pfa, 1.0) == pytest.approx(0.5, abs=1e-10)
    # 2E/sigma^2 = 25
    expected = q_oracle(q_inverse_oracle(pfa) - 5.0)
    assert detection_probability(12.5, pfa, 1.0) == pytest.approx(expected, abs=1e-12)
    # stated as "approximately 0.9717"; the exact value is 0.97192
    assert expected == pytest.approx(0.9717, abs=5e-4)


def test_pd_monotone_grid():
    energies = np.linspace(0, 10, 100)
    pd = detection_probability(energies, 1e-3, 1.0)
    assert np.all(np.diff(pd) > 1e-12 * 0) and np.all(np.diff(pd) > 0)
    pfas = np.linspace(1e-4, 0.9, 100)
    pd = detection_probability(1.0, pfas, 1.0)
    assert np.all(np.diff(pd) > 0)


def test_pd_domain():
    with pytest.raises(ValueError):
        detection_probability(-1.0, 0.1, 1.0)
    with pytest.raises(ValueError):
        detection_probability(1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        detection_probability(1.0, 0.1, 0.0)


def test_threshold():
    assert detector_threshold(3.0, 0.5, 2.0) == 0.0
    assert detector_threshold(2.0, 1e-3, 1.0) == pytest.approx(q_inverse_oracle(1e-3), abs=1e-9)
    assert detector_threshold(8.0, 1e-2, 1.0) == pytest.approx(2 * detector_threshold(2.0, 1e-2, 1.0))
    with pytest.raises(DegenerateDetectorError):
        detector_threshold(0.0, 0.1, 1.0)


def _scene(K=3, n=4):
    bs = [[-60, 0], [60, 0], [0, 60]][:K]
    cu = [[-10, 0], [10, 0], [0, 10]][:K]
    array = ArrayConfig(n, n + 1)
    layout = SystemLayout(bs, cu, array)
    params = SensingParams(rcs=0.8)
    return build_target_grid(layout, params), params, array


def test_energy_zero_and_shapes(rng):
    grid, params, array = _scene()
    assert reflection_energy("I", np.zeros((3, 4)), grid, 0, params, array) == 0.0
    with pytest.raises(DimensionError):
        reflection_energy("I", np.zeros((3, 5)), grid, 0, params, array)
    with pytest.raises(IndexError):
        reflection_energy("I", np.zeros((3, 4)), grid, 9, params, array)


def test_energy_single_bs_matched():
    layout = SystemLayout([[0, 0]], [[5, 5]], ArrayConfig(6, 3, boresight=0.0))
    params = SensingParams(rcs=1.3)
    grid = build_target_grid(layout, params, area_center=(30.0, 10.0), grid_dim=1)
    a = transmit_steering(grid, layout.array)[0, 0]
    P = 2.5
    w = np.sqrt(P) * np.conj(a)[None, :] / np.sqrt(6)
    beta = grid.path_gains[0, 0, 0]
    expected = 3 * 1.3**2 * beta * P * 6
    for s in ("I", "II"):
        assert reflection_energy(s, w, grid, 0, params, layout.array) == pytest.approx(expected, rel=1e-12)


def test_energy_orthogonal_is_zero():
    layout = SystemLayout([[0, 0]], [[5, 5]], ArrayConfig(2, 2, boresight=0.0))
    params = SensingParams()
    grid = build_target_grid(layout, params, area_center=(30.0, 10.0), grid_dim=1)
    a = transmit_steering(grid, layout.array)[0, 0]
    w = np.array([[a[1], -a[0]]])  # a^T w = 0
    assert reflection_energy("I", w, grid, 0, params, layout.array) == pytest.approx(0.0, abs=1e-30)


def test_energy_by_explicit_sum(rng):
    grid, params, array = _scene()
    w = crandn(rng, 3, 4)
    m = 4
    a = transmit_steering(grid, array)[m]
    total_i = sum(
        array.n_rx * params.rcs**2 * grid.path_gains[m, k, i] * abs(a[i] @ w[i]) ** 2 for k in range(3) for i in range(3)
    )
    total_ii = sum(array.n_rx * params.rcs**2 * grid.path_gains[m, k, k] * abs(a[k] @ w[k]) ** 2 for k in range(3))
    assert reflection_energy("I", w, grid, m, params, array) == pytest.approx(total_i, rel=1e-12)
    assert reflection_energy(Scenario.UNSYNCHRONIZED, w, grid, m, params, array) == pytest.approx(total_ii, rel=1e-12)


def test_stacked_reflection_norm(rng):
    grid, params, array = _scene()
    w = crandn(rng, 3, 4)
    for s, length in (("I", 5 * 9), ("II", 5 * 3)):
        alpha = stacked_reflection(s, w, grid, 2, params, array)
        assert alpha.shape == (length,)
        assert np.vdot(alpha, alpha).real == pytest.approx(reflection_energy(s, w, grid, 2, params, array), rel=1e-12)


def test_covariance_form(rng):
    grid, params, array = _scene()
    w = crandn(rng, 3, 4)
    W = np.einsum("ki,kj->kij", w, np.conj(w))
    for s in ("I", "II"):
        for m in range(9):
            assert reflection_energy_from_covariance(s, W, grid, m, params, array) == pytest.approx(
                reflection_energy(s, w, grid, m, params, array), rel=1e-10
            )
    e1 = reflection_energies_from_covariance("I", W, grid, params, array)
    e2 = reflection_energies_from_covariance("I", 2 * W, grid, params, array)
    np.testing.assert_allclose(e2, 2 * e1, rtol=1e-12)


def test_covariance_identity():
    grid, params, array = _scene()
    P = 3.0
    W = np.stack([np.eye(4) * P / 4] * 3)
    expected = array.n_rx * params.rcs**2 * grid.path_gains.sum(axis=(1, 2)) * P
    np.testing.assert_allclose(reflection_energies_from_covariance("I", W, grid, params, array), expected, rtol=1e-12)


def test_covariance_rejects_non_hermitian(rng):
    grid, params, array = _scene()
    W = crandn(rng, 3, 4, 4)
    with pytest.raises(ValueError):
        reflection_energy_from_covariance("I", W, grid, 0, params, array)


def test_link_weights_scenarios():
    grid, params, array = _scene()
    wi = link_weights("I", grid, params, array)
    wii = link_weights("II", grid, params, array)
    assert np.all(wi >= wii)
    np.testing.assert_allclose(wii, array.n_rx * params.rcs**2 * np.einsum("mkk->mk", grid.path_gains))


def test_scenario_parse():
    assert Scenario.parse("ii") is Scenario.UNSYNCHRONIZED
    assert Scenario.parse("SYNCHRONIZED") is Scenario.SYNCHRONIZED
    with pytest.raises(ValueError):
        Scenario.parse("III")


@given(st.integers(0, 2**31))
@settings(max_examples=30, deadline=None)
def test_energy_scenario_order(seed):
    rng = np.random.default_rng(seed)
    grid, params, array = _scene()
    w = crandn(rng, 3, 4)
    for m in range(9):
        assert reflection_energy("I", w, grid, m, params, array) >= reflection_energy("II", w, grid, m, params, array)


def test_statistic_moments(rng):
    alpha = crandn(rng, 12)
    sigma = 0.7
    E = np.vdot(alpha, alpha).real
    n = 100_000
    for present, mean in ((False, 0.0), (True, E)):
        t = simulate_statistic(alpha, sigma, n, seed=3, target_present=present)
        var = sigma * E / 2
        assert abs(t.mean() - mean) < 5 * np.sqrt(var / n)
        # standard error of the sample variance for a Gaussian is var * sqrt(2 / n)
        assert abs(t.var() - var) < 5 * var * np.sqrt(2 / n)


def test_simulate_deterministic():
    alpha = np.ones(3, dtype=complex)
    assert simulate_detector(alpha, 1.0, 0.1, trials=5000, seed=4) == simulate_detector(alpha, 1.0, 0.1, trials=5000, seed=4)


def test_simulate_examples():
    n = 200_000
    assert simulate_detector(np.array([1.0 + 0j]), 1e-12, 1e-3, trials=1000, seed=1)[0] == 1.0
    _, pfa = simulate_detector(np.array([0.3 + 0.1j, 2.0]), 1.0, 0.5, trials=n, seed=2)
    assert abs(pfa - 0.5) < 3 * np.sqrt(0.25 / n)
    alpha = np.array([1.0, 1.0j])  # ||alpha||^2 = 2
    pd, _ = simulate_detector(alpha, 1.0, 1e-2, trials=n, seed=5)
    p = q_oracle(q_inverse_oracle(1e-2) - 2.0)
    assert abs(pd - p) < 3 * np.sqrt(p * (1 - p) / n)


def test_simulate_errors():
    with pytest.raises(DegenerateDetectorError):
        simulate_detector(np.zeros(2), 1.0, 0.1)
    with pytest.raises(ValueError):
        simulate_statistic(np.ones(2), 1.0, 0, 0, True)


def test_sinr_examples():
    h = np.zeros((2, 2, 2), dtype=complex)
    h[0, 0] = [1, 0]
    h[0, 1] = [0, 1]
    h[1, 1] = [1, 1]
    ch = CommChannelSet(h, 1.0)
    w = np.array([[2, 0], [0, 1]], dtype=complex)
    assert sinr_eval(w, ch)[0] == pytest.approx(2.0)
    np.testing.assert_array_equal(sinr_eval(np.zeros((2, 2)), ch), 0.0)
    single = CommChannelSet(np.array([[[1 + 1j, 2]]]), 0.5)
    assert sinr_eval(np.array([[1, 1j]]), single)[0] == pytest.approx(abs(np.vdot([1 + 1j, 2], [1, 1j])) ** 2 / 0.5)
    with pytest.raises(DimensionError):
        sinr_eval(np.zeros((2, 3)), ch)
