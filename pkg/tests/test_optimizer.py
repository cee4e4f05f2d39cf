import numpy as np
import pytest

from netisac.conic import SolveStatus, solve_conic
from netisac.detection import Scenario, sinr_eval, transmit_steering
from netisac.errors import BenchmarkInfeasible, DimensionError, RandomizationFailure
from netisac.model import ArrayConfig, CommChannelSet, SensingParams, SystemLayout, build_target_grid, dbm_to_watts
from netisac.optimizer import (
    DetectionProblem,
    build_detection_sdr,
    build_min_power_sdr,
    comm_benchmark,
    extract_rank_one,
    gaussian_randomize,
    min_power_beamformers,
    solve_detection,
    solve_power_lp,
)

from conftest import crandn, make_scene

P_MAX = float(dbm_to_watts(42))


def problem(scenario="I", n_a=4, seed=0, gamma=10.0, p_max=P_MAX):
    layout, params, grid, channels = make_scene(n_a, seed)
    return DetectionProblem(scenario, channels, grid, layout.array, params, gamma, p_max)


def duality_min_power(h, gamma, sigma2, iters=5000):
    """Total power of the min-power design via the uplink-downlink duality fixed point."""
    K, _, n = h.shape
    lam = np.zeros(K)
    for _ in range(iters):
        new = np.empty(K)
        for k in range(K):
            S = np.eye(n) + sum(lam[j] / sigma2 * np.outer(h[j, k], h[j, k].conj()) for j in range(K))
            q = (h[k, k].conj() @ np.linalg.solve(S, h[k, k])).real / sigma2
            new[k] = 1 / ((1 + 1 / gamma) * q)
        if np.allclose(new, lam, rtol=1e-15, atol=0):
            break
        lam = new
    return lam.sum()


def test_problem_validation():
    layout, params, grid, channels = make_scene(4)
    with pytest.raises(ValueError):
        DetectionProblem("I", channels, grid, layout.array, params, 0.0, 1.0)
    with pytest.raises(ValueError):
        DetectionProblem("I", channels, grid, layout.array, params, 1.0, 0.0)
    with pytest.raises(DimensionError):
        DetectionProblem("I", channels, grid, ArrayConfig(5, 5), params, 1.0, 1.0)
    pb = DetectionProblem("II", channels, grid, layout.array, params, [1.0, 2.0, 3.0], 1.0)
    assert pb.scenario is Scenario.UNSYNCHRONIZED
    np.testing.assert_array_equal(pb.gamma, [1, 2, 3])


def test_sdr_structure():
    pb = problem()
    prog = build_detection_sdr(pb)
    assert prog.psd_block_dims == [4, 4, 4]
    assert prog.n_scalars == 1
    assert prog.n_constraints == 9 + 3 + 3


def test_sdr_scenario_ii_rows_use_direct_gains():
    pb = problem("II")
    prog = build_detection_sdr(pb)
    a = transmit_steering(pb.grid, pb.array)
    for m, con in enumerate(prog.constraints[:9]):
        for i, C in con.blocks.items():
            expected = pb.array.n_rx * pb.params.rcs**2 * pb.grid.path_gains[m, i, i]
            np.testing.assert_allclose(C, expected * np.outer(np.conj(a[m, i]), a[m, i]))


def test_sdr_sinr_rows_small_gamma():
    # as Gamma -> 0+ the 1/Gamma term dominates and isotropic covariances satisfy every SINR row
    pb = problem(gamma=1e-9)
    prog = build_detection_sdr(pb)
    W = [np.eye(4) * pb.p_max / 4] * 3
    _, lhs = prog.evaluate(W, [0.0])
    assert np.all(lhs[9:12] >= pb.channels.noise_power_c)


def test_sdr_relaxation_bounds_energy():
    pb = problem()
    sol = solve_conic(build_detection_sdr(pb))
    assert sol.status is SolveStatus.OPTIMAL
    energies = pb.energies(np.zeros((3, 4)))
    assert energies.max() == 0.0
    # W_i from the SDR reproduce t* as their worst grid energy
    from netisac.detection import reflection_energies_from_covariance

    e = reflection_energies_from_covariance(pb.scenario, np.array(sol.primal_matrices), pb.grid, pb.params, pb.array)
    assert e.min() == pytest.approx(sol.objective, rel=1e-6)


def test_extract_rank_one(rng):
    w = crandn(rng, 5)
    v = extract_rank_one(np.outer(w, w.conj()))
    assert np.vdot(v, v).real == pytest.approx(np.vdot(w, w).real, rel=1e-9)
    assert abs(abs(np.vdot(v, w)) - np.linalg.norm(v) * np.linalg.norm(w)) < 1e-9 * np.vdot(w, w).real
    assert extract_rank_one(np.eye(3), epsilon=0.5) is None
    assert extract_rank_one(np.zeros((2, 2))) is not None


def test_extract_rank_one_residual_bound(rng):
    eps = 1e-4
    for _ in range(200):
        w = crandn(rng, 6)
        E = crandn(rng, 6, 6)
        W = np.outer(w, w.conj()) + rng.uniform(0, 2e-4) * (E @ E.conj().T) / 6
        v = extract_rank_one(W, eps)
        if v is not None:
            assert np.linalg.norm(W - np.outer(v, v.conj())) / np.linalg.norm(W) <= np.sqrt(2 * eps)


def _single_bs(gamma, p_max=1.0, noise=1e-2):
    layout = SystemLayout([[0.0, 0.0]], [[5.0, 5.0]], ArrayConfig(2, 2, boresight=0.0))
    params = SensingParams()
    grid = build_target_grid(layout, params, area_center=(30.0, -10.0), grid_dim=1)
    h = np.array([[[1.0, 0.5j]]])
    return DetectionProblem("I", CommChannelSet(h, noise), grid, layout.array, params, gamma, p_max)


def test_power_lp_single_bs():
    h = np.array([1.0, 0.5j])
    u = (h / np.linalg.norm(h))[None, :]
    pb = _single_bs(gamma=10.0)
    np.testing.assert_allclose(solve_power_lp(u, pb), [1.0], rtol=1e-7)
    assert solve_power_lp(u, _single_bs(gamma=1e4)) is None
    with pytest.raises(ValueError):
        solve_power_lp(2 * u, pb)
    with pytest.raises(DimensionError):
        solve_power_lp(np.ones((2, 2)) / np.sqrt(2), pb)


def test_power_lp_grid_oracle():
    layout, params, grid, channels = make_scene(3, seed=4, grid_dim=2)
    layout2 = SystemLayout(layout.bs_positions[:2], layout.cu_positions[:2], layout.array)
    grid2 = build_target_grid(layout2, params, grid_dim=2)
    ch2 = CommChannelSet(channels.channels[:2, :2], channels.noise_power_c)
    p_max = 2.0
    pb = DetectionProblem("I", ch2, grid2, layout.array, params, 3.0, p_max)
    rng = np.random.default_rng(8)
    # directions: matched filters plus some noise keep the instance feasible but nontrivial
    u = np.array([ch2.channels[k, k] for k in range(2)]) + 0.3 * crandn(rng, 2, 3) * np.linalg.norm(ch2.channels[0, 0])
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    powers = solve_power_lp(u, pb)
    assert powers is not None

    step = 1e-3 * p_max
    grid_p = np.arange(0, p_max + step / 2, step)
    p1, p2 = np.meshgrid(grid_p, grid_p, indexing="ij")
    a = transmit_steering(grid2, layout.array)
    sens = pb.weights() * np.abs(np.einsum("mkn,kn->mk", a, u)) ** 2
    comm = np.abs(np.einsum("kin,in->ki", np.conj(ch2.channels), u)) ** 2
    obj = np.min(sens[:, 0, None, None] * p1 + sens[:, 1, None, None] * p2, axis=0)
    ok = (comm[0, 0] * p1 / 3.0 - comm[0, 1] * p2 >= ch2.noise_power_c) & (
        comm[1, 1] * p2 / 3.0 - comm[1, 0] * p1 >= ch2.noise_power_c
    )
    best = obj[ok].max()
    lp_val = np.min(sens @ powers)
    assert lp_val >= best * (1 - 1e-9)
    assert lp_val == pytest.approx(best, rel=1e-2)


@pytest.mark.parametrize("scenario", ["I", "II"])
def test_solve_detection_contract(scenario):
    pb = problem(scenario, seed=1)
    rep = solve_detection(pb)
    assert rep.feasible and rep.status is SolveStatus.OPTIMAL
    assert np.all(rep.per_cu_sinr >= pb.gamma * (1 - 1e-6))
    assert np.all(rep.per_bs_power <= pb.p_max * (1 + 1e-9))
    assert rep.achieved_min_energy <= rep.sdr_bound * (1 + 1e-6)
    if rep.rank_one_direct:
        assert rep.randomization_trials_used == 0
        assert rep.achieved_min_energy == pytest.approx(rep.sdr_bound, rel=1e-5)
    d = rep.to_dict()
    assert d["scenario"] == scenario and len(d["beamformers"]) == 3


def test_forced_randomization_contract():
    pb = problem("I", seed=2)
    sol = solve_conic(build_detection_sdr(pb))
    # blend in an isotropic part so no block is rank one
    Ws = [W + 0.05 * np.trace(W).real / 4 * np.eye(4) for W in sol.primal_matrices]
    rep = gaussian_randomize(Ws, pb, sol.objective, n_g=30, seed=5)
    assert not rep.rank_one_direct and rep.randomization_trials_used == 30
    assert np.all(rep.per_cu_sinr >= pb.gamma * (1 - 1e-6))
    assert np.all(rep.per_bs_power <= pb.p_max * (1 + 1e-9))
    assert rep.achieved_min_energy <= sol.objective * (1 + 1e-6)
    again = gaussian_randomize(Ws, pb, sol.objective, n_g=30, seed=5)
    np.testing.assert_array_equal(rep.beamformers, again.beamformers)


def test_randomization_failure_carries_bound():
    pb = problem("I", gamma=1e3)
    Ws = [np.eye(4)] * 3
    with pytest.raises(RandomizationFailure) as info:
        gaussian_randomize(Ws, pb, 1.23, n_g=5, seed=0)
    assert info.value.sdr_bound == 1.23
    with pytest.raises(ValueError):
        gaussian_randomize(Ws, pb, 1.0, n_g=0)


def test_infeasible_sinr_targets():
    pb = problem()
    h = pb.channels.channels
    snr_max = min(pb.p_max * np.vdot(h[k, k], h[k, k]).real / pb.channels.noise_power_c for k in range(3))
    bad = problem(gamma=snr_max * 1e3)
    sol = solve_conic(build_detection_sdr(bad))
    assert sol.status is SolveStatus.INFEASIBLE
    # same verdict from a feasibility-only version (no objective)
    prog = build_detection_sdr(bad)
    prog.objective_scalars = {}
    assert solve_conic(prog).status is SolveStatus.INFEASIBLE
    rep = solve_detection(bad)
    assert not rep.feasible and rep.status is SolveStatus.INFEASIBLE and rep.beamformers is None


def test_sinr_rows_scale_invariant():
    pb = problem(seed=3)
    c = 7.5
    ch = CommChannelSet(pb.channels.channels * c, pb.channels.noise_power_c * c**2)
    scaled = DetectionProblem(pb.scenario, ch, pb.grid, pb.array, pb.params, pb.gamma, pb.p_max)
    a = solve_conic(build_detection_sdr(pb))
    b = solve_conic(build_detection_sdr(scaled))
    assert a.objective == pytest.approx(b.objective, rel=1e-6)


def test_scenario_and_benchmark_dominance():
    for seed in range(3):
        r1 = solve_detection(problem("I", seed=seed))
        r2 = solve_detection(problem("II", seed=seed))
        pb = problem("I", seed=seed)
        wb = comm_benchmark(pb.channels, pb.gamma, pb.p_max)
        if r1.rank_one_direct and r2.rank_one_direct:
            assert r1.achieved_min_energy >= r2.achieved_min_energy * (1 - 1e-8)
            assert r1.achieved_min_energy >= pb.energies(wb).min() * (1 - 1e-8)
            assert r2.achieved_min_energy >= problem("II", seed=seed).energies(wb).min() * (1 - 1e-8)


def test_min_power_matches_duality_oracle():
    for seed in range(3):
        _, _, _, ch = make_scene(4, seed)
        w = min_power_beamformers(ch, 10.0)
        ref = duality_min_power(ch.channels, 10.0, ch.noise_power_c)
        assert np.sum(np.abs(w) ** 2) == pytest.approx(ref, rel=1e-6)
        sol = solve_conic(build_min_power_sdr(ch, 10.0), tol=1e-9)
        assert sol.objective == pytest.approx(ref, rel=1e-6)
        # SINR constraints active at the min-power optimum
        np.testing.assert_allclose(sinr_eval(w, ch), 10.0, rtol=1e-6)


def test_benchmark_single_user():
    h = np.array([0.3 + 0.1j, -0.2, 0.5j])
    ch = CommChannelSet(h[None, None, :], 1e-3)
    gamma, p_max = 4.0, 2.0
    w = comm_benchmark(ch, gamma, p_max)[0]
    expected = np.sqrt(p_max) * h / np.linalg.norm(h)
    assert abs(abs(np.vdot(w, expected)) - p_max) < 1e-7
    assert np.vdot(w, w).real == pytest.approx(p_max, rel=1e-9)
    w_bar = min_power_beamformers(ch, gamma)[0]
    assert np.linalg.norm(w_bar) == pytest.approx(np.sqrt(gamma * 1e-3) / np.linalg.norm(h), rel=1e-6)


def test_benchmark_scaling():
    pb = problem(seed=5)
    w = comm_benchmark(pb.channels, pb.gamma, pb.p_max)
    powers = np.sum(np.abs(w) ** 2, axis=1)
    assert powers.max() == pytest.approx(pb.p_max, rel=1e-12)
    assert np.all(powers <= pb.p_max * (1 + 1e-12))
    assert np.all(sinr_eval(w, pb.channels) >= pb.gamma * (1 - 1e-6))


def test_benchmark_infeasible():
    pb = problem()
    with pytest.raises(BenchmarkInfeasible):
        comm_benchmark(pb.channels, pb.gamma, 1e-9)
    with pytest.raises(ValueError):
        comm_benchmark(pb.channels, pb.gamma, 0.0)
