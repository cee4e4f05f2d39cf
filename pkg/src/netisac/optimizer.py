"""Coordinated transmit beamforming for worst-case target detection.

The beamforming problem maximizes the smallest reflection energy over the
sample grid subject to per-user SINR targets and a per-BS power budget.
It is lifted to ``W_i = w_i w_i^H``, the rank constraints are dropped, and
the resulting SDP is solved with :func:`netisac.conic.solve_conic`. Rank-one
beamformers are recovered by eigen-extraction when the SDP optimum is
already rank one and by Gaussian randomization with a power LP otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .conic import ConicProgram, SolveStatus, solve_conic
from .detection import Scenario, link_weights, reflection_energies, sinr_eval, transmit_steering
from .errors import BenchmarkInfeasible, DimensionError, RandomizationFailure

RANK_ONE_EPS = 1e-6
SINR_SLACK = 1e-7


@dataclass(frozen=True, eq=False)
class DetectionProblem:
    """Everything needed to pose the beamforming problem for one channel draw."""

    scenario: Scenario
    channels: object
    grid: object
    array: object
    params: object
    gamma: np.ndarray
    p_max: float

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario.parse(self.scenario))
        K = self.channels.n_users
        gamma = np.broadcast_to(np.asarray(self.gamma, dtype=float), (K,)).copy()
        if np.any(gamma <= 0):
            raise ValueError("SINR targets must be positive")
        if not self.p_max > 0:
            raise ValueError("p_max must be positive")
        if self.channels.n_tx != self.array.n_tx:
            raise DimensionError("channel length does not match the number of transmit antennas")
        if self.grid.path_gains.shape[1] != K:
            raise DimensionError("grid and channels disagree on the number of BSs")
        object.__setattr__(self, "gamma", gamma)

    @property
    def n_bs(self):
        return self.channels.n_users

    def weights(self):
        """(M, K) energy weight of each transmitting BS at each grid point."""
        return link_weights(self.scenario, self.grid, self.params, self.array)

    def energies(self, beamformers):
        return reflection_energies(self.scenario, beamformers, self.grid, self.params, self.array)


@dataclass
class SolveReport:
    scenario: Scenario
    status: SolveStatus
    beamformers: np.ndarray | None
    sdr_bound: float
    achieved_min_energy: float
    per_cu_sinr: np.ndarray | None
    per_bs_power: np.ndarray | None
    rank_one_direct: bool
    randomization_trials_used: int
    energies: np.ndarray | None = field(default=None, repr=False)

    @property
    def feasible(self):
        return self.beamformers is not None

    def to_dict(self):
        def arr(a):
            return None if a is None else [float(v) for v in np.asarray(a)]

        out = {
            "scenario": self.scenario.value,
            "status": self.status.value,
            "sdr_bound": float(self.sdr_bound),
            "achieved_min_energy": float(self.achieved_min_energy),
            "per_cu_sinr": arr(self.per_cu_sinr),
            "per_bs_power": arr(self.per_bs_power),
            "rank_one_direct": bool(self.rank_one_direct),
            "randomization_trials_used": int(self.randomization_trials_used),
        }
        if self.beamformers is not None:
            out["beamformers"] = [
                {"re": [float(v) for v in w.real], "im": [float(v) for v in w.imag]} for w in self.beamformers
            ]
        return out


def _sinr_blocks(channels, gamma, k):
    h = channels.channels
    blocks = {}
    for i in range(channels.n_users):
        hh = np.outer(h[k, i], np.conj(h[k, i]))
        blocks[i] = hh / gamma[k] if i == k else -hh
    return blocks


def build_detection_sdr(problem: DetectionProblem) -> ConicProgram:
    """Semidefinite relaxation of the max-min detection problem.

    Variables are ``W_0..W_{K-1}`` (PSD, size N_t) and the scalar ``t``.
    Rows: one energy row per grid point, one SINR row per user, one power
    row per BS. Energies are in watts (the ``N_r zeta^2`` factor is folded
    into the row coefficients) so ``t`` is directly the worst-case
    reflection energy.
    """
    K, n_t = problem.n_bs, problem.array.n_tx
    prog = ConicProgram(psd_block_dims=[n_t] * K, n_scalars=1, objective_scalars={0: 1.0}, maximize=True)

    weights = problem.weights()
    a = transmit_steering(problem.grid, problem.array)
    for m in range(problem.grid.n_points):
        blocks = {}
        for i in range(K):
            if weights[m, i] > 0:
                blocks[i] = weights[m, i] * np.outer(np.conj(a[m, i]), a[m, i])
        prog.add_constraint(blocks, {0: -1.0}, ">=", 0.0)
    for k in range(K):
        prog.add_constraint(_sinr_blocks(problem.channels, problem.gamma, k), sense=">=", rhs=problem.channels.noise_power_c)
    for i in range(K):
        prog.add_constraint({i: np.eye(n_t)}, sense="<=", rhs=problem.p_max)
    return prog


def extract_rank_one(W, epsilon=RANK_ONE_EPS):
    """Principal component ``sqrt(l1) u1`` if ``l1 / tr(W) >= 1 - epsilon``, else None."""
    W = np.asarray(W, dtype=complex)
    vals, vecs = np.linalg.eigh((W + W.conj().T) / 2)
    total = vals.sum()
    if total <= 0:
        return np.zeros(W.shape[0], dtype=complex) if np.allclose(W, 0) else None
    if vals[-1] / total >= 1 - epsilon:
        return np.sqrt(max(vals[-1], 0.0)) * vecs[:, -1]
    return None


def _direction_gains(directions, problem):
    a = transmit_steering(problem.grid, problem.array)
    sens = problem.weights() * np.abs(np.einsum("mkn,kn->mk", a, directions)) ** 2
    comm = np.abs(np.einsum("kin,in->ki", np.conj(problem.channels.channels), directions)) ** 2
    return sens, comm


def solve_power_lp(directions, problem: DetectionProblem, solver=solve_conic, tol=1e-8):
    """Optimal per-BS powers for fixed unit beam directions, or None if infeasible.

    Solves ``max t`` s.t. ``sum_i c[m, i] p_i >= t`` for every grid point,
    the linearized SINR rows, and ``0 <= p_i <= p_max``. A solve that stops
    short of ``tol`` still returns its (clipped) powers; callers must check
    the SINR targets themselves.
    """
    directions = np.asarray(directions, dtype=complex)
    K = problem.n_bs
    if directions.shape != (K, problem.array.n_tx):
        raise DimensionError(f"directions must have shape ({K}, {problem.array.n_tx})")
    norms = np.linalg.norm(directions, axis=1)
    if np.any(np.abs(norms - 1) > 1e-9):
        raise ValueError("directions must have unit norm")
    sens, comm = _direction_gains(directions, problem)

    prog = ConicProgram(psd_block_dims=[], n_scalars=K + 1, objective_scalars={K: 1.0})
    for m in range(sens.shape[0]):
        row = {i: sens[m, i] for i in range(K) if sens[m, i] != 0}
        row[K] = -1.0
        prog.add_constraint(scalars=row, sense=">=", rhs=0.0)
    for k in range(K):
        row = {i: -comm[k, i] for i in range(K) if i != k}
        row[k] = comm[k, k] / problem.gamma[k]
        prog.add_constraint(scalars=row, sense=">=", rhs=problem.channels.noise_power_c)
    for i in range(K):
        prog.add_constraint(scalars={i: 1.0}, sense="<=", rhs=problem.p_max)
    sol = solver(prog, tol=tol)
    powers = sol.primal_scalars[:K]
    if sol.status is SolveStatus.INFEASIBLE or not np.all(np.isfinite(powers)):
        return None
    return np.clip(powers, 0.0, problem.p_max)


def _meets_constraints(beamformers, problem, slack=SINR_SLACK):
    sinr = sinr_eval(beamformers, problem.channels)
    power = np.sum(np.abs(beamformers) ** 2, axis=1)
    return np.all(sinr >= problem.gamma * (1 - slack)) and np.all(power <= problem.p_max * (1 + 1e-12))


def _report(problem, w, sdr_bound, rank_one, trials):
    energies = problem.energies(w)
    return SolveReport(
        scenario=problem.scenario,
        status=SolveStatus.OPTIMAL,
        beamformers=w,
        sdr_bound=float(sdr_bound),
        achieved_min_energy=float(energies.min()),
        per_cu_sinr=sinr_eval(w, problem.channels),
        per_bs_power=np.sum(np.abs(w) ** 2, axis=1),
        rank_one_direct=rank_one,
        randomization_trials_used=trials,
        energies=energies,
    )


def _from_directions(directions, powers):
    return np.sqrt(powers)[:, None] * directions


def _try_rank_one(covariances, problem, epsilon, solver):
    vecs = [extract_rank_one(W, epsilon) for W in covariances]
    if any(v is None for v in vecs):
        return None
    v = np.array(vecs)
    norms = np.linalg.norm(v, axis=1)
    if np.any(norms == 0):
        return None
    directions = v / norms[:, None]
    w = _from_directions(directions, np.minimum(norms**2, problem.p_max))
    if _meets_constraints(w, problem):
        return w
    # extraction residue broke a constraint: re-optimize powers along the
    # principal directions
    powers = solve_power_lp(directions, problem, solver=solver)
    if powers is None:
        return None
    w = _from_directions(directions, powers)
    return w if _meets_constraints(w, problem) else None


def gaussian_randomize(
    covariances, problem: DetectionProblem, sdr_bound, n_g=200, seed=0, epsilon=RANK_ONE_EPS, solver=solve_conic
) -> SolveReport:
    """Rank-one beamformers from an SDR solution.

    If every ``W_i`` is numerically rank one its principal component is
    returned directly. Otherwise ``n_g`` candidates ``u_i = U_i S_i^{1/2} r_i``
    (``r_i`` standard CSCG) are normalized, their powers re-optimized by
    :func:`solve_power_lp`, and the best feasible candidate is kept
    (earliest trial on ties).
    """
    if n_g < 1:
        raise ValueError("n_g must be at least 1")
    direct = _try_rank_one(covariances, problem, epsilon, solver)
    if direct is not None:
        return _report(problem, direct, sdr_bound, True, 0)

    factors = []
    for W in covariances:
        vals, vecs = np.linalg.eigh((W + W.conj().T) / 2)
        factors.append(vecs * np.sqrt(np.clip(vals, 0.0, None)))
    K, n_t = problem.n_bs, problem.array.n_tx
    rng = np.random.default_rng(seed)

    best, best_val = None, -np.inf
    for _ in range(n_g):
        r = (rng.standard_normal((K, n_t)) + 1j * rng.standard_normal((K, n_t))) / np.sqrt(2)
        u = np.einsum("kij,kj->ki", np.array(factors), r)
        norms = np.linalg.norm(u, axis=1)
        if np.any(norms == 0):
            continue
        directions = u / norms[:, None]
        powers = solve_power_lp(directions, problem, solver=solver)
        if powers is None:
            continue
        w = _from_directions(directions, powers)
        if not _meets_constraints(w, problem):
            continue
        val = problem.energies(w).min()
        if val > best_val:
            best, best_val = w, val
    if best is None:
        raise RandomizationFailure(f"all {n_g} randomization trials were infeasible", sdr_bound)
    return _report(problem, best, sdr_bound, False, n_g)


def _failed_report(problem, status, sdr_bound=np.nan):
    return SolveReport(
        scenario=problem.scenario,
        status=status,
        beamformers=None,
        sdr_bound=float(sdr_bound),
        achieved_min_energy=np.nan,
        per_cu_sinr=None,
        per_bs_power=None,
        rank_one_direct=False,
        randomization_trials_used=0,
    )


def solve_detection(problem: DetectionProblem, n_g=200, seed=0, epsilon=RANK_ONE_EPS, tol=1e-8, solver=solve_conic):
    """Solve the relaxation and recover rank-one beamformers.

    Infeasible SINR targets come back as a report with status INFEASIBLE
    and no beamformers. Raises :class:`RandomizationFailure` when the
    relaxation is solvable but no randomization candidate is feasible.
    """
    sol = solver(build_detection_sdr(problem), tol=tol)
    if sol.status is not SolveStatus.OPTIMAL:
        return _failed_report(problem, sol.status)
    return gaussian_randomize(sol.primal_matrices, problem, sol.objective, n_g=n_g, seed=seed, epsilon=epsilon, solver=solver)


def build_min_power_sdr(channels, gamma) -> ConicProgram:
    """Relaxation of ``min sum_i ||w_i||^2`` subject to the SINR targets."""
    K, n_t = channels.n_users, channels.n_tx
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (K,))
    prog = ConicProgram(
        psd_block_dims=[n_t] * K, objective_blocks={i: np.eye(n_t) for i in range(K)}, maximize=False
    )
    for k in range(K):
        prog.add_constraint(_sinr_blocks(channels, gamma, k), sense=">=", rhs=channels.noise_power_c)
    return prog


def _min_power_lp(directions, channels, gamma, solver):
    K = channels.n_users
    comm = np.abs(np.einsum("kin,in->ki", np.conj(channels.channels), directions)) ** 2
    prog = ConicProgram(psd_block_dims=[], n_scalars=K, objective_scalars={i: 1.0 for i in range(K)}, maximize=False)
    for k in range(K):
        row = {i: -comm[k, i] for i in range(K) if i != k}
        row[k] = comm[k, k] / gamma[k]
        prog.add_constraint(scalars=row, sense=">=", rhs=channels.noise_power_c)
    sol = solver(prog, tol=1e-8)
    if sol.status is SolveStatus.INFEASIBLE or not np.all(np.isfinite(sol.primal_scalars)):
        return None
    powers = np.clip(sol.primal_scalars, 0.0, None)
    w = _from_directions(directions, powers)
    gamma = np.broadcast_to(gamma, (K,))
    return powers if np.all(sinr_eval(w, channels) >= gamma * (1 - SINR_SLACK)) else None


def min_power_beamformers(channels, gamma, tol=1e-9, n_g=200, seed=0, solver=solve_conic):
    """Minimum total-power beamformers meeting the SINR targets (no power cap)."""
    K = channels.n_users
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (K,))
    sol = solver(build_min_power_sdr(channels, gamma), tol=tol)
    if sol.status is not SolveStatus.OPTIMAL:
        raise BenchmarkInfeasible(f"minimum-power problem not solved ({sol.status.value})")

    vecs = [extract_rank_one(W) for W in sol.primal_matrices]
    if all(v is not None for v in vecs):
        v = np.array(vecs)
        directions = v / np.linalg.norm(v, axis=1)[:, None]
        powers = _min_power_lp(directions, channels, gamma, solver)
        if powers is not None:
            return _from_directions(directions, powers)

    factors = []
    for W in sol.primal_matrices:
        vals, vecs_ = np.linalg.eigh(W)
        factors.append(vecs_ * np.sqrt(np.clip(vals, 0.0, None)))
    rng = np.random.default_rng(seed)
    best, best_power = None, np.inf
    for _ in range(n_g):
        r = (rng.standard_normal((K, channels.n_tx)) + 1j * rng.standard_normal((K, channels.n_tx))) / np.sqrt(2)
        u = np.einsum("kij,kj->ki", np.array(factors), r)
        directions = u / np.linalg.norm(u, axis=1)[:, None]
        powers = _min_power_lp(directions, channels, gamma, solver)
        if powers is not None and powers.sum() < best_power:
            best, best_power = _from_directions(directions, powers), powers.sum()
    if best is None:
        raise BenchmarkInfeasible("no feasible minimum-power beamformers found")
    return best


def comm_benchmark(channels, gamma, p_max, tol=1e-9, solver=solve_conic):
    """Communication-only design: min-power beamformers scaled up to the power cap.

    All beamformers share one amplitude factor ``min_i sqrt(p_max) / ||w_i||``,
    so at least one BS transmits at exactly ``p_max``. A common factor of at
    least one cannot lower any SINR.
    """
    if not p_max > 0:
        raise ValueError("p_max must be positive")
    w_bar = min_power_beamformers(channels, gamma, tol=tol, solver=solver)
    norms = np.linalg.norm(w_bar, axis=1)
    if np.all(norms == 0):
        raise BenchmarkInfeasible("minimum-power solution is identically zero")
    scale = np.min(np.sqrt(p_max) / norms[norms > 0])
    if scale < 1:
        raise BenchmarkInfeasible(
            f"minimum-power solution needs {norms.max() ** 2:.4g} W at one BS, above p_max={p_max:.4g} W"
        )
    return scale * w_bar
