"""Small dense conic programs over Hermitian PSD blocks and nonnegative scalars.

A :class:`ConicProgram` optimizes a linear objective over Hermitian PSD
matrices ``W_b`` and nonnegative scalars ``s_j`` subject to linear
(in)equalities ``sum_b tr(C_b W_b) + sum_j c_j s_j  (<=, >=, ==)  rhs``.
Linear programs are the special case without PSD blocks.

:func:`solve_conic` embeds every Hermitian block into the real symmetric
cone (``[[Re, -Im], [Im, Re]]``, trace functionals halved), equilibrates
the data and runs an infeasible primal-dual path-following method with
Nesterov-Todd scaling and a Mehrotra predictor-corrector step. The problems
handled here are tiny (a few blocks of side <= 64, about 20 rows) so every
linear-algebra step is dense.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

_SENSES = ("<=", ">=", "==")


class SolveStatus(enum.Enum):
    OPTIMAL = "OPTIMAL"
    INFEASIBLE = "INFEASIBLE"
    NUMERICAL_LIMIT = "NUMERICAL_LIMIT"


@dataclass
class LinearConstraint:
    """``sum_b tr(blocks[b] W_b) + sum_j scalars[j] s_j  sense  rhs``."""

    blocks: dict = field(default_factory=dict)
    scalars: dict = field(default_factory=dict)
    sense: str = "<="
    rhs: float = 0.0

    def __post_init__(self):
        if self.sense not in _SENSES:
            raise ValueError(f"sense must be one of {_SENSES}, got {self.sense!r}")


@dataclass
class ConicProgram:
    """Linear objective and constraints over Hermitian PSD blocks and scalars.

    Scalars are nonnegative. Block coefficient matrices must be Hermitian
    so every functional is real-valued.
    """

    psd_block_dims: list
    n_scalars: int = 0
    objective_blocks: dict = field(default_factory=dict)
    objective_scalars: dict = field(default_factory=dict)
    constraints: list = field(default_factory=list)
    maximize: bool = True

    def add_constraint(self, blocks=None, scalars=None, sense="<=", rhs=0.0):
        self.constraints.append(LinearConstraint(dict(blocks or {}), dict(scalars or {}), sense, float(rhs)))

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    def evaluate(self, matrices, scalars=()):
        """Objective value and constraint left-hand sides at a given point."""
        scalars = np.asarray(scalars, dtype=float)

        def functional(blocks, coeffs):
            val = sum(np.vdot(C, matrices[b]).real for b, C in blocks.items())
            return val + sum(c * scalars[j] for j, c in coeffs.items())

        obj = functional(self.objective_blocks, self.objective_scalars)
        lhs = np.array([functional(c.blocks, c.scalars) for c in self.constraints])
        return obj, lhs


@dataclass
class ConicSolution:
    primal_matrices: list
    primal_scalars: np.ndarray
    objective: float
    dual_objective: float
    duality_gap: float
    primal_residual: float
    dual_residual: float
    status: SolveStatus
    iterations: int
    message: str = ""


def embed_hermitian(H):
    """Real symmetric embedding ``[[Re H, -Im H], [Im H, Re H]]``."""
    H = np.asarray(H)
    re, im = H.real, H.imag
    return np.block([[re, -im], [im, re]])


def extract_hermitian(X):
    """Inverse of :func:`embed_hermitian`, averaging the redundant copies."""
    n = X.shape[0] // 2
    re = (X[:n, :n] + X[n:, n:]) / 2
    im = (X[n:, :n] - X[:n, n:]) / 2
    H = re + 1j * im
    return (H + H.conj().T) / 2


class _StandardForm:
    """min <C, X> s.t. A(X) = b, X in (PSD blocks) x (nonnegative orthant)."""

    def __init__(self, program: ConicProgram):
        m = program.n_constraints
        n_ineq = sum(c.sense != "==" for c in program.constraints)
        self.n_scalars = program.n_scalars
        self.n_lp = program.n_scalars + n_ineq
        self.dims = [2 * int(n) for n in program.psd_block_dims]
        sign = -1.0 if program.maximize else 1.0

        self.A = [np.zeros((m, n, n)) for n in self.dims]
        self.A_lp = np.zeros((m, self.n_lp))
        self.b = np.zeros(m)
        slack = program.n_scalars
        for i, con in enumerate(program.constraints):
            for blk, coeff in con.blocks.items():
                self.A[blk][i] = embed_hermitian(coeff) / 2
            for j, c in con.scalars.items():
                self.A_lp[i, j] = c
            if con.sense == "<=":
                self.A_lp[i, slack] = 1.0
                slack += 1
            elif con.sense == ">=":
                self.A_lp[i, slack] = -1.0
                slack += 1
            self.b[i] = con.rhs

        self.C = [np.zeros((n, n)) for n in self.dims]
        for blk, coeff in program.objective_blocks.items():
            self.C[blk] = sign * embed_hermitian(coeff) / 2
        self.C_lp = np.zeros(self.n_lp)
        for j, c in program.objective_scalars.items():
            self.C_lp[j] = sign * c
        self.sign = sign

    def equilibrate(self, sweeps=30):
        """Scale rows and variable groups toward unit magnitude.

        Geometric-mean scaling over the structural entries (each PSD block
        counts as one column, entry size = Frobenius norm of its row
        coefficient) followed by resetting slack columns to +-1. Returns
        ``(row_scale, block_scale, lp_scale, objective_scale)``.
        """
        m = self.b.size
        ns = self.n_scalars
        mag = np.hstack(
            [np.array([np.linalg.norm(A.reshape(m, -1), axis=1) for A in self.A]).reshape(-1, m).T, np.abs(self.A_lp[:, :ns])]
        )
        log_mag = np.where(mag > 0, np.log(np.where(mag > 0, mag, 1.0)), np.nan)
        log_r = np.zeros(m)
        log_c = np.zeros(mag.shape[1])
        nz = ~np.isnan(log_mag)
        for _ in range(sweeps):
            cur = log_mag + log_r[:, None] + log_c[None, :]
            hi = np.where(nz, cur, -np.inf).max(axis=1, initial=-np.inf)
            lo = np.where(nz, cur, np.inf).min(axis=1, initial=np.inf)
            dr = np.where(np.isfinite(hi), -(hi + lo) / 2, 0.0)
            log_r += dr
            cur = log_mag + log_r[:, None] + log_c[None, :]
            hi = np.where(nz, cur, -np.inf).max(axis=0, initial=-np.inf)
            lo = np.where(nz, cur, np.inf).min(axis=0, initial=np.inf)
            dc = np.where(np.isfinite(hi), -(hi + lo) / 2, 0.0)
            log_c += dc
            if np.abs(dr).max(initial=0.0) < 1e-3 and np.abs(dc).max(initial=0.0) < 1e-3:
                break
        # finish with a max-norm pass so the largest entry of every row is 1
        cur = log_mag + log_r[:, None] + log_c[None, :]
        hi = np.where(nz, cur, -np.inf).max(axis=1, initial=-np.inf)
        log_r -= np.where(np.isfinite(hi), hi, 0.0)

        r = np.exp(log_r)
        s_blk = np.exp(log_c[: len(self.dims)])
        s_lp = np.ones(self.n_lp)
        s_lp[:ns] = np.exp(log_c[len(self.dims):])
        # slack j sits in exactly one row i; scale it to keep its entry at +-1
        for j in range(ns, self.n_lp):
            (rows,) = np.nonzero(self.A_lp[:, j])
            s_lp[j] = 1.0 / r[rows[0]]
        for k in range(len(self.A)):
            self.A[k] *= r[:, None, None] * s_blk[k]
            self.C[k] *= s_blk[k]
        self.A_lp *= r[:, None] * s_lp[None, :]
        self.C_lp *= s_lp
        self.b = self.b * r
        tau = np.abs(self.b).max(initial=0.0)
        tau = tau if tau > 0 else 1.0
        self.b /= tau
        c_norm = max(
            max((np.linalg.norm(C) for C in self.C), default=0.0),
            np.abs(self.C_lp).max(initial=0.0),
        )
        gamma = c_norm if c_norm > 0 else 1.0
        self.C = [C / gamma for C in self.C]
        self.C_lp = self.C_lp / gamma
        return r, s_blk * tau, s_lp * tau, gamma * tau

    # linear maps ---------------------------------------------------------
    def apply_A(self, X, x):
        m = self.b.size
        out = self.A_lp @ x
        for A, Xb in zip(self.A, X):
            out = out + A.reshape(m, -1) @ Xb.ravel()
        return out

    def apply_AT(self, y):
        return [np.tensordot(y, A, axes=1) for A in self.A], self.A_lp.T @ y

    def inner_C(self, X, x):
        return sum(np.vdot(C, Xb) for C, Xb in zip(self.C, X)) + self.C_lp @ x


def _sym(P):
    return (P + P.T) / 2


def _max_step(Linv, D):
    """Largest alpha with L L^T + alpha D PSD, given Linv = L^{-1}."""
    ev = np.linalg.eigvalsh(_sym(Linv @ D @ Linv.T))
    lo = ev[0]
    return np.inf if lo >= 0 else -1.0 / lo


def _max_step_lp(x, dx):
    neg = dx < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-x[neg] / dx[neg]))


class _Scaling:
    """Nesterov-Todd scaling of one PSD block: W Z W = X, W = G G^T."""

    def __init__(self, X, Z):
        L = np.linalg.cholesky(X)
        self.Linv = linalg.solve_triangular(L, np.eye(X.shape[0]), lower=True)
        S = _sym(L.T @ Z @ L)
        d, U = np.linalg.eigh(S)
        if d[0] <= 0:
            raise np.linalg.LinAlgError("dual iterate lost positive definiteness")
        q = d ** 0.25
        self.G = (L @ U) / q
        self.Ginv = (q[:, None] * U.T) @ self.Linv
        self.W = self.G @ self.G.T
        self.lam = np.sqrt(d)


def _interior_point(sf: _StandardForm, tol, max_iter, infeas_tol):
    m = sf.b.size
    nu = sum(sf.dims) + sf.n_lp
    b_norm = np.linalg.norm(sf.b)
    c_norm = np.sqrt(sum(np.sum(C**2) for C in sf.C) + np.sum(sf.C_lp**2))

    X, Z = [], []
    for A, C, n in zip(sf.A, sf.C, sf.dims):
        a_norms = np.linalg.norm(A.reshape(m, -1), axis=1) if m else np.zeros(0)
        xi = max(10.0, np.sqrt(n), np.max(np.sqrt(n) * (1 + np.abs(sf.b)) / (1 + a_norms), initial=0.0))
        eta = max(10.0, np.sqrt(n), np.max(a_norms, initial=0.0), np.linalg.norm(C))
        X.append(xi * np.eye(n))
        Z.append(eta * np.eye(n))
    if sf.n_lp:
        a_norms = np.abs(sf.A_lp).max(axis=0) if m else np.zeros(sf.n_lp)
        xi = max(10.0, np.sqrt(sf.n_lp), np.max((1 + np.abs(sf.b)).max(initial=1.0) / (1 + a_norms)))
        eta = max(10.0, np.sqrt(sf.n_lp), np.abs(sf.A_lp).max(initial=0.0), np.abs(sf.C_lp).max(initial=0.0))
    else:
        xi = eta = 1.0
    x = np.full(sf.n_lp, xi)
    z = np.full(sf.n_lp, eta)
    y = np.zeros(m)

    status, message = SolveStatus.NUMERICAL_LIMIT, "iteration limit reached"
    history = dict(gap=np.inf, pinf=np.inf, dinf=np.inf)
    it = 0
    stalls = 0
    best = (np.inf,)
    last_gain = 0
    for it in range(max_iter + 1):
        ATy, ATy_lp = sf.apply_AT(y)
        Rp = sf.b - sf.apply_A(X, x)
        Rd = [C - T - Zb for C, T, Zb in zip(sf.C, ATy, Z)]
        Rd_lp = sf.C_lp - ATy_lp - z
        pobj = sf.inner_C(X, x)
        dobj = sf.b @ y
        gap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        pinf = np.linalg.norm(Rp) / (1 + b_norm)
        rd_norm = np.sqrt(sum(np.sum(R**2) for R in Rd) + np.sum(Rd_lp**2))
        dinf = rd_norm / (1 + c_norm)
        history = dict(gap=gap, pinf=pinf, dinf=dinf)
        merit = max(gap, pinf, dinf)
        if merit < best[0]:
            if merit < 0.5 * best[0]:
                last_gain = it
            best = (merit, X, x, y, Z, z, history)

        if gap <= tol and pinf <= tol and dinf <= tol:
            status, message = SolveStatus.OPTIMAL, "converged"
            break
        if not np.isfinite(merit) or not np.isfinite(dobj):
            message = "iterates overflowed"
            break
        # primal infeasibility (Farkas): A^T y <= 0 in the cone order with b^T y > 0
        if dobj > 0:
            pos = [np.clip(np.linalg.eigvalsh(T), 0.0, None) for T in ATy]
            cert = np.sqrt(sum(np.sum(v**2) for v in pos) + np.sum(np.clip(ATy_lp, 0.0, None) ** 2))
            if cert / dobj <= infeas_tol:
                status, message = SolveStatus.INFEASIBLE, "dual improving ray found"
                break
        if pobj < 0 and np.linalg.norm(sf.b - Rp) / (-pobj) <= infeas_tol:
            status, message = SolveStatus.NUMERICAL_LIMIT, "dual infeasible (objective unbounded)"
            break
        # degenerate problems can stall just short of tol while x and z
        # underflow together; stop and keep the best iterate
        if best[0] < 1e-4 and it - last_gain >= 10:
            message = "no progress in 10 iterations"
            break
        if it == max_iter:
            break

        try:
            scal = [_Scaling(Xb, Zb) for Xb, Zb in zip(X, Z)]
        except np.linalg.LinAlgError as exc:
            message = f"lost positive definiteness: {exc}"
            break
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z)) and np.all(z > 0) and np.all(x > 0)):
            message = "iterates left the cone interior"
            break
        g_lp = np.sqrt(x / z)
        lam_lp = np.sqrt(x * z)
        w_lp = x / z

        M = (sf.A_lp * w_lp) @ sf.A_lp.T
        for A, s in zip(sf.A, scal):
            WAW = s.W @ A @ s.W
            M += A.reshape(m, -1) @ WAW.reshape(m, -1).T
        M = _sym(M)
        try:
            factor = linalg.cho_factor(M)
            solve_m = lambda r: linalg.cho_solve(factor, r)  # noqa: E731
        except (linalg.LinAlgError, ValueError):
            pinv = np.linalg.pinv(M)
            solve_m = lambda r: pinv @ r  # noqa: E731

        WRdW = [s.W @ R @ s.W for s, R in zip(scal, Rd)]

        def direction(Rs, Rs_lp):
            T = [2 * R / (s.lam[:, None] + s.lam[None, :]) for s, R in zip(scal, Rs)]
            GTG = [s.G @ Tb @ s.G.T for s, Tb in zip(scal, T)]
            T_lp = Rs_lp / lam_lp
            gT_lp = g_lp * T_lp
            rhs = Rp - sf.apply_A(GTG, gT_lp) + sf.apply_A(WRdW, w_lp * Rd_lp)
            dy = solve_m(rhs)
            for _ in range(3):
                ATdy, ATdy_lp = sf.apply_AT(dy)
                dZ = [_sym(R - T) for R, T in zip(Rd, ATdy)]
                dz = Rd_lp - ATdy_lp
                dX = [_sym(P - s.W @ D @ s.W) for P, s, D in zip(GTG, scal, dZ)]
                dx = gT_lp - w_lp * dz
                # refine dy against the operator actually applied
                resid = Rp - sf.apply_A(dX, dx)
                if np.linalg.norm(resid) <= 1e-15 * (1 + np.linalg.norm(Rp) + np.linalg.norm(rhs)):
                    break
                dy = dy + solve_m(resid)
            return dX, dx, dy, dZ, dz

        def steps(dX, dx, dZ, dz):
            ap = min([_max_step(s.Linv, D) for s, D in zip(scal, dX)] + [_max_step_lp(x, dx)])
            ad = min([_max_step_dual(Zb, D) for Zb, D in zip(Z, dZ)] + [_max_step_lp(z, dz)])
            return ap, ad

        mu = (sum(np.vdot(Xb, Zb) for Xb, Zb in zip(X, Z)) + x @ z) / nu

        # predictor
        Rs = [-np.diag(s.lam**2) for s in scal]
        dX, dx, dy, dZ, dz = direction(Rs, -(lam_lp**2))
        ap, ad = steps(dX, dx, dZ, dz)
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_aff = (
            sum(np.vdot(Xb + ap * D, Zb + ad * E) for Xb, D, Zb, E in zip(X, dX, Z, dZ))
            + (x + ap * dx) @ (z + ad * dz)
        ) / nu
        sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3 if mu > 0 else 0.0

        # corrector
        Rs = []
        for s, D, E in zip(scal, dX, dZ):
            dxs = s.Ginv @ D @ s.Ginv.T
            dzs = s.G.T @ E @ s.G
            Rs.append(sigma * mu * np.eye(len(s.lam)) - np.diag(s.lam**2) - _sym(dxs @ dzs))
        Rs_lp = sigma * mu - lam_lp**2 - (dx / g_lp) * (dz * g_lp)
        dX, dx, dy, dZ, dz = direction(Rs, Rs_lp)
        ap, ad = steps(dX, dx, dZ, dz)
        gamma = 0.9 + 0.09 * min(ap, ad, 1.0)
        ap, ad = min(1.0, gamma * ap), min(1.0, gamma * ad)
        if max(ap, ad) < 1e-10:
            stalls += 1
            if stalls >= 3:
                message = "step length collapsed"
                break
        else:
            stalls = 0

        X = [_sym(Xb + ap * D) for Xb, D in zip(X, dX)]
        x = x + ap * dx
        y = y + ad * dy
        Z = [_sym(Zb + ad * D) for Zb, D in zip(Z, dZ)]
        z = z + ad * dz

    if status is SolveStatus.NUMERICAL_LIMIT and len(best) > 1:
        # fall back to the most accurate iterate seen
        _, X, x, y, Z, z, history = best
    return X, x, y, Z, z, status, message, it, history


def _max_step_dual(Z, D):
    L = np.linalg.cholesky(Z)
    Linv = linalg.solve_triangular(L, np.eye(Z.shape[0]), lower=True)
    return _max_step(Linv, D)


def solve_conic(program: ConicProgram, tol=1e-8, max_iter=200, infeas_tol=1e-8) -> ConicSolution:
    """Solve ``program`` with the primal-dual interior-point method.

    ``status`` is OPTIMAL when the relative duality gap
    ``|p - d| / (1 + |p| + |d|)`` and the relative primal and dual residuals
    of the equilibrated problem are all at most ``tol``. INFEASIBLE means a
    normalized dual improving ray ``y / b^T y`` with residual at most
    ``infeas_tol`` was found. Anything else is NUMERICAL_LIMIT.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    for con in program.constraints:
        for blk, coeff in con.blocks.items():
            n = program.psd_block_dims[blk]
            if np.shape(coeff) != (n, n):
                raise ValueError(f"coefficient for block {blk} must be {n}x{n}")
            if np.abs(coeff - np.conj(np.transpose(coeff))).max(initial=0.0) > 1e-9 * max(1.0, np.abs(coeff).max()):
                raise ValueError("block coefficients must be Hermitian")

    sf = _StandardForm(program)
    r, s_blk, s_lp, obj_scale = sf.equilibrate()
    X, x, y, Z, z, status, message, iters, hist = _interior_point(sf, tol, max_iter, infeas_tol)

    mats = [extract_hermitian(s * Xb) for s, Xb in zip(s_blk, X)]
    x_orig = s_lp * x
    pobj = sf.inner_C(X, x) * obj_scale * sf.sign
    dobj = (sf.b @ y) * obj_scale * sf.sign
    return ConicSolution(
        primal_matrices=mats,
        primal_scalars=x_orig[: program.n_scalars],
        objective=float(pobj),
        dual_objective=float(dobj),
        duality_gap=float(hist["gap"]),
        primal_residual=float(hist["pinf"]),
        dual_residual=float(hist["dinf"]),
        status=status,
        iterations=iters,
        message=message,
    )
