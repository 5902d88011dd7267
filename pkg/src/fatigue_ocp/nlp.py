"""Smooth NLP solver behind a pluggable interface.

Two problem flavors are supported.  `GenericNlp` problems (dense callbacks)
are solved by a textbook SQP: damped quasi-Newton Lagrangian Hessian, an
l1 merit line search and a dense QP subproblem.  `ShootingNlp` problems use
the same SQP skeleton but exploit the multiple-shooting structure: the
quadratic objective Hessian is exact and constant, continuity constraints
are eliminated by condensing the state steps per cycle block (keeping cycle
boundary steps as QP variables so conditioning stays bounded on long
horizons), and shooting sensitivities come from vectorized complex-step
differentiation.

The QP subproblems min 1/2 y'Py + q'y s.t. lo <= Ay <= hi are solved by an
operator-splitting iteration followed by an active-set polish solve that
delivers high-accuracy primal/dual values for the merit and KKT machinery.
"""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .transcription import NX, NU, CTRL_OF_ACTUATOR, MF_IDX, ShootingNlp, path_values

__all__ = [
    "SolverStatus",
    "SolverConfig",
    "NlpSolution",
    "EvaluationFailure",
    "GenericNlp",
    "solve",
]

log = logging.getLogger("fatigue_ocp.nlp")

BIG = 1e20


class EvaluationFailure(RuntimeError):
    """Dynamics or callbacks returned non-finite values."""

    def __init__(self, message: str, node: Optional[int] = None):
        super().__init__(message if node is None
                         else f"{message} (node {node})")
        self.node = node


class SolverStatus(enum.Enum):
    CONVERGED = "Converged"
    MAX_ITER = "MaxIter"
    INFEASIBLE = "Infeasible"
    DIVERGED = "Diverged"


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and algorithm switches.

    hessian: 'bfgs' (damped quasi-Newton, default) or 'exact_fd' (finite
    differences of gradients) for generic problems.  Shooting problems
    always use the exact quadratic objective Hessian (Gauss-Newton style);
    the flag is ignored there.
    """

    tol_opt: float = 1e-6
    tol_con: float = 1e-4
    max_iter: int = 3000
    hessian: str = "bfgs"
    qp_max_iter: int = 1500
    qp_tol: float = 1e-9
    stall_iters: int = 50
    screen_margin: float = 0.15
    max_backtracks: int = 30

    def __post_init__(self):
        if self.tol_opt <= 0 or self.tol_con <= 0:
            raise ValueError("tolerances must be positive")
        if self.hessian not in ("bfgs", "exact_fd", "gauss_newton"):
            raise ValueError(f"unknown hessian mode {self.hessian!r}")


@dataclass
class NlpSolution:
    status: SolverStatus
    x: np.ndarray
    objective: float
    max_violation: float
    iterations: int
    wall_time: float
    kkt_residual: float = np.nan
    message: str = ""
    merit_history: list = field(default_factory=list, repr=False)
    penalty_history: list = field(default_factory=list, repr=False)

    @property
    def converged(self) -> bool:
        return self.status is SolverStatus.CONVERGED

    def summary_line(self) -> str:
        return (f"status={self.status.value} iters={self.iterations} "
                f"objective={self.objective:.8g} "
                f"violation={self.max_violation:.3e} "
                f"kkt={self.kkt_residual:.3e} wall={self.wall_time:.3f}s")


@dataclass
class GenericNlp:
    """Dense NLP: min f(z) s.t. ce(z) = 0, lo <= ci(z) <= hi, lb <= z <= ub."""

    n: int
    objective: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    eq: Optional[Callable] = None
    eq_jac: Optional[Callable] = None
    ineq: Optional[Callable] = None
    ineq_jac: Optional[Callable] = None
    ineq_lo: Optional[np.ndarray] = None
    ineq_hi: Optional[np.ndarray] = None
    lb: Optional[np.ndarray] = None
    ub: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.lb is None:
            self.lb = np.full(self.n, -np.inf)
        if self.ub is None:
            self.ub = np.full(self.n, np.inf)
        self.lb = np.asarray(self.lb, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)


# ---------------------------------------------------------------------------
# QP subproblem
# ---------------------------------------------------------------------------


def _solve_qp(P, q, A, lo, hi, max_iter=1500, tol=1e-9, warm=None):
    """min 1/2 y'Py + q'y s.t. lo <= A y <= hi (equality rows have lo == hi).

    Operator-splitting iteration with a cached Cholesky factor, finished by
    an active-set polish solve.  Returns (y, lam, info) where lam holds one
    multiplier per row (negative at lower-active rows, positive at upper).
    """
    p = P.shape[0]
    m = A.shape[0] if A is not None else 0
    if m == 0:
        y = np.linalg.solve(P, -q)
        return y, np.zeros(0), {"status": "solved", "iterations": 0}

    # normalize rows to unit inf-norm for a well-scaled splitting
    row_scale = np.maximum(np.max(np.abs(A), axis=1), 1e-10)
    As = A / row_scale[:, None]
    los = lo / row_scale
    his = hi / row_scale

    eq_mask = np.isclose(los, his)
    sigma = 1e-6
    rho = np.where(eq_mask, 1e3, 1.0) * 0.1
    K = P + sigma * np.eye(p) + (As.T * rho) @ As
    try:
        cho = scipy.linalg.cho_factor(K, check_finite=False)
    except np.linalg.LinAlgError:
        K = K + 1e-8 * np.eye(p)
        cho = scipy.linalg.cho_factor(K, check_finite=False)

    if warm is not None:
        y = warm[0].copy()
        lam = warm[1].copy() * row_scale
    else:
        y = np.zeros(p)
        lam = np.zeros(m)
    z = np.clip(As @ y, los, his)

    alpha = 1.6
    status = "max_iter"
    it = 0
    check_every = 25
    for it in range(1, max_iter + 1):
        rhs = sigma * y - q + As.T @ (rho * z - lam)
        y_t = scipy.linalg.cho_solve(cho, rhs, check_finite=False)
        z_t = As @ y_t
        y = alpha * y_t + (1.0 - alpha) * y
        w = alpha * z_t + (1.0 - alpha) * z
        z = np.clip(w + lam / rho, los, his)
        lam = lam + rho * (w - z)
        if it % check_every == 0 or it == max_iter:
            Ay = As @ y
            r_prim = np.max(np.abs(Ay - z)) if m else 0.0
            r_dual = np.max(np.abs(P @ y + q + As.T @ lam))
            sc_p = max(1.0, np.max(np.abs(Ay)), np.max(np.abs(z)))
            sc_d = max(1.0, np.max(np.abs(P @ y)), np.max(np.abs(q)))
            if r_prim <= tol * sc_p * 10 and r_dual <= tol * sc_d * 10:
                status = "solved"
                break

    y_pol, lam_pol = _polish_qp(P, q, As, los, his, eq_mask, y, lam)
    if y_pol is not None:
        y, lam = y_pol, lam_pol
        status = "solved" if status == "solved" else "polished"
    return y, lam / row_scale, {"status": status, "iterations": it}


def _polish_qp(P, q, A, lo, hi, eq_mask, y, lam):
    """Equality solve on the (guessed) active set; None when it fails."""
    m = A.shape[0]
    z = A @ y
    tol_act = 1e-7 * (1.0 + np.maximum(np.abs(lo), np.abs(hi)).clip(max=1e8))
    low_act = (~eq_mask) & ((lam < -1e-10) | (z <= lo + tol_act))
    upp_act = (~eq_mask) & ((lam > 1e-10) | (z >= hi - tol_act))
    # a row cannot be active on both sides unless it is an equality
    both = low_act & upp_act
    low_act &= ~both | (lam < 0)
    upp_act &= ~both | (lam > 0)
    act = np.where(eq_mask | low_act | upp_act)[0]
    rhs_act = np.where(eq_mask[act], lo[act],
                       np.where(low_act[act], lo[act], hi[act]))
    na = act.size
    p = P.shape[0]
    if na > 3 * p:
        return None, None
    Aact = A[act]
    delta = 1e-10
    KKT = np.block([[P + delta * np.eye(p), Aact.T],
                    [Aact, -delta * np.eye(na)]])
    rhs = np.concatenate([-q, rhs_act])
    try:
        sol = np.linalg.solve(KKT, rhs)
        # one refinement pass against the unregularized system
        K0 = np.block([[P, Aact.T], [Aact, np.zeros((na, na))]])
        sol = sol + np.linalg.solve(KKT, rhs - K0 @ sol)
    except np.linalg.LinAlgError:
        return None, None
    y_new = sol[:p]
    lam_new = np.zeros(m)
    lam_new[act] = sol[p:]
    z_new = A @ y_new
    viol = np.max(np.maximum(lo - z_new, z_new - hi).clip(min=0.0), initial=0.0)
    stat = np.max(np.abs(P @ y_new + q + A.T @ lam_new))
    viol_old = np.max(np.maximum(lo - z, z - hi).clip(min=0.0), initial=0.0)
    stat_old = np.max(np.abs(P @ y + q + A.T @ lam))
    if not np.all(np.isfinite(y_new)):
        return None, None
    if viol <= max(viol_old, 1e-9) * 1.05 and stat <= max(stat_old, 1e-9) * 1.05:
        return y_new, lam_new
    return None, None


# ---------------------------------------------------------------------------
# shared SQP helpers
# ---------------------------------------------------------------------------


def _interval_violation(v, lo, hi):
    return np.maximum(np.maximum(lo - v, v - hi), 0.0)


class _StallTracker:
    def __init__(self, tol_con: float, patience: int):
        self.tol_con = tol_con
        self.patience = patience
        self.best = np.inf
        self.count = 0

    def update(self, viol: float) -> bool:
        """Returns True when the violation has stalled above tolerance."""
        if viol <= self.tol_con:
            self.count = 0
            self.best = min(self.best, viol)
            return False
        if viol < 0.99 * self.best:
            self.best = viol
            self.count = 0
        else:
            self.count += 1
        return self.count >= self.patience


# ---------------------------------------------------------------------------
# shooting-structured SQP with per-cycle condensing
# ---------------------------------------------------------------------------


class _Condensed:
    """Affine maps dx_n = c_n + M_n dU_blk + P_n dxb_blk per cycle block."""

    def __init__(self, prob: ShootingNlp, A, B, cont_res, r_init):
        N = prob.N
        nc = prob.spec.nodes_per_cycle
        self.N = N
        self.block_of_node = np.minimum(np.arange(N + 1) // nc,
                                        (N - 1) // nc)
        self.n_blocks = (N + nc - 1) // nc
        self.starts = [b * nc for b in range(self.n_blocks)] + [N]
        self.n_du = NU * N
        self.n_bnd = NX * (self.n_blocks - 1)
        self.p = self.n_du + self.n_bnd
        self.c = np.zeros((N + 1, NX))
        self.P = np.zeros((N + 1, NX, NX))
        self.M = [None] * (N + 1)

        eye = np.eye(NX)
        for b in range(self.n_blocks):
            s, e = self.starts[b], self.starts[b + 1]
            width = NU * (e - s)
            c = r_init.copy() if b == 0 else np.zeros(NX)
            Pm = np.zeros((NX, NX)) if b == 0 else eye.copy()
            Mm = np.zeros((NX, width))
            self.c[s] = c
            self.P[s] = Pm
            self.M[s] = Mm
            for n in range(s, e):
                j = n - s
                c = A[n] @ c + cont_res[:, n]
                Pm = A[n] @ Pm
                Mm = A[n] @ Mm
                Mm = Mm.copy()
                Mm[:, NU * j: NU * (j + 1)] += B[n]
                self.c[n + 1] = c
                self.P[n + 1] = Pm
                self.M[n + 1] = Mm

    def du_cols(self, block: int) -> slice:
        s, e = self.starts[block], self.starts[block + 1]
        return slice(NU * s, NU * e)

    def bnd_cols(self, block: int) -> slice:
        # boundary step variable owned by blocks 1..n_blocks-1
        return slice(self.n_du + NX * (block - 1), self.n_du + NX * block)

    def row(self, node: int, comp: int) -> np.ndarray:
        """Dense coefficient row of dx[comp] at a node over the QP variables."""
        out = np.zeros(self.p)
        b = self.block_of_node[node] if node < self.N else self.n_blocks - 1
        if node == self.starts[b] and b > 0:
            out[self.bnd_cols(b)][comp] = 0.0  # placeholder, set below
        out[self.du_cols(b)] = self.M[node][comp]
        if b > 0:
            cols = self.bnd_cols(b)
            out[cols.start: cols.stop] = self.P[node][comp]
        return out

    def boundary_rows(self):
        """Equality rows tying each block's incoming step to its variable."""
        rows = []
        rhs = []
        for b in range(1, self.n_blocks):
            node = self.starts[b]
            prev = b - 1
            for comp in range(NX):
                r = np.zeros(self.p)
                r[self.du_cols(prev)] = self.M[node][comp]
                if prev > 0:
                    cols = self.bnd_cols(prev)
                    r[cols.start: cols.stop] = self.P[node][comp]
                cols_b = self.bnd_cols(b)
                r[cols_b.start + comp] -= 1.0
                rows.append(r)
                rhs.append(-self.c[node][comp])
        if not rows:
            return np.zeros((0, self.p)), np.zeros(0)
        return np.asarray(rows), np.asarray(rhs)

    def reconstruct(self, y: np.ndarray) -> np.ndarray:
        """Full state-step trajectory dX (16, N+1) from QP variables."""
        dX = np.empty((NX, self.N + 1))
        for n in range(self.N + 1):
            b = self.block_of_node[n] if n < self.N else self.n_blocks - 1
            v = self.c[n] + self.M[n] @ y[self.du_cols(b)]
            if b > 0:
                v = v + self.P[n] @ y[self.bnd_cols(b)]
            dX[:, n] = v
        return dX


def _shooting_violations(prob: ShootingNlp, X, U, cont_res):
    """(max violation, l1 sum) over all constraint families."""
    init_res = prob.x_init - X[:, 0]
    task = np.array([X[idx, node] - target
                     for node, idx, target in prob.task_rows])
    pv = path_values(prob.spec, X, U)
    path_viol = _interval_violation(pv, 0.0, 1.0)
    sb_viol = np.maximum(
        np.maximum(prob.lb_x[:, None] - X, X - prob.ub_x[:, None]), 0.0)
    sb_viol[~np.isfinite(sb_viol)] = 0.0
    cb_viol = np.maximum(
        np.maximum(prob.lb_u[:, None] - U, U - prob.ub_u[:, None]), 0.0)
    vmax = max(
        np.max(np.abs(cont_res), initial=0.0),
        np.max(np.abs(init_res), initial=0.0),
        np.max(np.abs(task), initial=0.0) if task.size else 0.0,
        np.max(path_viol, initial=0.0),
        np.max(sb_viol, initial=0.0),
        np.max(cb_viol, initial=0.0),
    )
    l1 = (np.sum(np.abs(cont_res)) + np.sum(np.abs(init_res))
          + np.sum(np.abs(task)) + np.sum(path_viol) + np.sum(sb_viol)
          + np.sum(cb_viol))
    return vmax, l1


def _check_finite_step(phi: np.ndarray):
    bad = ~np.all(np.isfinite(phi), axis=0)
    if np.any(bad):
        raise EvaluationFailure("dynamics returned non-finite values",
                                node=int(np.argmax(bad)))


def _solve_shooting(prob: ShootingNlp, z0: np.ndarray, cfg: SolverConfig) -> NlpSolution:
    t_start = time.perf_counter()
    N = prob.N
    z = np.asarray(z0, dtype=float).copy()
    if z.shape != (prob.n_vars,):
        raise ValueError(f"initial guess has wrong shape {z.shape}")
    X, U = prob.split(z)
    U = np.clip(U, prob.lb_u[:, None], prob.ub_u[:, None])
    finite_lb = np.where(np.isfinite(prob.lb_x), prob.lb_x, -np.inf)
    finite_ub = np.where(np.isfinite(prob.ub_x), prob.ub_x, np.inf)
    X = np.clip(X, finite_lb[:, None], finite_ub[:, None])
    X[:, 0] = np.clip(prob.x_init, finite_lb, finite_ub)
    z = prob.join(X, U)

    mu = 10.0
    merit_hist: list[float] = []
    mu_hist: list[float] = []
    stall = _StallTracker(cfg.tol_con, cfg.stall_iters)
    warm_duals: dict = {}
    status = SolverStatus.MAX_ITER
    message = ""
    kkt_res = np.nan
    relax = 0.0
    it = 0

    def merit_of(Xc, Uc, mu_val):
        phi_c = prob.step_batch(Xc[:, :-1], Uc)
        if not np.all(np.isfinite(phi_c)):
            return np.inf, np.inf, None
        cont = phi_c - Xc[:, 1:]
        vmax, l1 = _shooting_violations(prob, Xc, Uc, cont)
        obj = prob.objective(prob.join(Xc, Uc))
        return obj + mu_val * l1, vmax, (obj, l1)

    X, U = prob.split(z)
    for it in range(1, cfg.max_iter + 1):
        phi, A, B = prob.step_with_jac(X[:, :-1], U)
        _check_finite_step(phi)
        cont_res = phi - X[:, 1:]
        vmax, l1 = _shooting_violations(prob, X, U, cont_res)
        obj = prob.objective(prob.join(X, U))

        cond = _Condensed(prob, A, B, cont_res, prob.x_init - X[:, 0])
        p = cond.p

        # quadratic model: exact (constant) objective Hessian reduced to QP vars
        Dx = prob.hess_x_diag()
        obj_comps = np.where(Dx > 0)[0]
        gx, gu = prob.gradient_blocks(z)
        G_rows = []
        G_w = []
        g_lin = np.zeros(p)
        for n in range(N):  # nodes 0..N-1 carry objective terms
            for comp in obj_comps:
                r = cond.row(n, comp)
                G_rows.append(r)
                G_w.append(Dx[comp])
                g_lin += (gx[comp, n] + Dx[comp] * cond.c[n, comp]) * r
        G = np.asarray(G_rows)
        P = np.zeros((p, p))
        if G.size:
            P[:, :] = (G.T * np.asarray(G_w)) @ G
        P[:cond.n_du, :cond.n_du] += prob.hess_uu()
        P[np.diag_indices_from(P)] += 1e-8 * max(1.0, np.max(np.abs(np.diag(P))))
        q = g_lin
        q[:cond.n_du] += gu.T.ravel()

        rows, lo_r, hi_r, keys = _assemble_rows(prob, cond, X, U, cfg, relax)

        warm = _warm_vector(keys, warm_duals, p)
        y, lam, qp_info = _solve_qp(P, q, rows, lo_r, hi_r,
                                    max_iter=cfg.qp_max_iter, tol=cfg.qp_tol,
                                    warm=warm)
        if qp_info["status"] == "max_iter":
            # widen soft rows and retry once; keeps progress possible when the
            # linearized constraints are locally inconsistent
            relax = max(relax * 10.0, cfg.tol_con)
            rows, lo_r, hi_r, keys = _assemble_rows(prob, cond, X, U, cfg, relax)
            y, lam, qp_info = _solve_qp(P, q, rows, lo_r, hi_r,
                                        max_iter=cfg.qp_max_iter,
                                        tol=cfg.qp_tol, warm=None)
        else:
            relax = 0.0
        warm_duals = dict(zip(keys, lam))

        dU = y[:cond.n_du].reshape(N, NU).T
        dX = cond.reconstruct(y)

        nu, stat_res = _shooting_kkt(prob, cond, A, B, gx, gu, lam, keys)
        kkt_res = stat_res

        if vmax <= cfg.tol_con and stat_res <= cfg.tol_opt:
            status = SolverStatus.CONVERGED
            message = "first-order optimal within tolerances"
            break

        if stall.update(vmax):
            status = SolverStatus.INFEASIBLE
            message = (f"constraint violation stalled at {vmax:.3e} "
                       f"for {cfg.stall_iters} iterations")
            break

        lam_scale = max(np.max(np.abs(lam)) if lam.size else 0.0,
                        np.max(np.abs(nu)) if nu.size else 0.0)
        mu = max(mu, 1.2 * lam_scale + 0.1)

        g_full = prob.gradient(z)
        d_full = prob.join(dX, dU)
        descent = float(g_full @ d_full) - mu * l1

        merit0 = obj + mu * l1
        alpha = 1.0
        accepted = False
        for _ in range(cfg.max_backtracks):
            X_try = X + alpha * dX
            U_try = U + alpha * dU
            merit_try, v_try, parts = merit_of(X_try, U_try, mu)
            if merit_try <= merit0 + 1e-4 * alpha * min(descent, 0.0) + 1e-12:
                accepted = True
                break
            alpha *= 0.5
        step_norm = alpha * max(np.max(np.abs(dU), initial=0.0),
                                np.max(np.abs(dX), initial=0.0))
        log.debug("iter %4d obj %.8e viol %.3e kkt %.3e mu %.1e alpha %.3f",
                  it, obj, vmax, stat_res, mu, alpha if accepted else 0.0)
        merit_hist.append(merit0)
        mu_hist.append(mu)
        if accepted:
            X, U = X_try, U_try
            z = prob.join(X, U)
        else:
            mu *= 10.0
            if mu > 1e14:
                status = SolverStatus.DIVERGED
                message = "line search failed with maximal penalty"
                break
        if step_norm < 1e-14 and vmax > cfg.tol_con:
            # direction vanished while infeasible: count as a stall event
            if stall.update(vmax):
                status = SolverStatus.INFEASIBLE
                message = "vanishing steps while infeasible"
                break

    wall = time.perf_counter() - t_start
    z = prob.join(X, U)
    phi_f = prob.step_batch(X[:, :-1], U)
    cont_f = phi_f - X[:, 1:]
    vmax_f, _ = _shooting_violations(prob, X, U, cont_f)
    sol = NlpSolution(
        status=status,
        x=z,
        objective=prob.objective(z),
        max_violation=float(vmax_f),
        iterations=it,
        wall_time=wall,
        kkt_residual=float(kkt_res),
        message=message,
        merit_history=merit_hist,
        penalty_history=mu_hist,
    )
    log.info("shooting solve: %s", sol.summary_line())
    return sol


def _assemble_rows(prob: ShootingNlp, cond: _Condensed, X, U,
                   cfg: SolverConfig, relax: float):
    """Linear QP rows: boundary equalities, task targets, capacity rows,
    screened state bounds and control bounds.  Soft rows widen by `relax`."""
    N = prob.N
    rows = []
    lo = []
    hi = []
    keys = []

    brows, brhs = cond.boundary_rows()
    for i in range(brows.shape[0]):
        rows.append(brows[i])
        lo.append(brhs[i])
        hi.append(brhs[i])
        keys.append(("bnd", i, 0))

    for j, (node, idx, target) in enumerate(prob.task_rows):
        r = cond.row(node, idx)
        rhs = target - X[idx, node] - cond.c[node, idx]
        rows.append(r)
        lo.append(rhs - relax)
        hi.append(rhs + relax)
        keys.append(("task", j, 0))

    inv_den = prob.spec.inv_denom[:, 0]
    pv = path_values(prob.spec, X, U)
    for n in range(N + 1):
        interval = min(n, N - 1)
        for k in range(4):
            mf_i = MF_IDX[k]
            r = cond.row(n, mf_i)
            r[cond.du_cols(cond.block_of_node[interval])] += 0.0
            ucol = NU * interval + CTRL_OF_ACTUATOR[k]
            r[ucol] += inv_den[k]
            base = pv[k, n] + cond.c[n, mf_i]
            rows.append(r)
            lo.append(0.0 - base - relax)
            hi.append(1.0 - base + relax)
            keys.append(("path", n, k))

    margin = cfg.screen_margin
    for n in range(1, N + 1):
        for idx in prob.bounded_state_idx:
            lb_v, ub_v = prob.lb_x[idx], prob.ub_x[idx]
            span = (ub_v - lb_v) if np.isfinite(ub_v - lb_v) else 1.0
            xv = X[idx, n]
            near = ((np.isfinite(lb_v) and xv - lb_v < margin * span)
                    or (np.isfinite(ub_v) and ub_v - xv < margin * span))
            if not near:
                continue
            r = cond.row(n, idx)
            shift = xv + cond.c[n, idx]
            rows.append(r)
            lo.append((lb_v if np.isfinite(lb_v) else -BIG) - shift - relax)
            hi.append((ub_v if np.isfinite(ub_v) else BIG) - shift + relax)
            keys.append(("sb", n, idx))

    for n in range(N):
        for cidx in range(NU):
            r = np.zeros(cond.p)
            r[NU * n + cidx] = 1.0
            rows.append(r)
            lo.append(prob.lb_u[cidx] - U[cidx, n])
            hi.append(prob.ub_u[cidx] - U[cidx, n])
            keys.append(("cb", n, cidx))

    return (np.asarray(rows), np.asarray(lo), np.asarray(hi), keys)


def _warm_vector(keys, store: dict, p: int):
    if not store:
        return None
    lam = np.array([store.get(k, 0.0) for k in keys])
    return np.zeros(p), lam


def _shooting_kkt(prob: ShootingNlp, cond: _Condensed, A, B, gx, gu, lam, keys):
    """Continuity multipliers by backward recursion and the reduced-space
    stationarity measure max |dL/du| at the current iterate."""
    N = prob.N
    lam_by_key = dict(zip(keys, lam))

    xrow_term = np.zeros((NX, N + 1))
    urow_term = np.zeros((NU, N))
    for j, (node, idx, _t) in enumerate(prob.task_rows):
        xrow_term[idx, node] += lam_by_key.get(("task", j, 0), 0.0)
    inv_den = prob.spec.inv_denom[:, 0]
    for n in range(N + 1):
        interval = min(n, N - 1)
        for k in range(4):
            lv = lam_by_key.get(("path", n, k), 0.0)
            if lv == 0.0:
                continue
            xrow_term[MF_IDX[k], n] += lv
            urow_term[CTRL_OF_ACTUATOR[k], interval] += lv * inv_den[k]
    for (kind, n, idx), lv in lam_by_key.items():
        if kind == "sb" and lv != 0.0:
            xrow_term[idx, n] += lv
        elif kind == "cb" and lv != 0.0:
            urow_term[idx, n] += lv

    nu = np.zeros((NX, N))
    nu[:, N - 1] = gx[:, N] + xrow_term[:, N]
    for n in range(N - 1, 0, -1):
        nu[:, n - 1] = gx[:, n] + xrow_term[:, n] + A[n].T @ nu[:, n]
    dLdu = gu + urow_term
    for n in range(N):
        dLdu[:, n] += B[n].T @ nu[:, n]
    return nu, float(np.max(np.abs(dLdu), initial=0.0))


# ---------------------------------------------------------------------------
# generic dense SQP (damped BFGS or finite-difference Hessian)
# ---------------------------------------------------------------------------


def _generic_eval(p: GenericNlp, z):
    f = float(p.objective(z))
    g = np.asarray(p.gradient(z), dtype=float)
    ce = np.asarray(p.eq(z), dtype=float) if p.eq else np.zeros(0)
    Je = np.asarray(p.eq_jac(z), dtype=float) if p.eq else np.zeros((0, p.n))
    ci = np.asarray(p.ineq(z), dtype=float) if p.ineq else np.zeros(0)
    Jc = np.asarray(p.ineq_jac(z), dtype=float) if p.ineq else np.zeros((0, p.n))
    if not (np.isfinite(f) and np.all(np.isfinite(g))
            and np.all(np.isfinite(ce)) and np.all(np.isfinite(ci))):
        raise EvaluationFailure("objective or constraints non-finite")
    return f, g, ce, Je, ci, Jc


def _generic_violation(p: GenericNlp, z, ce, ci):
    parts = [np.abs(ce)]
    if ci.size:
        parts.append(_interval_violation(ci, p.ineq_lo, p.ineq_hi))
    parts.append(_interval_violation(z, p.lb, p.ub))
    allv = np.concatenate([np.atleast_1d(x).ravel() for x in parts])
    return (float(np.max(allv, initial=0.0)), float(np.sum(allv)))


def _fd_lagrangian_hessian(p: GenericNlp, z, lam_rows, rows_jac):
    n = p.n
    h = 1e-5 * np.maximum(1.0, np.abs(z))

    def grad_l(zz):
        g = np.asarray(p.gradient(zz), dtype=float)
        if rows_jac is not None and lam_rows.size:
            g = g + rows_jac(zz).T @ lam_rows
        return g

    H = np.zeros((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h[i]
        H[:, i] = (grad_l(z + e) - grad_l(z - e)) / (2 * h[i])
    H = 0.5 * (H + H.T)
    w = np.linalg.eigvalsh(H)
    if w.min() < 1e-8:
        H += (1e-8 - w.min()) * np.eye(n)
    return H


def _solve_generic(p: GenericNlp, z0: np.ndarray, cfg: SolverConfig) -> NlpSolution:
    t_start = time.perf_counter()
    z = np.clip(np.asarray(z0, dtype=float), p.lb, p.ub)
    n = p.n
    Bk = np.eye(n)
    mu = 10.0
    merit_hist: list[float] = []
    mu_hist: list[float] = []
    stall = _StallTracker(cfg.tol_con, cfg.stall_iters)
    status = SolverStatus.MAX_ITER
    message = ""
    kkt_res = np.nan
    it = 0
    g_old = None
    lam_full = np.zeros(0)

    for it in range(1, cfg.max_iter + 1):
        f, g, ce, Je, ci, Jc = _generic_eval(p, z)
        vmax, l1 = _generic_violation(p, z, ce, ci)

        rows = []
        lo = []
        hi = []
        if ce.size:
            rows.append(Je)
            lo.append(-ce)
            hi.append(-ce)
        if ci.size:
            rows.append(Jc)
            lo.append(p.ineq_lo - ci)
            hi.append(p.ineq_hi - ci)
        box = np.isfinite(p.lb) | np.isfinite(p.ub)
        if np.any(box):
            I = np.eye(n)[box]
            rows.append(I)
            lo.append(np.where(np.isfinite(p.lb[box]), p.lb[box] - z[box], -BIG))
            hi.append(np.where(np.isfinite(p.ub[box]), p.ub[box] - z[box], BIG))
        A = np.vstack(rows) if rows else np.zeros((0, n))
        lo_v = np.concatenate(lo) if lo else np.zeros(0)
        hi_v = np.concatenate(hi) if hi else np.zeros(0)

        if cfg.hessian == "exact_fd":
            def rows_jac(zz):
                parts = []
                if p.eq:
                    parts.append(np.asarray(p.eq_jac(zz), dtype=float))
                if p.ineq:
                    parts.append(np.asarray(p.ineq_jac(zz), dtype=float))
                if np.any(box):
                    parts.append(np.eye(n)[box])
                return np.vstack(parts) if parts else np.zeros((0, n))

            P = _fd_lagrangian_hessian(p, z, lam_full, rows_jac)
        else:
            P = Bk
        P = P + 1e-10 * np.eye(n)

        d, lam, _info = _solve_qp(P, g, A, lo_v, hi_v,
                                  max_iter=cfg.qp_max_iter, tol=cfg.qp_tol)
        lam_full = lam if lam.size == A.shape[0] else np.zeros(A.shape[0])

        stat_res = float(np.max(np.abs(g + (A.T @ lam_full if lam_full.size
                                            else 0.0)), initial=0.0))
        kkt_res = stat_res
        if vmax <= cfg.tol_con and (stat_res <= cfg.tol_opt
                                    or np.max(np.abs(d), initial=0.0) <= cfg.tol_opt):
            status = SolverStatus.CONVERGED
            message = "first-order optimal within tolerances"
            break
        if stall.update(vmax):
            status = SolverStatus.INFEASIBLE
            message = "constraint violation stalled"
            break

        mu = max(mu, 1.2 * (np.max(np.abs(lam_full)) if lam_full.size else 0.0)
                 + 0.1)
        merit0 = f + mu * l1
        descent = float(g @ d) - mu * l1
        alpha = 1.0
        accepted = False
        for _ in range(cfg.max_backtracks):
            z_try = z + alpha * d
            try:
                f_t = float(p.objective(z_try))
                ce_t = np.asarray(p.eq(z_try), dtype=float) if p.eq else np.zeros(0)
                ci_t = np.asarray(p.ineq(z_try), dtype=float) if p.ineq else np.zeros(0)
                _, l1_t = _generic_violation(p, z_try, ce_t, ci_t)
                merit_t = f_t + mu * l1_t
            except EvaluationFailure:
                merit_t = np.inf
            if np.isfinite(merit_t) and merit_t <= merit0 + 1e-4 * alpha * min(descent, 0.0) + 1e-12:
                accepted = True
                break
            alpha *= 0.5
        merit_hist.append(merit0)
        mu_hist.append(mu)
        log.debug("iter %4d obj %.8e viol %.3e kkt %.3e alpha %.3f",
                  it, f, vmax, stat_res, alpha if accepted else 0.0)
        if not accepted:
            mu *= 10.0
            if mu > 1e14:
                status = SolverStatus.DIVERGED
                message = "line search failed with maximal penalty"
                break
            continue

        z_new = z + alpha * d
        if cfg.hessian == "bfgs":
            _, g_new, ce_n, Je_n, ci_n, Jc_n = _generic_eval(p, z_new)
            grad_l_old = g.copy()
            grad_l_new = g_new.copy()
            if lam_full.size:
                off = 0
                if ce.size:
                    grad_l_old += Je.T @ lam_full[off:off + ce.size]
                    grad_l_new += Je_n.T @ lam_full[off:off + ce.size]
                    off += ce.size
                if ci.size:
                    grad_l_old += Jc.T @ lam_full[off:off + ci.size]
                    grad_l_new += Jc_n.T @ lam_full[off:off + ci.size]
            s = z_new - z
            yv = grad_l_new - grad_l_old
            sBs = float(s @ Bk @ s)
            sy = float(s @ yv)
            if sBs > 1e-16 and float(s @ s) > 1e-30:
                # Powell damping keeps the update positive definite
                if sy < 0.2 * sBs:
                    theta = 0.8 * sBs / (sBs - sy)
                    yv = theta * yv + (1 - theta) * (Bk @ s)
                    sy = float(s @ yv)
                if sy > 1e-12:
                    Bs = Bk @ s
                    Bk = Bk - np.outer(Bs, Bs) / sBs + np.outer(yv, yv) / sy
        z = z_new

    wall = time.perf_counter() - t_start
    f, _, ce, _, ci, _ = _generic_eval(p, z)
    vmax, _ = _generic_violation(p, z, ce, ci)
    sol = NlpSolution(
        status=status,
        x=z,
        objective=f,
        max_violation=vmax,
        iterations=it,
        wall_time=wall,
        kkt_residual=float(kkt_res),
        message=message,
        merit_history=merit_hist,
        penalty_history=mu_hist,
    )
    log.info("generic solve: %s", sol.summary_line())
    return sol


def solve(problem, x0, cfg: Optional[SolverConfig] = None) -> NlpSolution:
    """Solve an NLP from the given starting point; deterministic for fixed
    (problem, x0, cfg)."""
    if cfg is None:
        cfg = SolverConfig()
    x0 = np.asarray(x0, dtype=float)
    if isinstance(problem, ShootingNlp):
        if x0.shape != (problem.n_vars,):
            raise ValueError("x0 dimension does not match the problem")
        return _solve_shooting(problem, x0, cfg)
    if isinstance(problem, GenericNlp):
        if x0.shape != (problem.n,):
            raise ValueError("x0 dimension does not match the problem")
        return _solve_generic(problem, x0, cfg)
    raise TypeError(f"unsupported problem type {type(problem)!r}")
