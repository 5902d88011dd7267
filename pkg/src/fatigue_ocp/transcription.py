"""Direct multiple-shooting transcription of the cyclic dumbbell-curl task.

Decision vector: states at all N+1 shooting nodes followed by the piecewise
constant controls on the N intervals.  The 16-dimensional system state is
[q0, q1, qd0, qd1, (mr, ma, mf) x 4 actuators] with actuators ordered
shoulder+, shoulder-, elbow+, elbow-.  Controls are [tau+_sh, tau+_el,
tau-_sh, tau-_el].  Continuity ties consecutive nodes through a fixed-step
RK4 map; per-cycle elbow targets, a torque-activation/fatigue capacity
inequality at every node, and box bounds complete the problem.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .armmodel import (ActuatorLimits, ArmModel, accelerations, mass_matrix,
                       nonlinear_effects)
from .fatigue import FatigueParams, compartment_rates
from .integrate import rk4_step

__all__ = [
    "SpecError",
    "CostKind",
    "CostWeights",
    "OcpSpec",
    "ShootingNlp",
    "CostReport",
    "coupled_dynamics",
    "build_nlp",
    "evaluate_cost",
    "simulate_states",
    "rested_state",
    "static_guess",
    "kinematic_guess",
    "activation_levels",
    "path_values",
    "NX",
    "NU",
    "ACTUATOR_LABELS",
]

NX = 16
NU = 4

IX_Q0, IX_Q1, IX_QD0, IX_QD1 = 0, 1, 2, 3
MR_IDX = np.array([4, 7, 10, 13])
MA_IDX = np.array([5, 8, 11, 14])
MF_IDX = np.array([6, 9, 12, 15])

ACTUATOR_LABELS = ("shoulder_plus", "shoulder_minus", "elbow_plus", "elbow_minus")
# control component driving each actuator (tau+_sh, tau-_sh, tau+_el, tau-_el)
CTRL_OF_ACTUATOR = np.array([0, 2, 1, 3])

_CSTEP = 1e-30


class SpecError(ValueError):
    """Inconsistent problem specification or dimensions."""


class CostKind(enum.Enum):
    """Which Lagrange terms enter the objective (all include the shoulder
    penalty and the torque rate-of-change regularization)."""

    FATIGUE_TORQUE = "mf_tau"
    FATIGUE = "mf"
    TORQUE = "tau"

    @classmethod
    def from_name(cls, name: str) -> "CostKind":
        for kind in cls:
            if kind.value == name:
                return kind
        raise SpecError(f"unknown cost {name!r}; expected one of "
                        f"{[k.value for k in cls]}")

    @property
    def includes_fatigue(self) -> bool:
        return self in (CostKind.FATIGUE_TORQUE, CostKind.FATIGUE)

    @property
    def includes_torque(self) -> bool:
        return self in (CostKind.FATIGUE_TORQUE, CostKind.TORQUE)


@dataclass(frozen=True)
class CostWeights:
    w_q0: float = 1e5
    w_dtau: float = 0.1
    w_f: float = 1e3
    w_tau: float = 1.0

    def __post_init__(self):
        if min(self.w_q0, self.w_dtau, self.w_f, self.w_tau) < 0:
            raise SpecError("cost weights must be non-negative")


def _normalize_fatigue_params(params) -> tuple[FatigueParams, ...]:
    if isinstance(params, FatigueParams):
        return (params,) * 4
    if isinstance(params, dict):
        missing = [a for a in ACTUATOR_LABELS if a not in params]
        if missing:
            raise SpecError(f"missing fatigue params for actuators {missing}")
        return tuple(params[a] for a in ACTUATOR_LABELS)
    seq = tuple(params)
    if len(seq) != 4 or not all(isinstance(p, FatigueParams) for p in seq):
        raise SpecError("fatigue_params must be one FatigueParams, a dict by "
                        "actuator, or a sequence of four")
    return seq


@dataclass(frozen=True)
class OcpSpec:
    """Cost choice, weights, bounds, cycle constraints and grid resolution."""

    cycles: int
    nodes_per_cycle: int = 30
    cycle_duration: float = 1.0
    cost: CostKind = CostKind.FATIGUE_TORQUE
    weights: CostWeights = field(default_factory=CostWeights)
    limits: ActuatorLimits = field(default_factory=ActuatorLimits)
    elbow_low: float = math.radians(15.0)
    elbow_high: float = math.radians(150.0)
    fatigue_params: object = None
    stabilizer_enabled: bool = True
    substeps: int = 5
    state_bound_eps: float = 1e-3
    shoulder_range: tuple[float, float] = (-math.pi / 2, math.pi / 2)
    elbow_range: tuple[float, float] = (0.0, math.radians(160.0))

    def __post_init__(self):
        if self.cycles < 1:
            raise SpecError("cycles must be >= 1")
        if self.nodes_per_cycle < 10:
            raise SpecError("nodes_per_cycle must be >= 10")
        if self.cycle_duration <= 0:
            raise SpecError("cycle_duration must be positive")
        if not self.elbow_low < self.elbow_high:
            raise SpecError("elbow_low must be below elbow_high")
        if self.substeps < 1:
            raise SpecError("substeps must be >= 1")
        params = self.fatigue_params
        if params is None:
            from .config import default_curl_params
            params = default_curl_params()
        object.__setattr__(self, "fatigue_params", _normalize_fatigue_params(params))

    @cached_property
    def actuator_params(self) -> tuple[FatigueParams, ...]:
        return self.fatigue_params

    @cached_property
    def param_arrays(self) -> dict[str, np.ndarray]:
        """Per-actuator parameter columns (4, 1) ready for batched dynamics."""
        ps = self.actuator_params
        col = lambda attr: np.array([getattr(p, attr) for p in ps]).reshape(4, 1)
        arrs = {a: col(a) for a in ("F", "R", "r", "LD", "LR")}
        arrs["S"] = col("S") if self.stabilizer_enabled else np.zeros((4, 1))
        return arrs

    @cached_property
    def inv_denom(self) -> np.ndarray:
        """1 / signed torque bound per actuator; maps control to target load."""
        lim = self.limits
        return np.array([1.0 / lim.tau_max, 1.0 / lim.tau_min,
                         1.0 / lim.tau_max, 1.0 / lim.tau_min]).reshape(4, 1)

    @property
    def n_intervals(self) -> int:
        return self.cycles * self.nodes_per_cycle

    @property
    def dt(self) -> float:
        return self.cycle_duration / self.nodes_per_cycle


def coupled_dynamics(x, u, model: ArmModel, spec: OcpSpec):
    """Time derivative of the 16-state coupled mechanics/fatigue system.

    Accepts single columns (16,), (4,) or batches (16, n), (4, n); complex
    inputs propagate so this is safe to differentiate by complex step.
    """
    x = np.asarray(x)
    u = np.asarray(u)
    single = x.ndim == 1
    if single:
        x = x[:, None]
        u = u[:, None]
    tau = np.stack([u[0] + u[2], u[1] + u[3]], axis=0)
    qdd = accelerations(model, x[0:2], x[2:4], tau)

    pa = spec.param_arrays
    tl = u[CTRL_OF_ACTUATOR] * spec.inv_denom
    dmr, dma, dmf = compartment_rates(
        x[MR_IDX], x[MA_IDX], x[MF_IDX], tl,
        pa["F"], pa["R"], pa["r"], pa["LD"], pa["LR"], pa["S"],
    )
    out = np.empty_like(x)
    out[0:2] = x[2:4]
    out[2:4] = qdd
    out[MR_IDX] = dmr
    out[MA_IDX] = dma
    out[MF_IDX] = dmf
    return out[:, 0] if single else out


def rested_state(spec: OcpSpec) -> np.ndarray:
    """Static hang at the low elbow target with fully rested actuators."""
    x = np.zeros(NX)
    x[IX_Q1] = spec.elbow_low
    x[MR_IDX] = 1.0
    return x


def activation_levels(spec: OcpSpec, U: np.ndarray) -> np.ndarray:
    """Target load of each actuator per interval, shape (4, N)."""
    return U[CTRL_OF_ACTUATOR] * spec.inv_denom


def path_values(spec: OcpSpec, X: np.ndarray, U: np.ndarray) -> np.ndarray:
    """Capacity-coupling value (activation ratio + fatigued fraction).

    Shape (4, N+1); the final node pairs with the last interval's control.
    """
    n = U.shape[1]
    ext = np.concatenate([U, U[:, -1:]], axis=1)
    return activation_levels(spec, ext[:, : n + 1]) + X[MF_IDX]


class ShootingNlp:
    """Multiple-shooting NLP: layout, residuals, sensitivities, objective.

    Decision vector z = [x_0 .. x_N, u_0 .. u_{N-1}] flattened node-major.
    Equality constraints: initial state, per-interval RK4 continuity, and
    elbow task targets.  Inequalities: the per-node capacity coupling rows
    0 <= ratio + mf <= 1.  Box bounds apply to states and controls.
    """

    def __init__(self, spec: OcpSpec, model: ArmModel, x_init: np.ndarray):
        x_init = np.asarray(x_init, dtype=float)
        if x_init.shape != (NX,):
            raise SpecError(f"x_init must have shape ({NX},)")
        if not np.all(np.isfinite(x_init)):
            raise SpecError("x_init must be finite")
        self.spec = spec
        self.model = model
        self.x_init = x_init
        self.N = spec.n_intervals
        self.dt = spec.dt

        self._build_bounds()
        self._build_task_rows()
        self._build_objective_weights()

    # -- layout -----------------------------------------------------------

    @property
    def n_states(self) -> int:
        return NX * (self.N + 1)

    @property
    def n_controls(self) -> int:
        return NU * self.N

    @property
    def n_vars(self) -> int:
        return self.n_states + self.n_controls

    def split(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        X = z[: self.n_states].reshape(self.N + 1, NX).T
        U = z[self.n_states:].reshape(self.N, NU).T
        return X, U

    def join(self, X: np.ndarray, U: np.ndarray) -> np.ndarray:
        return np.concatenate([X.T.ravel(), U.T.ravel()])

    def _build_bounds(self):
        spec = self.spec
        eps = spec.state_bound_eps
        lb_x = np.full(NX, -np.inf)
        ub_x = np.full(NX, np.inf)
        lb_x[IX_Q0], ub_x[IX_Q0] = spec.shoulder_range
        lb_x[IX_Q1], ub_x[IX_Q1] = spec.elbow_range
        for idx in (MR_IDX, MA_IDX, MF_IDX):
            lb_x[idx] = -eps
            ub_x[idx] = 1.0 + eps
        lim = spec.limits
        lb_u = np.array([0.0, 0.0, lim.tau_min, lim.tau_min])
        ub_u = np.array([lim.tau_max, lim.tau_max, 0.0, 0.0])
        self.lb_x, self.ub_x = lb_x, ub_x
        self.lb_u, self.ub_u = lb_u, ub_u
        self.bounded_state_idx = np.where(np.isfinite(lb_x) | np.isfinite(ub_x))[0]

    def var_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lb = np.concatenate([np.tile(self.lb_x, self.N + 1),
                             np.tile(self.lb_u, self.N)])
        ub = np.concatenate([np.tile(self.ub_x, self.N + 1),
                             np.tile(self.ub_u, self.N)])
        return lb, ub

    def _build_task_rows(self):
        spec = self.spec
        nc = spec.nodes_per_cycle
        rows: list[tuple[int, int, float]] = []
        for c in range(spec.cycles):
            if c > 0:
                rows.append((c * nc, IX_Q1, spec.elbow_low))
            rows.append((c * nc + nc // 2, IX_Q1, spec.elbow_high))
        rows.append((self.N, IX_Q1, spec.elbow_low))
        self.task_rows = rows

    # -- dynamics ---------------------------------------------------------

    def _f(self, x, u):
        return coupled_dynamics(x, u, self.model, self.spec)

    def step_batch(self, Xn: np.ndarray, U: np.ndarray) -> np.ndarray:
        """RK4 end states for all intervals at once; Xn, U are (16, N), (4, N)."""
        out = rk4_step(self._f, Xn, U, self.dt, self.spec.substeps)
        return out

    def step_with_jac(self, Xn: np.ndarray, U: np.ndarray):
        """End states plus sensitivities A = dPhi/dx, B = dPhi/du per interval.

        Computed by vectorized complex-step differentiation: one batched RK4
        sweep covers the nominal columns and all 20 perturbation directions
        of every interval.
        """
        n = Xn.shape[1]
        ndir = NX + NU + 1
        base = np.concatenate([Xn, U], axis=0).astype(complex)  # (20, n)
        Z = np.repeat(base[:, :, None], ndir, axis=2)
        for j in range(NX + NU):
            Z[j, :, 1 + j] += 1j * _CSTEP
        xc = Z[:NX].reshape(NX, n * ndir)
        uc = Z[NX:].reshape(NU, n * ndir)
        out = rk4_step(self._f, xc, uc, self.dt, self.spec.substeps)
        out = out.reshape(NX, n, ndir)
        phi = out[:, :, 0].real
        A = np.moveaxis(out[:, :, 1: 1 + NX].imag / _CSTEP, 1, 0)
        B = np.moveaxis(out[:, :, 1 + NX:].imag / _CSTEP, 1, 0)
        return phi, A, B

    def continuity_residuals(self, z: np.ndarray) -> np.ndarray:
        """Phi(x_n, u_n) - x_{n+1} for every interval, shape (16, N)."""
        X, U = self.split(z)
        return self.step_batch(X[:, :-1], U) - X[:, 1:]

    # -- objective --------------------------------------------------------

    def _build_objective_weights(self):
        spec = self.spec
        w = spec.weights
        self.w_active = {
            "q0": w.w_q0,
            "dtau": w.w_dtau,
            "f": w.w_f if spec.cost.includes_fatigue else 0.0,
            "tau": w.w_tau if spec.cost.includes_torque else 0.0,
        }
        dx = np.zeros(NX)
        dx[IX_Q0] = 2.0 * self.dt * self.w_active["q0"]
        dx[MF_IDX] = 2.0 * self.dt * self.w_active["f"]
        self._hess_x_diag = dx  # applies at nodes 0..N-1 (left rectangle rule)

    def objective(self, z: np.ndarray) -> float:
        X, U = self.split(z)
        w = self.w_active
        dt = self.dt
        val = dt * w["q0"] * float(np.sum(X[IX_Q0, :-1] ** 2))
        val += dt * w["f"] * float(np.sum(X[MF_IDX][:, :-1] ** 2))
        val += dt * w["tau"] * float(np.sum(U ** 2))
        if self.N > 1:
            du = np.diff(U, axis=1)
            val += dt * w["dtau"] * float(np.sum(du ** 2))
        return val

    def gradient_blocks(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Objective gradient split into state (16, N+1) and control (4, N)."""
        X, U = self.split(z)
        w = self.w_active
        dt = self.dt
        gx = np.zeros((NX, self.N + 1))
        gx[IX_Q0, :-1] = 2.0 * dt * w["q0"] * X[IX_Q0, :-1]
        gx[MF_IDX[:, None], np.arange(self.N)] = (
            2.0 * dt * w["f"] * X[MF_IDX][:, :-1])
        gu = 2.0 * dt * w["tau"] * U.copy()
        if self.N > 1:
            du = np.diff(U, axis=1)
            gu[:, 1:] += 2.0 * dt * w["dtau"] * du
            gu[:, :-1] -= 2.0 * dt * w["dtau"] * du
        return gx, gu

    def gradient(self, z: np.ndarray) -> np.ndarray:
        gx, gu = self.gradient_blocks(z)
        return self.join(gx, gu)

    def hess_x_diag(self) -> np.ndarray:
        """Diagonal Hessian block per interior node (constant)."""
        return self._hess_x_diag

    def hess_uu(self) -> np.ndarray:
        """Dense constant Hessian of the control block, shape (4N, 4N)."""
        n = self.n_controls
        H = np.zeros((n, n))
        dt = self.dt
        np.fill_diagonal(H, 2.0 * dt * self.w_active["tau"])
        wd = 2.0 * dt * self.w_active["dtau"]
        if wd > 0 and self.N > 1:
            for k in range(1, self.N):
                a = slice((k - 1) * NU, k * NU)
                b = slice(k * NU, (k + 1) * NU)
                idx_a = np.arange(*a.indices(n))
                idx_b = np.arange(*b.indices(n))
                H[idx_a, idx_a] += wd
                H[idx_b, idx_b] += wd
                H[idx_a, idx_b] -= wd
                H[idx_b, idx_a] -= wd
        return H

    # -- reporting --------------------------------------------------------

    def debug_dump(self) -> str:
        n_eq = NX + NX * self.N + len(self.task_rows)
        n_path = 4 * (self.N + 1)
        lines = [
            "multiple-shooting NLP",
            f"  intervals: {self.N} (dt = {self.dt:.6g} s, "
            f"{self.spec.substeps} RK4 substeps)",
            f"  decision variables: {self.n_vars} "
            f"({self.N + 1} nodes x {NX} states + {self.N} x {NU} controls)",
            f"  equality constraints: {n_eq} "
            f"(initial {NX}, continuity {NX * self.N}, task {len(self.task_rows)})",
            f"  inequality constraints: {n_path} capacity rows in [0, 1]",
            f"  state bounds: q0 in [{self.lb_x[IX_Q0]:.4g}, {self.ub_x[IX_Q0]:.4g}], "
            f"q1 in [{self.lb_x[IX_Q1]:.4g}, {self.ub_x[IX_Q1]:.4g}], "
            f"compartments in [{self.lb_x[4]:.4g}, {self.ub_x[4]:.4g}]",
            f"  control bounds: plus [0, {self.ub_u[0]:.4g}] N m, "
            f"minus [{self.lb_u[2]:.4g}, 0] N m",
            f"  continuity Jacobian blocks: {self.N} x {NX}x{NX + NU} dense "
            f"(sparsity fixed by the shooting layout)",
        ]
        return "\n".join(lines)


def build_nlp(spec: OcpSpec, model: ArmModel, x_init=None) -> ShootingNlp:
    """Assemble the multiple-shooting NLP for K cycles from a given state."""
    if x_init is None:
        x_init = rested_state(spec)
    return ShootingNlp(spec, model, np.asarray(x_init, dtype=float))


def simulate_states(spec: OcpSpec, model: ArmModel, x0: np.ndarray,
                    U: np.ndarray) -> np.ndarray:
    """Forward RK4 rollout of the controls on the shooting grid, (16, N+1)."""
    U = np.asarray(U, dtype=float)
    n = U.shape[1]
    X = np.empty((NX, n + 1))
    X[:, 0] = x0
    f = lambda x, u: coupled_dynamics(x, u, model, spec)
    for k in range(n):
        X[:, k + 1] = rk4_step(f, X[:, k], U[:, k], spec.dt, spec.substeps)
    return X


def static_guess(spec: OcpSpec, model: ArmModel, x_init: np.ndarray) -> np.ndarray:
    """Hold the initial state at every node with zero controls."""
    N = spec.n_intervals
    X = np.tile(np.asarray(x_init, dtype=float)[:, None], (1, N + 1))
    U = np.zeros((NU, N))
    nlp = ShootingNlp(spec, model, x_init)
    return nlp.join(X, U)


def kinematic_guess(spec: OcpSpec, model: ArmModel, x_init: np.ndarray) -> np.ndarray:
    """Cosine elbow profile with inverse-dynamics torques and integrated fatigue.

    Builds a near-continuity-feasible start: q1 sweeps low -> high -> low each
    cycle, the shoulder stays put, controls come from inverse dynamics split
    into signed parts, and the fatigue block is integrated forward from the
    initial compartments under those controls.
    """
    x_init = np.asarray(x_init, dtype=float)
    N = spec.n_intervals
    dt = spec.dt
    amp = 0.5 * (spec.elbow_high - spec.elbow_low)
    mid = 0.5 * (spec.elbow_high + spec.elbow_low)
    t_nodes = np.arange(N + 1) * dt
    phase = 2.0 * math.pi * t_nodes / spec.cycle_duration
    q1 = mid - amp * np.cos(phase)
    q1d = amp * (2.0 * math.pi / spec.cycle_duration) * np.sin(phase)
    q1dd = amp * (2.0 * math.pi / spec.cycle_duration) ** 2 * np.cos(phase)

    lim = spec.limits
    U = np.zeros((NU, N))
    for k in range(N):
        q = np.array([x_init[IX_Q0], q1[k]])
        qd = np.array([0.0, q1d[k]])
        qdd = np.array([0.0, q1dd[k]])
        tau = mass_matrix(model, q) @ qdd + nonlinear_effects(model, q, qd)
        tau = np.clip(tau, lim.tau_min * 0.95, lim.tau_max * 0.95)
        U[0, k], U[1, k] = max(tau[0], 0.0), max(tau[1], 0.0)
        U[2, k], U[3, k] = min(tau[0], 0.0), min(tau[1], 0.0)

    X = np.empty((NX, N + 1))
    X[IX_Q0] = x_init[IX_Q0]
    X[IX_Q1] = q1
    X[IX_QD0] = 0.0
    X[IX_QD1] = q1d
    # integrate the fatigue block alone under the planned target loads
    pa = spec.param_arrays
    m = x_init[4:].reshape(4, 3).T.copy()  # rows mr, ma, mf
    X[4:, 0] = m.T.ravel()
    tl_all = activation_levels(spec, U)
    for k in range(N):
        tl = tl_all[:, k:k + 1]

        def fm(mm, _):
            dmr, dma, dmf = compartment_rates(
                mm[0], mm[1], mm[2], tl[:, 0],
                pa["F"][:, 0], pa["R"][:, 0], pa["r"][:, 0],
                pa["LD"][:, 0], pa["LR"][:, 0], pa["S"][:, 0])
            return np.stack([dmr, dma, dmf])

        m = rk4_step(fm, m, None, dt, spec.substeps)
        X[4:, k + 1] = m.T.ravel()
    # first node must match the prescribed initial state exactly
    X[:, 0] = x_init
    nlp = ShootingNlp(spec, model, x_init)
    return nlp.join(X, U)


@dataclass
class CostReport:
    """Per-cycle weighted Lagrange terms (nominal weights, even if a term is
    absent from the active objective) plus totals."""

    shoulder: np.ndarray
    torque_rate: np.ndarray
    fatigue: np.ndarray
    torque: np.ndarray
    fatigue_flexion: np.ndarray
    fatigue_extension: np.ndarray
    objective_total: float

    @property
    def cycles(self) -> int:
        return len(self.shoulder)

    def term_totals(self) -> dict[str, float]:
        return {
            "shoulder": float(np.sum(self.shoulder)),
            "torque_rate": float(np.sum(self.torque_rate)),
            "fatigue": float(np.sum(self.fatigue)),
            "torque": float(np.sum(self.torque)),
        }


def evaluate_cost(spec: OcpSpec, X: np.ndarray, U: np.ndarray) -> CostReport:
    """Cycle-by-cycle cost terms on a state/control trajectory.

    Terms are integrated with the left rectangle rule on the shooting grid;
    the torque rate difference at the very first interval is defined as zero.
    Works on trajectories spanning any whole number of cycles.
    """
    X = np.asarray(X, dtype=float)
    U = np.asarray(U, dtype=float)
    N = U.shape[1]
    if X.shape != (NX, N + 1):
        raise SpecError(f"trajectory shapes inconsistent: X {X.shape}, U {U.shape}")
    nc = spec.nodes_per_cycle
    if N % nc != 0:
        raise SpecError("trajectory length is not a whole number of cycles")
    k_cycles = N // nc
    w = spec.weights
    dt = spec.dt

    du = np.zeros_like(U)
    du[:, 1:] = np.diff(U, axis=1)

    per_node_shoulder = dt * w.w_q0 * X[IX_Q0, :-1] ** 2
    per_node_dtau = dt * w.w_dtau * np.sum(du ** 2, axis=0)
    mf = X[MF_IDX][:, :-1]
    per_node_fat = dt * w.w_f * np.sum(mf ** 2, axis=0)
    per_node_fat_flex = dt * w.w_f * (mf[0] ** 2 + mf[2] ** 2)
    per_node_fat_ext = dt * w.w_f * (mf[1] ** 2 + mf[3] ** 2)
    per_node_tau = dt * w.w_tau * np.sum(U ** 2, axis=0)

    def by_cycle(arr):
        return arr.reshape(k_cycles, nc).sum(axis=1)

    shoulder = by_cycle(per_node_shoulder)
    torque_rate = by_cycle(per_node_dtau)
    fatigue = by_cycle(per_node_fat)
    torque = by_cycle(per_node_tau)

    total = float(np.sum(shoulder) + np.sum(torque_rate))
    if spec.cost.includes_fatigue:
        total += float(np.sum(fatigue))
    if spec.cost.includes_torque:
        total += float(np.sum(torque))
    return CostReport(
        shoulder=shoulder,
        torque_rate=torque_rate,
        fatigue=fatigue,
        torque=torque,
        fatigue_flexion=by_cycle(per_node_fat_flex),
        fatigue_extension=by_cycle(per_node_fat_ext),
        objective_total=total,
    )
