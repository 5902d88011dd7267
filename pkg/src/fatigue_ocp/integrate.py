"""ODE integration: adaptive RK45 for forward studies, fixed-step RK4 for shooting.

The adaptive path wraps scipy's Dormand-Prince 5(4) pair (the same integrator
family used for the forward-simulation studies) behind a small config/result
contract.  The fixed-step path is the classical fourth-order Runge-Kutta rule
with intermediate substeps and piecewise-constant controls, which is what the
shooting transcription differentiates through.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp as _scipy_solve_ivp

__all__ = [
    "IvpConfig",
    "Trajectory",
    "StepSizeUnderflow",
    "solve_ivp_rk45",
    "rk4_step",
    "first_time_abs_below",
]

MIN_STEP = 1e-12


class StepSizeUnderflow(RuntimeError):
    """Adaptive step size fell below the minimum resolvable step."""


@dataclass(frozen=True)
class IvpConfig:
    """Tolerances and time span for an adaptive initial value problem."""

    t_span: tuple[float, float] = (0.0, 60.0)
    rtol: float = 1e-3
    atol: float = 1e-6
    max_step: Optional[float] = None
    first_step: float = 1e-3

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("tolerances must be positive")
        if self.t_span[1] <= self.t_span[0]:
            raise ValueError("t_span must satisfy tf > t0")


@dataclass
class Trajectory:
    """Accepted integration steps: times (n,) and states (n, d)."""

    times: np.ndarray
    states: np.ndarray
    derivs: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.times.ndim != 1 or self.states.shape[0] != self.times.shape[0]:
            raise ValueError("times and states must have matching lengths")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def sample(self, t_eval: np.ndarray) -> np.ndarray:
        """Cubic Hermite interpolation of the states onto t_eval."""
        if self.derivs is None:
            raise ValueError("trajectory carries no derivative samples")
        t_eval = np.asarray(t_eval, dtype=float)
        out = np.empty((t_eval.size, self.states.shape[1]))
        idx = np.clip(np.searchsorted(self.times, t_eval, side="right") - 1, 0,
                      len(self.times) - 2)
        for j, (t, i) in enumerate(zip(t_eval, idx)):
            out[j] = _hermite_eval(
                self.times[i], self.times[i + 1],
                self.states[i], self.states[i + 1],
                self.derivs[i], self.derivs[i + 1], t,
            )
        return out

    def to_csv(self, path, state_names: Sequence[str]) -> None:
        """Write header `t,<names...>` followed by one row per accepted step."""
        if len(state_names) != self.states.shape[1]:
            raise ValueError("state_names length mismatch")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", *state_names])
            for t, row in zip(self.times, self.states):
                writer.writerow([f"{t:.12g}", *(f"{v:.12g}" for v in row)])


def solve_ivp_rk45(f: Callable, x0: np.ndarray, cfg: IvpConfig) -> Trajectory:
    """Integrate the autonomous system dx/dt = f(x) with the RK45 pair.

    Returns the accepted steps together with the derivative at each step so
    threshold crossings can be located by local cubic Hermite interpolation.
    Raises StepSizeUnderflow when the controller drives the step below 1e-12 s.
    """
    x0 = np.asarray(x0, dtype=float)
    if not np.all(np.isfinite(x0)):
        raise ValueError("initial state must be finite")

    kwargs = dict(
        method="RK45",
        rtol=cfg.rtol,
        atol=cfg.atol,
        first_step=cfg.first_step,
        dense_output=False,
    )
    if cfg.max_step is not None:
        kwargs["max_step"] = cfg.max_step

    res = _scipy_solve_ivp(lambda t, y: f(y), cfg.t_span, x0, **kwargs)
    if not res.success:
        # scipy reports step underflow through a failed status message
        raise StepSizeUnderflow(res.message)
    ts = res.t
    ys = res.y.T
    if ts[-1] < cfg.t_span[1] - MIN_STEP:
        raise StepSizeUnderflow("integration stopped before tf")
    derivs = np.array([f(y) for y in ys])
    return Trajectory(times=ts, states=ys, derivs=derivs)


def rk4_step(f: Callable, x, u, h: float, substeps: int = 5):
    """Classical RK4 over one interval of length h, split into substeps.

    The control u is held constant over the whole interval.  Works on
    batched (state-dim, n) arrays and on complex inputs, which is what the
    shooting sensitivities rely on.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    hs = h / substeps
    for _ in range(substeps):
        k1 = f(x, u)
        k2 = f(x + 0.5 * hs * k1, u)
        k3 = f(x + 0.5 * hs * k2, u)
        k4 = f(x + hs * k3, u)
        x = x + (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


def _hermite_coeffs(t0, t1, y0, y1, d0, d1):
    """Cubic coefficients (c0..c3) in s = t - t0 on [t0, t1]."""
    h = t1 - t0
    c0 = y0
    c1 = d0
    c2 = (3.0 * (y1 - y0) / h - 2.0 * d0 - d1) / h
    c3 = (2.0 * (y0 - y1) / h + d0 + d1) / (h * h)
    return c0, c1, c2, c3


def _hermite_eval(t0, t1, y0, y1, d0, d1, t):
    c0, c1, c2, c3 = _hermite_coeffs(t0, t1, y0, y1, d0, d1)
    s = t - t0
    return c0 + s * (c1 + s * (c2 + s * c3))


def first_time_abs_below(times, values, derivs, threshold: float) -> Optional[float]:
    """Earliest t with |v(t)| <= threshold, v cubic Hermite between samples.

    `values` and `derivs` are scalar samples of v and dv/dt at `times`.
    Returns None when the threshold is never reached.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    derivs = np.asarray(derivs, dtype=float)
    if abs(values[0]) <= threshold:
        return float(times[0])
    for i in range(len(times) - 1):
        t0, t1 = times[i], times[i + 1]
        c0, c1, c2, c3 = _hermite_coeffs(t0, t1, values[i], values[i + 1],
                                         derivs[i], derivs[i + 1])
        candidates = []
        for sign in (1.0, -1.0):
            roots = np.roots([c3, c2, c1, c0 - sign * threshold])
            for rt in roots:
                if abs(rt.imag) < 1e-10 and -1e-12 <= rt.real <= (t1 - t0) + 1e-12:
                    candidates.append(rt.real)
        for s in sorted(candidates):
            # accept the root only if |v| is inside the band just after it
            probe = min(s + 1e-9 * max(t1 - t0, 1.0), t1 - t0)
            v = c0 + probe * (c1 + probe * (c2 + probe * c3))
            if abs(v) <= threshold * (1.0 + 1e-9):
                return float(t0 + s)
        if abs(values[i + 1]) <= threshold:
            return float(t1)
    return None
