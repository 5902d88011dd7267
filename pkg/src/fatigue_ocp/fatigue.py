"""Three-compartment actuator fatigue dynamics with invariant stabilization.

An actuator's capacity is split into resting (mr), active (ma) and fatigued
(mf) fractions that sum to one.  A piecewise feedback controller moves
capacity between the resting and active pools to track a commanded target
load, while the fatigue/recovery rates exchange capacity between the active
and fatigued pools.  The stabilized variant adds a restoring term on the
fatigued pool so that numerical drift of the compartment sum decays
exponentially instead of persisting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "FatigueParams",
    "FatigueState",
    "feedback_controller",
    "derivative_3cc",
    "derivative_3cc_s",
    "controller_rate",
    "compartment_rates",
    "BOUND_EPS",
]

# Slack on the [0, 1] compartment bounds; shooting intervals may transiently
# violate exact bounds between constraint nodes.
BOUND_EPS = 1e-3


@dataclass(frozen=True)
class FatigueParams:
    """Rates and controller/stabilizer coefficients for one actuator.

    F: fatigue rate (1/s); R: recovery rate (1/s); r: rest recovery
    multiplier (dimensionless); LD/LR: development/recovery controller
    gains (1/s); S: stabilization coefficient (1/s), active only in the
    stabilized model.
    """

    F: float
    R: float
    LD: float = 10.0
    LR: float = 10.0
    r: float = 1.0
    S: float = 0.0

    def __post_init__(self):
        if not (self.F > 0 and self.R > 0):
            raise ValueError("F and R must be positive")
        if not (self.LD > 0 and self.LR > 0):
            raise ValueError("controller gains LD and LR must be positive")
        if self.r < 0:
            raise ValueError("rest recovery multiplier r must be >= 0")
        if self.S < 0:
            raise ValueError("stabilization coefficient S must be >= 0")


@dataclass(frozen=True)
class FatigueState:
    """Compartment triple (resting, active, fatigued) for one actuator."""

    mr: float
    ma: float
    mf: float

    def __post_init__(self):
        lo, hi = -BOUND_EPS, 1.0 + BOUND_EPS
        for name, v in (("mr", self.mr), ("ma", self.ma), ("mf", self.mf)):
            if not (lo <= v <= hi):
                raise ValueError(f"{name}={v} outside [{lo}, {hi}]")

    @classmethod
    def new_rested(cls) -> "FatigueState":
        return cls(mr=1.0, ma=0.0, mf=0.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.mr, self.ma, self.mf])

    @property
    def total(self) -> float:
        return self.mr + self.ma + self.mf


def controller_rate(ma, mr, tl, ld, lr):
    """Piecewise activation-deactivation transfer rate C(ma, mr, TL).

    Vectorized over numpy arrays; branch selection uses the real parts so
    complex-step differentiation propagates through the active branch.
    Branches (strict < as written): development limited by demand, development
    limited by the resting pool, and recovery when the target is met.
    """
    ma_r, mr_r, tl_r = np.real(ma), np.real(mr), np.real(tl)
    develop = np.where(mr_r >= tl_r - ma_r, ld * (tl - ma), ld * mr)
    return np.where(ma_r < tl_r, develop, lr * (tl - ma))


def compartment_rates(mr, ma, mf, tl, F, R, r, LD, LR, S=0.0):
    """Time derivatives (dmr, dma, dmf) of the compartment fractions.

    With S == 0 this is the plain three-compartment model; S > 0 adds the
    invariant stabilizer S*(1 - ma - mr - mf) to the fatigued pool so the
    compartment-sum error decays at rate S (exactly exp(-S t) when r == 1).
    All arguments broadcast, so batches of actuators integrate in one call.
    """
    c = controller_rate(ma, mr, tl, LD, LR)
    dmr = -c + r * R * mf
    dma = c - F * ma
    dmf = F * ma - R * mf + S * (1.0 - ma - mr - mf)
    return dmr, dma, dmf


def feedback_controller(ma: float, mr: float, tl: float, p: FatigueParams) -> float:
    """Controller rate C for scalar inputs; tl is the target load in [0, 1]."""
    return float(controller_rate(ma, mr, tl, p.LD, p.LR))


def derivative_3cc(m: FatigueState, tl: float, p: FatigueParams) -> np.ndarray:
    """Plain model derivative (dmr, dma, dmf) at state m under target load tl."""
    dmr, dma, dmf = compartment_rates(m.mr, m.ma, m.mf, tl, p.F, p.R, p.r, p.LD, p.LR)
    return np.array([dmr, dma, dmf])


def derivative_3cc_s(m: FatigueState, tl: float, p: FatigueParams) -> np.ndarray:
    """Stabilized model derivative; uses p.S as the stabilization coefficient."""
    dmr, dma, dmf = compartment_rates(
        m.mr, m.ma, m.mf, tl, p.F, p.R, p.r, p.LD, p.LR, S=p.S
    )
    return np.array([dmr, dma, dmf])
