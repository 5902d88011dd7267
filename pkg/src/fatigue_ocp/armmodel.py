"""Planar two-link arm (shoulder, elbow) carrying a point-mass dumbbell.

Angle conventions: q0 is the upper-arm angle measured from vertical-down
(arm hanging straight = 0), q1 is relative elbow flexion (0 = full
extension, so the forearm continues the upper-arm line).  Gravity acts in
the plane; there is no joint friction.  The mechanics are the standard
two-link manipulator equations M(q) qdd + N(q, qd) = tau with the dumbbell
entering as a point mass at the hand.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ArmModel",
    "ArmState",
    "ActuatorLimits",
    "SingularMass",
    "mass_matrix",
    "nonlinear_effects",
    "forward_dynamics",
    "accelerations",
    "torque_activation_ratios",
    "kinetic_energy",
    "potential_energy",
]


class SingularMass(RuntimeError):
    """Mass matrix could not be inverted; signals unphysical parameters."""


@dataclass(frozen=True)
class ArmModel:
    """Segment parameters for upper arm and forearm+hand, plus the dumbbell.

    Lengths in m, masses in kg, inertias about the segment COM in kg m^2,
    COM offsets measured from the proximal joint.
    """

    upper_length: float = 0.30
    upper_mass: float = 1.86
    upper_com: float = 0.13
    upper_inertia: float = 0.014
    fore_length: float = 0.33
    fore_mass: float = 1.53
    fore_com: float = 0.17
    fore_inertia: float = 0.020
    dumbbell_mass: float = 3.6
    gravity: float = 9.81

    def __post_init__(self):
        for name in ("upper_length", "upper_mass", "upper_inertia",
                     "fore_length", "fore_mass", "fore_inertia"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not (0.0 < self.upper_com < self.upper_length):
            raise ValueError("upper_com must lie strictly inside the segment")
        if not (0.0 < self.fore_com < self.fore_length):
            raise ValueError("fore_com must lie strictly inside the segment")
        if self.dumbbell_mass < 0:
            raise ValueError("dumbbell_mass must be >= 0")

    # Lumped coefficients of the two-link equations; the dumbbell acts as a
    # distal point mass (com offset = full forearm length, no own inertia).
    @property
    def _a1(self) -> float:
        m = self
        return (m.upper_inertia + m.fore_inertia
                + m.upper_mass * m.upper_com ** 2
                + m.fore_mass * (m.upper_length ** 2 + m.fore_com ** 2)
                + m.dumbbell_mass * (m.upper_length ** 2 + m.fore_length ** 2))

    @property
    def _a2(self) -> float:
        # coupling coefficient multiplying cos/sin of the elbow angle
        return self.upper_length * (self.fore_mass * self.fore_com
                                    + self.dumbbell_mass * self.fore_length)

    @property
    def _a3(self) -> float:
        return (self.fore_inertia + self.fore_mass * self.fore_com ** 2
                + self.dumbbell_mass * self.fore_length ** 2)

    @property
    def _g1(self) -> float:
        # gravity lever of everything hanging from the shoulder
        return (self.upper_mass * self.upper_com
                + (self.fore_mass + self.dumbbell_mass) * self.upper_length)

    @property
    def _g2(self) -> float:
        # gravity lever of the forearm+hand+dumbbell about the elbow
        return self.fore_mass * self.fore_com + self.dumbbell_mass * self.fore_length


@dataclass
class ArmState:
    """Joint angles q = [shoulder, elbow] (rad) and velocities (rad/s)."""

    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.qdot = np.asarray(self.qdot, dtype=float)
        if self.q.shape != (2,) or self.qdot.shape != (2,):
            raise ValueError("q and qdot must be 2-vectors")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.qdot))):
            raise ValueError("state must be finite")


@dataclass(frozen=True)
class ActuatorLimits:
    """Signed torque bounds applied to both joints."""

    tau_max: float = 50.0
    tau_min: float = -50.0

    def __post_init__(self):
        if not (self.tau_min < 0.0 < self.tau_max):
            raise ValueError("limits must satisfy tau_min < 0 < tau_max")


def mass_matrix(model: ArmModel, q):
    """Joint-space mass matrix, shape (2, 2) or (n, 2, 2) for batched q (2, n)."""
    q = np.asarray(q)
    c1 = np.cos(q[1])
    a1, a2, a3 = model._a1, model._a2, model._a3
    m11 = a1 + 2.0 * a2 * c1
    m12 = a3 + a2 * c1
    m22 = a3 + np.zeros_like(c1)
    M = np.stack([np.stack([m11, m12], axis=-1),
                  np.stack([m12, m22], axis=-1)], axis=-2)
    return M


def nonlinear_effects(model: ArmModel, q, qdot):
    """Coriolis/centrifugal plus gravity generalized forces, shape like q."""
    q = np.asarray(q)
    qdot = np.asarray(qdot)
    a2 = model._a2
    s1 = np.sin(q[1])
    cor0 = -a2 * s1 * qdot[1] * (2.0 * qdot[0] + qdot[1])
    cor1 = a2 * s1 * qdot[0] ** 2
    g = model.gravity
    grav0 = g * (model._g1 * np.sin(q[0]) + model._g2 * np.sin(q[0] + q[1]))
    grav1 = g * model._g2 * np.sin(q[0] + q[1])
    return np.stack([cor0 + grav0, cor1 + grav1], axis=0)


def accelerations(model: ArmModel, q, qdot, tau):
    """Forward dynamics qdd = M(q)^-1 (tau - N(q, qd)); batched over axis 1."""
    q = np.asarray(q)
    qdot = np.asarray(qdot)
    tau = np.asarray(tau)
    M = mass_matrix(model, q)
    rhs = tau - nonlinear_effects(model, q, qdot)
    try:
        if q.ndim == 1:
            return np.linalg.solve(M, rhs)
        sol = np.linalg.solve(M, np.moveaxis(rhs, 0, -1)[..., None])
        return np.moveaxis(sol[..., 0], -1, 0)
    except np.linalg.LinAlgError as exc:
        raise SingularMass(str(exc)) from exc


def forward_dynamics(model: ArmModel, s: ArmState, tau) -> np.ndarray:
    """Joint accelerations (rad/s^2) for the given state and joint torques."""
    return accelerations(model, s.q, s.qdot, np.asarray(tau, dtype=float))


def torque_activation_ratios(tau_plus, tau_minus, lim: ActuatorLimits) -> np.ndarray:
    """Normalized activation ratios [tau+_0, tau+_1, tau-_0, tau-_1] / bounds.

    Positive torques normalize by tau_max, negative ones by tau_min, so all
    four ratios are in [0, 1] when the torques respect their signed limits.
    """
    tau_plus = np.asarray(tau_plus, dtype=float)
    tau_minus = np.asarray(tau_minus, dtype=float)
    return np.concatenate([tau_plus / lim.tau_max, tau_minus / lim.tau_min])


def kinetic_energy(model: ArmModel, q, qdot) -> float:
    M = mass_matrix(model, q)
    qdot = np.asarray(qdot)
    return float(0.5 * qdot @ M @ qdot)


def potential_energy(model: ArmModel, q) -> float:
    """Gravitational potential, zero at the hanging configuration q = 0."""
    q = np.asarray(q)
    g = model.gravity
    h = (model._g1 * (1.0 - np.cos(q[0]))
         + model._g2 * (1.0 - np.cos(q[0] + q[1])))
    return float(g * h)
