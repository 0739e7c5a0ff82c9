"""
Rigid-body rotational dynamics and desired trajectories, with an RK4 stepper.

The inertia matrix is parameterized by its six independent entries
``theta = [m11, m22, m33, m23, m13, m12]`` (kg m^2).
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .exceptions import InvalidInertia, NumericalDivergence
from .so3 import matvec, quat_kinematics, quat_normalize, solve3

PROFILES = {"paper_sec5": 0, "constant": 1, "rest": 2}


@njit(cache=True)
def inertia_matrix(theta):
    m11, m22, m33, m23, m13, m12 = theta[0], theta[1], theta[2], theta[3], theta[4], theta[5]
    return np.array([[m11, m12, m13],
                     [m12, m22, m23],
                     [m13, m23, m33]])


def theta_from_matrix(M):
    M = np.asarray(M, dtype=float)
    return np.array([M[0, 0], M[1, 1], M[2, 2], M[1, 2], M[0, 2], M[0, 1]])


@dataclass(frozen=True, eq=False)
class InertiaParams:
    theta: np.ndarray

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).reshape(-1)
        if theta.shape != (6,) or not np.all(np.isfinite(theta)):
            raise InvalidInertia("theta must hold six finite entries")
        M = inertia_matrix(theta)
        minors = [np.linalg.det(M[:k, :k]) for k in (1, 2, 3)]
        if min(minors) <= 0.0:
            raise InvalidInertia("inertia matrix is not positive definite")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def matrix(self):
        return inertia_matrix(self.theta)

    @property
    def m_min(self):
        return float(np.linalg.eigvalsh(self.matrix)[0])

    @property
    def m_max(self):
        return float(np.linalg.eigvalsh(self.matrix)[-1])


@njit(cache=True)
def omega_dot(M, omega, tau):
    """Euler's equation solved for the angular acceleration: ``M^-1 (S(M w) w + tau)``."""
    Mw = matvec(M, omega)
    gyro = np.array([Mw[1] * omega[2] - Mw[2] * omega[1],
                     Mw[2] * omega[0] - Mw[0] * omega[2],
                     Mw[0] * omega[1] - Mw[1] * omega[0]])
    return solve3(M, gyro + tau)


def dynamics(q, omega, tau, M):
    """Time derivatives ``(dq/dt, dw/dt)`` of the body state under torque ``tau``."""
    M = np.asarray(M, dtype=float)
    if abs(np.linalg.det(M)) < 1e-300:
        raise InvalidInertia("singular inertia matrix")
    q = np.asarray(q, dtype=float)
    omega = np.asarray(omega, dtype=float)
    return quat_kinematics(q, omega), omega_dot(M, omega, np.asarray(tau, dtype=float))


@njit(cache=True)
def desired_rates(profile, t, omega_const):
    """
    Desired angular velocity and its exact time derivative.

    ``profile`` 0 is the benchmark trajectory
    ``[cos t + 0.5 cos 0.2t, 0.75 sin 2t, sin(5t exp(-0.001t)) + cos 0.5t]``,
    1 holds ``omega_const``, 2 is rest.
    """
    wd = np.zeros(3)
    wd_dot = np.zeros(3)
    if profile == 0:
        decay = np.exp(-0.001 * t)
        phase = 5.0 * t * decay
        wd[0] = np.cos(t) + 0.5 * np.cos(0.2 * t)
        wd[1] = 0.75 * np.sin(2.0 * t)
        wd[2] = np.sin(phase) + np.cos(0.5 * t)
        wd_dot[0] = -np.sin(t) - 0.1 * np.sin(0.2 * t)
        wd_dot[1] = 1.5 * np.cos(2.0 * t)
        wd_dot[2] = np.cos(phase) * 5.0 * decay * (1.0 - 0.001 * t) - 0.5 * np.sin(0.5 * t)
    elif profile == 1:
        wd[:] = omega_const
    return wd, wd_dot


@dataclass(frozen=True)
class DesiredState:
    q_d: np.ndarray
    omega_d: np.ndarray
    omega_d_dot: np.ndarray


@njit(cache=True)
def _desired_attitude_rhs(t, q, args):
    profile, omega_const = args
    wd, _ = desired_rates(profile, t, omega_const)
    return quat_kinematics(q, wd)


def desired_trajectory(t, profile="paper_sec5", q_d0=(0.8, 0.0, 0.6, 0.0),
                       omega_const=(0.0, 0.0, 0.0), dt=1e-3):
    """
    Desired state at time ``t``; ``q_d`` is integrated from ``q_d0`` with RK4.

    The last step is shortened so the integration lands exactly on ``t``.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    pid = PROFILES[profile]
    wc = np.asarray(omega_const, dtype=float)
    q = np.asarray(q_d0, dtype=float).copy()
    s = 0.0
    while s < t:
        h = min(dt, t - s)
        q = quat_normalize(rk4_step_jit(_desired_attitude_rhs, s, q, h, (pid, wc)))
        s += h
    wd, wd_dot = desired_rates(pid, float(t), wc)
    return DesiredState(q, wd, wd_dot)


def rk4_step(f, t, x, dt, *args):
    """
    One classical Runge-Kutta step of ``dx/dt = f(t, x, *args)``.

    Raises
    ------
    NumericalDivergence
        If the new state contains non-finite values.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    k1 = f(t, x, *args)
    k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1, *args)
    k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2, *args)
    k4 = f(t + dt, x + dt * k3, *args)
    x_next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(x_next)):
        raise NumericalDivergence(f"non-finite state at t={t + dt:g}", t=t + dt)
    return x_next


@njit(cache=True)
def rk4_step_jit(f, t, x, dt, args):
    """Compiled counterpart of :func:`rk4_step`; ``f(t, x, args)`` must be jitted."""
    k1 = f(t, x, args)
    k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1, args)
    k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2, args)
    k4 = f(t + dt, x + dt * k3, args)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
