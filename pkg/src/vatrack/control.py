"""
Attitude tracking laws built from vector and bias-corrected gyro measurements.

Both laws use the reference velocity ``w_r = -lambda_c z + w_d`` and the
measurable composite error ``sigma_hat = w_hat - w_r`` where
``w_hat = w_g - b_hat``.  Neither reads ground-truth state.

* nonadaptive (known inertia ``M``)::

      tau = M dw_r_hat - S(M w_hat) w_r - K_c sigma_hat - (alpha1 I + alpha2 J^T) z

* adaptive (inertia estimate ``theta_hat``)::

      tau = Y(w_hat, h) theta_hat - K_c sigma_hat - (alpha1 I + alpha2 J^T) z
      d theta_hat/dt = -Gamma Y^T sigma_hat

  with ``Y(w, h) theta = S(w) M(theta) w + M(theta) h``.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .exceptions import InvalidGain
from .so3 import cross, dot, matmul, matvec, skew, tmatvec

NONADAPTIVE = 0
ADAPTIVE = 1
OPEN_LOOP = 2
CONTROLLERS = {"nonadaptive": NONADAPTIVE, "adaptive": ADAPTIVE, "open_loop": OPEN_LOOP}


@dataclass(frozen=True)
class ControllerGains:
    lambda_c: float = 1.0
    K_c: tuple = ((3.0, 0.0, 0.0), (0.0, 3.0, 0.0), (0.0, 0.0, 3.0))
    alpha1: float = 0.1
    alpha2: float = 0.01
    Gamma: tuple = tuple(tuple(float(i == j) for j in range(6)) for i in range(6))
    # Sign of the (alpha1 I + alpha2 J^T) z term inside h; see h_vector.
    h_alignment_sign: float = 1.0

    def __post_init__(self):
        for name in ("lambda_c", "alpha1", "alpha2"):
            if not getattr(self, name) > 0:
                raise InvalidGain(name, "must be positive")
        if not _is_spd(self.K_c):
            raise InvalidGain("K_c", "must be symmetric positive definite")
        if not _is_spd(self.Gamma) or np.shape(self.Gamma) != (6, 6):
            raise InvalidGain("Gamma", "must be a 6x6 symmetric positive definite matrix")

    def lambda_a(self, total_weight):
        """``alpha1 - alpha2 sum k_i``, which must be positive."""
        return self.alpha1 - self.alpha2 * total_weight

    @property
    def K_c_array(self):
        return np.array(self.K_c, dtype=float)

    @property
    def Gamma_array(self):
        return np.array(self.Gamma, dtype=float)


def _is_spd(a):
    a = np.asarray(a, dtype=float)
    return (a.ndim == 2 and a.shape[0] == a.shape[1] and np.allclose(a, a.T, atol=1e-12)
            and np.linalg.eigvalsh(a)[0] > 0.0)


@njit(cache=True)
def f1(u):
    """3x6 matrix with ``f1(u) @ theta == M(theta) @ u``."""
    out = np.zeros((3, 6))
    out[0, 0] = u[0]
    out[0, 4] = u[2]
    out[0, 5] = u[1]
    out[1, 1] = u[1]
    out[1, 3] = u[2]
    out[1, 5] = u[0]
    out[2, 2] = u[2]
    out[2, 3] = u[1]
    out[2, 4] = u[0]
    return out


@njit(cache=True)
def reference_rate(omega_hat, omega_d, omega_d_dot, z, J, lambda_c, alpha1, alpha2,
                   alignment_sign):
    """
    ``-lambda_c (J (w_hat - w_d) + S(z) w_d) + dw_d/dt + s (alpha1 I + alpha2 J^T) z``.

    ``alignment_sign = 0`` gives the estimated reference acceleration used by
    the nonadaptive law; a nonzero sign gives the adaptive law's ``h``.
    """
    out = -lambda_c * (matvec(J, omega_hat - omega_d) + cross(z, omega_d)) + omega_d_dot
    if alignment_sign != 0.0:
        out = out + alignment_sign * (alpha1 * z + alpha2 * tmatvec(J, z))
    return out


@njit(cache=True)
def h_vector(omega_hat, omega_d, omega_d_dot, z, J, lambda_c, alpha1, alpha2, sign=1.0):
    return reference_rate(omega_hat, omega_d, omega_d_dot, z, J, lambda_c, alpha1, alpha2, sign)


@njit(cache=True)
def regressor(omega_hat, h):
    """``Y(w, h) = S(w) f1(w) + f1(h)``."""
    Y = f1(h)
    F = f1(omega_hat)
    for j in range(6):
        c = cross(omega_hat, F[:, j])
        for a in range(3):
            Y[a, j] += c[a]
    return Y


@njit(cache=True)
def alignment_torque(z, J, alpha1, alpha2):
    return alpha1 * z + alpha2 * tmatvec(J, z)


@njit(cache=True)
def nonadaptive_torque(M, omega_hat, omega_d, omega_d_dot, z, J, K_c, lambda_c,
                       alpha1, alpha2):
    omega_r = -lambda_c * z + omega_d
    sigma_hat = omega_hat - omega_r
    wr_dot_hat = reference_rate(omega_hat, omega_d, omega_d_dot, z, J, lambda_c,
                                alpha1, alpha2, 0.0)
    return (matvec(M, wr_dot_hat) - cross(matvec(M, omega_hat), omega_r) - matvec(K_c, sigma_hat)
            - alignment_torque(z, J, alpha1, alpha2))


@njit(cache=True)
def adaptive_torque(theta_hat, Y, sigma_hat, z, J, K_c, alpha1, alpha2):
    return matvec(Y, theta_hat) - matvec(K_c, sigma_hat) - alignment_torque(z, J, alpha1, alpha2)


@njit(cache=True)
def theta_update(Y, sigma_hat, Gamma):
    """Adaptation law ``-Gamma Y^T sigma_hat``."""
    return -matvec(Gamma, tmatvec(Y, sigma_hat))


@njit(cache=True)
def control_law(controller, M_known, theta_hat, omega_hat, omega_d, omega_d_dot, z, J,
                K_c, Gamma, lambda_c, alpha1, alpha2, h_sign):
    """
    Torque, parameter-estimate rate and ``sigma_hat`` from measured quantities only.

    ``M_known`` is read by the nonadaptive law alone.
    """
    omega_r = -lambda_c * z + omega_d
    sigma_hat = omega_hat - omega_r
    theta_dot = np.zeros(6)
    if controller == NONADAPTIVE:
        tau = nonadaptive_torque(M_known, omega_hat, omega_d, omega_d_dot, z, J, K_c,
                                 lambda_c, alpha1, alpha2)
    elif controller == ADAPTIVE:
        h = h_vector(omega_hat, omega_d, omega_d_dot, z, J, lambda_c, alpha1, alpha2, h_sign)
        Y = regressor(omega_hat, h)
        tau = adaptive_torque(theta_hat, Y, sigma_hat, z, J, K_c, alpha1, alpha2)
        theta_dot = theta_update(Y, sigma_hat, Gamma)
    else:
        tau = np.zeros(3)
    return tau, theta_dot, sigma_hat


# ---------------------------------------------------------------------------
# Lyapunov functions (evaluated with simulator ground truth)
# ---------------------------------------------------------------------------

@njit(cache=True)
def lyapunov_v2(M, sigma, b_tilde, z, e_R, alpha1, alpha2):
    return (0.5 * dot(sigma, matvec(M, sigma)) + 0.5 * dot(b_tilde, b_tilde)
            + 0.5 * alpha2 * dot(z, z) + alpha1 * e_R)


@njit(cache=True)
def lyapunov_v3(M, sigma_hat, b_tilde, theta_tilde, Gamma_inv, z, e_R, alpha1, alpha2):
    return (0.5 * dot(sigma_hat, matvec(M, sigma_hat)) + 0.5 * dot(b_tilde, b_tilde)
            + 0.5 * dot(theta_tilde, matvec(Gamma_inv, theta_tilde))
            + 0.5 * alpha2 * dot(z, z) + alpha1 * e_R)


@njit(cache=True)
def g_matrix(M, K_c, omega_r, J, lambda_c):
    """``G = K_c - S(w_r) M + lambda_c M J``."""
    return K_c - matmul(skew(omega_r), M) + lambda_c * matmul(M, J)


@njit(cache=True)
def h_matrix(M, K_f, J, omega_r, b_tilde, lambda_c):
    """``H = M (K_f + lambda_c J) + S(M w_r) - S(b_tilde + w_r) M``."""
    return (matmul(M, K_f + lambda_c * J) + skew(matvec(M, omega_r))
            - matmul(skew(b_tilde + omega_r), M))


# ---------------------------------------------------------------------------
# Gain-condition diagnostics
# ---------------------------------------------------------------------------

@dataclass
class GainReport:
    controller: str
    lambda_a: float
    eps_f: float
    lambda_min_K_o: float
    lambda_o: float
    lambda_min_K_c: float
    G_norm_max: float
    H_norm_max: float
    SbM_norm_max: float
    margin_17: float
    margin_18: float
    margin_27: float
    margin_28: float

    @property
    def passed(self):
        if self.controller == "nonadaptive":
            return self.margin_17 > 0 and self.margin_18 > 0
        if self.controller == "adaptive":
            return self.margin_17 > 0 and self.margin_27 > 0 and self.margin_28 > 0
        return self.lambda_o > 0

    def lines(self):
        rows = [
            ("lambda_a = alpha1 - alpha2*sum(k)", self.lambda_a),
            ("eps_f (measured max |v - v_f|)", self.eps_f),
            ("min_t lambda_min(K_o)", self.lambda_min_K_o),
            ("lambda_o", self.lambda_o),
            ("lambda_min(K_c)", self.lambda_min_K_c),
            ("max_t |G|", self.G_norm_max),
            ("max_t |H|", self.H_norm_max),
            ("max_t |S(b_tilde) M|", self.SbM_norm_max),
            ("margin lambda_a > 0", self.margin_17),
            ("margin lambda_o > |G|^2/(4 lambda_min(K_c))", self.margin_18),
            ("margin lambda_o > 0", self.margin_27),
            ("margin lambda_min(K_c) > |H|^2/(4 lambda_o) + |S(b_tilde)M|", self.margin_28),
        ]
        out = [f"{name:<62s} {value: .6g}" for name, value in rows]
        out.append(f"verdict ({self.controller}): {'PASS' if self.passed else 'FAIL'}")
        return out


def gain_condition_report(trace, scenario):
    """
    Evaluate the stability gain conditions along a simulated trace.

    ``eps_f`` is the largest filter residual seen after start-up and
    ``lambda_o`` uses the smallest ``lambda_min(K_o)`` along the run, so the
    margins are worst cases over the trajectory.
    """
    d = trace.diagnostics
    k = np.asarray(scenario.weights, dtype=float)
    lam = scenario.observer.lambda_array()
    gains = scenario.control
    eps_f = float(np.max(trace.column("filt_resid")))
    lmin_ko = float(np.min(d["lambda_min_K_o"]))
    lo = lmin_ko - eps_f * sum(ki * np.linalg.eigvalsh(L)[-1] for ki, L in zip(k, lam))
    lkc = float(np.linalg.eigvalsh(gains.K_c_array)[0])
    g_max = float(np.max(d["G_norm"]))
    h_max = float(np.max(d["H_norm"]))
    sbm_max = float(np.max(d["SbM_norm"]))
    la = gains.lambda_a(k.sum())
    m18 = lo - g_max ** 2 / (4.0 * lkc)
    if lo > 0:
        m28 = float(np.min(lkc - d["H_norm"] ** 2 / (4.0 * lo) - d["SbM_norm"]))
    else:
        m28 = -np.inf
    return GainReport(scenario.controller, la, eps_f, lmin_ko, lo, lkc, g_max, h_max,
                      sbm_max, la, m18, lo, m28)
