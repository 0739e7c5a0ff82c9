"""
Gyro-bias observers driven by vector measurements.

Both variants keep an internal state ``bbar`` and output

    b_hat = g(bbar) - sum k_i S(v_f,i)^T Lambda_i v_i

with ``g`` the identity (plain) or ``mu_b * tanh`` entry-wise (saturated).
The plain observer gives ``d/dt b_tilde = -K_f b_tilde`` with
``K_f = sum k_i S(v_f,i)^T Lambda_i S(v_i)``.  The saturated one keeps
``b_hat`` bounded and adds the controller's alignment feedback, giving
``d/dt b_tilde = -K_f b_tilde - (alpha1 I + alpha2 J^T) z``.

Note that ``K_f`` deliberately mixes filtered (left) and raw (right)
measurements.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .attitude_error import k_o_matrix
from .so3 import cross, matmul, matvec, skew, tmatvec

PLAIN = 0
SATURATED = 1
VARIANTS = {"plain": PLAIN, "saturated": SATURATED}

BBAR_CLAMP = 20.0


@dataclass(frozen=True)
class ObserverGains:
    lambdas: tuple          # one 3x3 nested tuple per reference vector
    gamma_f: float = 1000.0
    mu_b: float = 1.0

    def lambda_array(self):
        return np.array(self.lambdas, dtype=float).reshape(-1, 3, 3)


@njit(cache=True)
def measurement_correction(k, lam, v, v_f):
    """``sum k_i S(v_f,i)^T Lambda_i v_i``."""
    c = np.zeros(3)
    for i in range(k.shape[0]):
        # S(a)^T y = y x a
        c += k[i] * cross(matvec(lam[i], v[i]), v_f[i])
    return c


@njit(cache=True)
def k_f_matrix(k, lam, v, v_f):
    """``K_f = sum k_i S(v_f,i)^T Lambda_i S(v_i)``."""
    K = np.zeros((3, 3))
    for i in range(k.shape[0]):
        K += k[i] * matmul(matmul(skew(v_f[i]).T, lam[i]), skew(v[i]))
    return K


@njit(cache=True)
def _filter_injection(k, lam, v, vf_dot):
    out = np.zeros(3)
    for i in range(k.shape[0]):
        out += k[i] * cross(matvec(lam[i], v[i]), vf_dot[i])
    return out


@njit(cache=True)
def bias_estimate(variant, bbar, mu_b, k, lam, v, v_f):
    if variant == SATURATED:
        base = mu_b * np.tanh(bbar)
    else:
        base = bbar.copy()
    return base - measurement_correction(k, lam, v, v_f)


@njit(cache=True)
def observer_derivative_plain(k, lam, v, v_f, vf_dot, omega_hat):
    """
    ``d bbar/dt = K_f w_hat + sum k_i S(Lambda_i v_i) dv_f,i/dt``.

    With ``dv_f/dt = gamma_f (v - v_f)`` the second term is the usual
    ``gamma_f sum k_i S(Lambda_i v_i)(v_i - v_f,i)``.
    """
    return plain_rate(k_f_matrix(k, lam, v, v_f), _filter_injection(k, lam, v, vf_dot), omega_hat)


@njit(cache=True)
def plain_rate(K_f, injection, omega_hat):
    return matvec(K_f, omega_hat) + injection


@njit(cache=True)
def cosh_squared(x):
    """Entry-wise ``cosh(x)^2`` as ``1 / sech(x)^2``, arguments clamped to +/-20."""
    out = np.empty(3)
    for i in range(3):
        xi = min(max(x[i], -BBAR_CLAMP), BBAR_CLAMP)
        sech = 2.0 / (np.exp(xi) + np.exp(-xi))
        out[i] = 1.0 / (sech * sech)
    return out


@njit(cache=True)
def observer_derivative_saturated(bbar, mu_b, k, lam, v, v_f, vf_dot, omega_hat,
                                  z, J, alpha1, alpha2):
    """
    ``d bbar/dt = Cosh(bbar)^2 (K_f w_hat + sum k_i S(Lambda_i v_i) dv_f,i/dt
    - (alpha1 I + alpha2 J^T) z) / mu_b``.
    """
    return saturated_rate(bbar, mu_b, k_f_matrix(k, lam, v, v_f),
                          _filter_injection(k, lam, v, vf_dot), omega_hat, z, J, alpha1, alpha2)


@njit(cache=True)
def saturated_rate(bbar, mu_b, K_f, injection, omega_hat, z, J, alpha1, alpha2):
    inner = matvec(K_f, omega_hat) + injection - (alpha1 * z + alpha2 * tmatvec(J, z))
    return cosh_squared(bbar) * inner / mu_b


def initial_bbar(variant, bhat0, mu_b, k, lam, v0, v_f0):
    """Internal state that makes the observer output ``bhat0`` at start-up."""
    target = np.asarray(bhat0, dtype=float) + measurement_correction(
        np.asarray(k, dtype=float), lam, v0, v_f0)
    if variant == PLAIN:
        return target
    ratio = target / mu_b
    if np.any(np.abs(ratio) >= 1.0):
        raise ValueError("initial bias estimate is outside the saturated observer's range")
    return np.arctanh(ratio)


def lambda_o(k, lam, v, eps_f):
    """Observer rate margin ``lambda_min(K_o) - eps_f sum k_i lambda_max(Lambda_i)``."""
    k = np.asarray(k, dtype=float)
    lam = np.asarray(lam, dtype=float).reshape(-1, 3, 3)
    K_o = k_o_matrix(k, v, lam)
    lmin = np.linalg.eigvalsh(0.5 * (K_o + K_o.T))[0]
    return lmin - eps_f * sum(ki * np.linalg.eigvalsh(L)[-1] for ki, L in zip(k, lam))


def saturated_bias_bound(mu_b, k, lam):
    """Bound ``sqrt(3) mu_b + sum k_i lambda_max(Lambda_i)`` on the saturated ``b_hat``."""
    lam = np.asarray(lam, dtype=float).reshape(-1, 3, 3)
    return np.sqrt(3.0) * mu_b + sum(ki * np.linalg.eigvalsh(L)[-1] for ki, L in zip(k, lam))
