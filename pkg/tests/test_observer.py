import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_unit
from vatrack.attitude_error import k_o_matrix
from vatrack.observer import (PLAIN, SATURATED, bias_estimate, cosh_squared, initial_bbar,
                              k_f_matrix, lambda_o, measurement_correction,
                              observer_derivative_plain, observer_derivative_saturated,
                              saturated_bias_bound)
from vatrack.so3 import (quat_from_axis_angle, quat_mul, random_unit_quaternions, rodrigues,
                         skew)

K = np.full(3, 0.1)
LAM10 = np.array([10.0 * np.eye(3)] * 3)
R_BENCH = np.array([[0.0, 0.0, 1.0], [1.0, 1.0, 1.0] / np.sqrt(3.0), [-1.0, 1.0, 0.0] / np.sqrt(2.0)])


def spd(rng):
    A = rng.standard_normal((3, 3))
    return A @ A.T + 0.5 * np.eye(3)


def test_zero_correction_when_filter_matches_and_gain_isotropic(rng):
    v = random_unit(rng, 3)
    np.testing.assert_allclose(measurement_correction(K, LAM10, v, v), 0, atol=1e-15)
    np.testing.assert_allclose(bias_estimate(PLAIN, np.zeros(3), 1.0, K, LAM10, v, v), 0, atol=1e-15)


def test_saturation_limit(rng):
    v, v_f = random_unit(rng, 3), random_unit(rng, 3)
    corr = measurement_correction(K, LAM10, v, v_f)
    b = bias_estimate(SATURATED, np.full(3, 50.0), 0.7, K, LAM10, v, v_f)
    np.testing.assert_allclose(b, 0.7 - corr, atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-0.3, 0.3), min_size=3, max_size=3))
def test_plain_and_saturated_agree_to_third_order(bbar):
    bbar = np.array(bbar)
    v = np.array([[0.0, 0, 1], [0, 1, 0], [1, 0, 0]])
    v_f = v + 0.01
    diff = (bias_estimate(PLAIN, bbar, 1.0, K, LAM10, v, v_f)
            - bias_estimate(SATURATED, bbar, 1.0, K, LAM10, v, v_f))
    assert np.linalg.norm(diff) <= np.linalg.norm(bbar) ** 3 + 1e-15


def test_k_f_equals_k_o_with_perfect_filter(rng):
    for q in random_unit_quaternions(rng, 10):
        v = R_BENCH @ rodrigues(q)
        K_f = k_f_matrix(K, LAM10, v, v)
        np.testing.assert_allclose(K_f, 3 * np.eye(3) - v.T @ v, atol=1e-14)
        np.testing.assert_allclose(K_f, k_o_matrix(K, v, LAM10), atol=1e-14)


def test_k_f_keeps_its_asymmetry(rng):
    v, v_f = random_unit(rng, 3), random_unit(rng, 3)
    lam = np.array([spd(rng) for _ in range(3)])
    K_f = k_f_matrix(K, lam, v, v_f)
    expected = sum(k * skew(vf).T @ L @ skew(vi) for k, L, vi, vf in zip(K, lam, v, v_f))
    np.testing.assert_allclose(K_f, expected, atol=1e-14)
    assert not np.allclose(K_f, K_f.T)


def _error_rate_fd(variant, seed, h=1e-6, at_equilibrium=False):
    """Finite-difference d/dt b_tilde along an exact attitude flow versus the predicted rate."""
    rng = np.random.default_rng(seed)
    lam = np.array([spd(rng) for _ in range(3)])
    q0 = random_unit_quaternions(rng, 1)[0]
    w = rng.standard_normal(3)
    b = 0.3 * rng.standard_normal(3)
    bbar0 = 0.4 * rng.standard_normal(3)
    v_f0 = R_BENCH @ rodrigues(q0) + 0.05 * rng.standard_normal((3, 3))
    gamma_f, mu_b, a1, a2 = 7.0, 1.3, 0.1, 0.01
    z, J = rng.standard_normal(3), rng.standard_normal((3, 3))
    if at_equilibrium:
        v_f0 = R_BENCH @ rodrigues(q0)
        z = np.zeros(3)

    def v_at(t):
        return R_BENCH @ rodrigues(quat_mul(q0, quat_from_axis_angle(w, np.linalg.norm(w) * t)))

    v0 = v_at(0.0)
    vf_dot = gamma_f * (v0 - v_f0)
    b_hat0 = bias_estimate(variant, bbar0, mu_b, K, lam, v0, v_f0)
    if at_equilibrium:
        b = b_hat0
    w_hat = w + b - b_hat0
    if variant == PLAIN:
        bbar_dot = observer_derivative_plain(K, lam, v0, v_f0, vf_dot, w_hat)
    else:
        bbar_dot = observer_derivative_saturated(bbar0, mu_b, K, lam, v0, v_f0, vf_dot, w_hat,
                                                 z, J, a1, a2)

    def b_hat_at(t):
        return bias_estimate(variant, bbar0 + t * bbar_dot, mu_b, K, lam, v_at(t),
                             v_f0 + t * vf_dot)

    fd = (b_hat_at(h) - b_hat_at(-h)) / (2 * h)
    b_til = b_hat0 - b
    predicted = -k_f_matrix(K, lam, v0, v_f0) @ b_til
    if variant == SATURATED:
        predicted -= a1 * z + a2 * J.T @ z
    return fd, predicted


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("variant", [PLAIN, SATURATED])
def test_bias_error_dynamics(variant, seed):
    fd, predicted = _error_rate_fd(variant, seed)
    np.testing.assert_allclose(fd, predicted, atol=1e-6 * max(1.0, np.abs(predicted).max()))


@pytest.mark.parametrize("variant", [PLAIN, SATURATED])
def test_equilibrium_with_perfect_filter(variant):
    fd, predicted = _error_rate_fd(variant, 0, at_equilibrium=True)
    np.testing.assert_array_equal(predicted, np.zeros(3))
    np.testing.assert_allclose(fd, 0, atol=1e-8)


def test_cosh_squared_and_clamp():
    x = np.array([0.0, 1.0, -2.0])
    np.testing.assert_allclose(cosh_squared(x), np.cosh(x) ** 2, rtol=1e-14)
    big = cosh_squared(np.array([1e3, -1e3, 25.0]))
    assert np.all(np.isfinite(big))
    np.testing.assert_allclose(big, np.cosh(20.0) ** 2, rtol=1e-12)


@pytest.mark.parametrize("variant", [PLAIN, SATURATED])
def test_initial_bbar_reproduces_estimate(rng, variant):
    v = random_unit(rng, 3)
    v_f = v + 0.02 * rng.standard_normal((3, 3))
    lam = np.array([spd(rng) for _ in range(3)])
    target = np.array([0.2, -0.3, 0.1])
    bbar = initial_bbar(variant, target, 1.0, K, lam, v, v_f)
    np.testing.assert_allclose(bias_estimate(variant, bbar, 1.0, K, lam, v, v_f), target,
                               atol=1e-14)


def test_initial_bbar_out_of_range():
    v = np.eye(3)
    with pytest.raises(ValueError):
        initial_bbar(SATURATED, [1.5, 0, 0], 1.0, K, LAM10, v, v)


def test_lambda_o_examples():
    v = R_BENCH
    K_o = k_o_matrix(K, v, LAM10)
    assert lambda_o(K, LAM10, v, 0.0) == pytest.approx(np.linalg.eigvalsh(K_o)[0], abs=1e-14)
    # benchmark: K_o = 3 I - sum v v^T has lambda_min = 3 - (1 + 1/sqrt(3))
    assert lambda_o(K, LAM10, v, 0.0) == pytest.approx(2 - 1 / np.sqrt(3), abs=1e-12)
    assert lambda_o(K, LAM10, v, 0.01) == pytest.approx(2 - 1 / np.sqrt(3) - 0.03, abs=1e-12)
    assert lambda_o([1.0], [np.eye(3)], v[:1], 0.0) <= 1e-15


def test_saturated_bound_value():
    assert saturated_bias_bound(1.0, K, LAM10) == pytest.approx(np.sqrt(3) + 3.0)
