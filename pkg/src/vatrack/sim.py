"""
Closed-loop simulation of the plant under its estimator and controller.

The whole run is one compiled loop.  State layout (``n`` reference vectors)::

    q[4]  w[3]  q_d[4]  v_f[3n]  bbar[3]  theta_hat[6]  btil_model[3]

``btil_model`` integrates the predicted bias-error dynamics
``d/dt b_tilde = -K_f b_tilde`` (minus ``(alpha1 I + alpha2 J^T) z`` for the
saturated observer) alongside the real observer, as an in-run oracle.

Measurement noise is drawn up front from ``numpy.random.default_rng(seed)``,
one sample per step, and held over the four RK4 stages, so a run is a pure
function of its scenario.
"""

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .attitude_error import _unit_cross, build_w, in_undesired_ball, undesired_equilibrium
from .control import (ADAPTIVE, CONTROLLERS, NONADAPTIVE, OPEN_LOOP, control_law,
                      g_matrix, h_matrix, lyapunov_v2, lyapunov_v3)
from .exceptions import NumericalDivergence
from .observer import (BBAR_CLAMP, SATURATED, VARIANTS, _filter_injection, bias_estimate,
                       initial_bbar, k_f_matrix, plain_rate, saturated_rate)
from .plant import PROFILES, desired_rates, inertia_matrix, omega_dot
from .sensors import draw_noise, perturb_vector
from .so3 import (cross, dot, matmul, matvec, quat_conj, quat_kinematics, quat_mul,
                  random_unit_quaternions, rodrigues, skew, spectral_norm3, sym3_eigvalsh,
                  tmatvec)

CSV_COLUMNS = (
    ["t", "q_w", "q_x", "q_y", "q_z", "w_x", "w_y", "w_z",
     "qd_w", "qd_x", "qd_y", "qd_z", "e_w", "e_x", "e_y", "e_z", "e_R", "z_norm",
     "bhat_x", "bhat_y", "bhat_z", "btil_norm", "sighat_x", "sighat_y", "sighat_z"]
    + [f"theta_hat_{i}" for i in range(1, 7)]
    + ["theta_til_norm", "tau_x", "tau_y", "tau_z", "V", "filt_resid"]
)
TRACE_COLUMNS = CSV_COLUMNS + ["wd_x", "wd_y", "wd_z", "sighat_norm"]
DIAG_COLUMNS = ["G_norm", "H_norm", "SbM_norm", "lambda_min_K_o", "sigma_norm",
                "z_true_norm", "e_R_true", "btil_x", "btil_y", "btil_z",
                "btil_model_x", "btil_model_y", "btil_model_z"]

_NROW = len(TRACE_COLUMNS)
_NDIAG = len(DIAG_COLUMNS)

OK, NONFINITE, SATURATION = 0, 1, 2


# ---------------------------------------------------------------------------
# Compiled kernel
# ---------------------------------------------------------------------------

@njit(cache=True)
def _normalized(q):
    return q / np.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])


@njit(cache=True)
def _measure(R, r, virtual_third, vector_on, dirs, mags):
    n = r.shape[0]
    v = np.empty((n, 3))
    for i in range(n):
        v[i] = tmatvec(R, r[i])
        if vector_on:
            v[i] = perturb_vector(v[i], dirs[i], mags[i])
    if virtual_third:
        v[2] = _unit_cross(v[0], v[1])
    return v


@njit(cache=True)
def _eval(t, x, dirs, mags, gyro_noise, P, full):
    (controller, variant, profile, virtual_third, vector_on, r, k, lam, gamma_f, mu_b,
     M, theta, K_c, Gamma, Gamma_inv, lambda_c, alpha1, alpha2, h_sign, bias,
     omega_const) = P
    n = r.shape[0]
    i_vf = 11
    i_bb = i_vf + 3 * n
    i_th = i_bb + 3
    i_bm = i_th + 6

    q = _normalized(x[0:4])
    w = x[4:7]
    q_d = _normalized(x[7:11])
    v_f = x[i_vf:i_bb].reshape((n, 3))
    bbar = x[i_bb:i_th]
    theta_hat = x[i_th:i_bm]
    btil_model = x[i_bm:i_bm + 3]

    R = rodrigues(q)
    R_d = rodrigues(q_d)
    v = _measure(R, r, virtual_third, vector_on, dirs, mags)
    v_d = np.empty((n, 3))
    for i in range(n):
        v_d[i] = tmatvec(R_d, r[i])
    w_g = w + bias + gyro_noise
    w_d, w_d_dot = desired_rates(profile, t, omega_const)

    vf_dot = gamma_f * (v - v_f)
    b_hat = bias_estimate(variant, bbar, mu_b, k, lam, v, v_f)
    w_hat = w_g - b_hat

    z = np.zeros(3)
    J = np.zeros((3, 3))
    for i in range(n):
        z += k[i] * cross(v[i], v_d[i])
        # S(v_d)^T S(v) = (v_d . v) I - v v_d^T
        c = k[i] * dot(v_d[i], v[i])
        for a in range(3):
            J[a, a] += c
            for b in range(3):
                J[a, b] -= k[i] * v[i, a] * v_d[i, b]

    K_f = k_f_matrix(k, lam, v, v_f)
    injection = _filter_injection(k, lam, v, vf_dot)
    if variant == SATURATED:
        bbar_dot = saturated_rate(bbar, mu_b, K_f, injection, w_hat, z, J, alpha1, alpha2)
    else:
        bbar_dot = plain_rate(K_f, injection, w_hat)

    tau, theta_dot, sigma_hat = control_law(controller, M, theta_hat, w_hat, w_d, w_d_dot,
                                            z, J, K_c, Gamma, lambda_c, alpha1, alpha2, h_sign)
    if controller == OPEN_LOOP:
        w_dot = w_d_dot.copy()
    else:
        w_dot = omega_dot(M, w, tau)

    bm_dot = -matvec(K_f, btil_model)
    if variant == SATURATED:
        bm_dot -= alpha1 * z + alpha2 * tmatvec(J, z)

    xdot = np.empty_like(x)
    xdot[0:4] = quat_kinematics(q, w)
    xdot[4:7] = w_dot
    xdot[7:11] = quat_kinematics(q_d, w_d)
    xdot[i_vf:i_bb] = vf_dot.reshape(3 * n)
    xdot[i_bb:i_th] = bbar_dot
    xdot[i_th:i_bm] = theta_dot
    xdot[i_bm:i_bm + 3] = bm_dot

    row = np.zeros(_NROW)
    diag = np.zeros(_NDIAG)
    if not full:
        return xdot, row, diag

    # ground truth for diagnostics and Lyapunov functions
    v_true = np.empty((n, 3))
    for i in range(n):
        v_true[i] = tmatvec(R, r[i])
    if virtual_third:
        v_true[2] = _unit_cross(v_true[0], v_true[1])
    z_true = np.zeros(3)
    e_R_true = 0.0
    e_R = 0.0
    for i in range(n):
        z_true += k[i] * cross(v_true[i], v_d[i])
        d = v_true[i] - v_d[i]
        e_R_true += 0.5 * k[i] * dot(d, d)
        dm = v[i] - v_d[i]
        e_R += 0.5 * k[i] * dot(dm, dm)
    b_til = b_hat - bias
    theta_til = theta_hat - theta
    w_r = -lambda_c * z_true + w_d
    sigma = w - w_r
    if controller == NONADAPTIVE:
        V = lyapunov_v2(M, sigma, b_til, z_true, e_R_true, alpha1, alpha2)
    elif controller == ADAPTIVE:
        V = lyapunov_v3(M, sigma_hat, b_til, theta_til, Gamma_inv, z_true, e_R_true,
                        alpha1, alpha2)
    else:
        V = 0.5 * dot(b_til, b_til)
    resid = 0.0
    for i in range(n):
        d = v[i] - v_f[i]
        resid = max(resid, np.sqrt(dot(d, d)))
    e = quat_mul(q, quat_conj(q_d))

    row[0] = t
    row[1:5] = q
    row[5:8] = w
    row[8:12] = q_d
    row[12:16] = e
    row[16] = e_R
    row[17] = np.sqrt(dot(z, z))
    row[18:21] = b_hat
    row[21] = np.sqrt(dot(b_til, b_til))
    row[22:25] = sigma_hat
    row[25:31] = theta_hat
    row[31] = np.sqrt(dot(theta_til, theta_til))
    row[32:35] = tau
    row[35] = V
    row[36] = resid
    row[37:40] = w_d
    row[40] = np.sqrt(dot(sigma_hat, sigma_hat))

    K_o = np.zeros((3, 3))
    for i in range(n):
        S = skew(v_true[i])
        K_o += k[i] * matmul(matmul(S.T, lam[i]), S)
    diag[0] = spectral_norm3(g_matrix(M, K_c, w_r, J, lambda_c))
    diag[1] = spectral_norm3(h_matrix(M, K_f, J, w_r, b_til, lambda_c))
    diag[2] = spectral_norm3(matmul(skew(b_til), M))
    diag[3] = sym3_eigvalsh(0.5 * (K_o + K_o.T))[0]
    diag[4] = np.sqrt(dot(sigma, sigma))
    diag[5] = np.sqrt(dot(z_true, z_true))
    diag[6] = e_R_true
    diag[7:10] = b_til
    diag[10:13] = btil_model
    return xdot, row, diag


@njit(cache=True)
def _renormalize(x):
    x[0:4] = _normalized(x[0:4])
    x[7:11] = _normalized(x[7:11])


@njit(cache=True)
def _kernel(x0, dt, nsteps, decimation, dirs, mags, gyro, P, check_saturation):
    n_log = nsteps // decimation + 1
    if nsteps % decimation != 0:
        n_log += 1
    rows = np.zeros((n_log, _NROW))
    diags = np.zeros((n_log, _NDIAG))
    x = x0.copy()
    i_bb = 11 + 3 * P[5].shape[0]
    j = 0
    for step in range(nsteps + 1):
        t = step * dt
        d, m, g = dirs[step], mags[step], gyro[step]
        log_now = step % decimation == 0 or step == nsteps
        k1, row, diag = _eval(t, x, d, m, g, P, log_now)
        if log_now:
            rows[j] = row
            diags[j] = diag
            j += 1
        if step == nsteps:
            break
        # a non-finite stage state would fail the unit-quaternion check downstream
        x2 = x + 0.5 * dt * k1
        if not np.all(np.isfinite(x2)):
            return rows[:j], diags[:j], x2, NONFINITE, step + 1
        k2, _, _ = _eval(t + 0.5 * dt, x2, d, m, g, P, False)
        x3 = x + 0.5 * dt * k2
        if not np.all(np.isfinite(x3)):
            return rows[:j], diags[:j], x3, NONFINITE, step + 1
        k3, _, _ = _eval(t + 0.5 * dt, x3, d, m, g, P, False)
        x4 = x + dt * k3
        if not np.all(np.isfinite(x4)):
            return rows[:j], diags[:j], x4, NONFINITE, step + 1
        k4, _, _ = _eval(t + dt, x4, d, m, g, P, False)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            return rows[:j], diags[:j], x, NONFINITE, step + 1
        if check_saturation:
            for i in range(3):
                if abs(x[i_bb + i]) > BBAR_CLAMP:
                    return rows[:j], diags[:j], x, SATURATION, step + 1
        _renormalize(x)
    return rows[:j], diags[:j], x, OK, nsteps


# ---------------------------------------------------------------------------
# Python front end
# ---------------------------------------------------------------------------

@dataclass
class SimTrace:
    """Logged run: ``data`` rows follow :data:`TRACE_COLUMNS`, ``diag`` rows :data:`DIAG_COLUMNS`."""

    data: np.ndarray
    diag: np.ndarray
    scenario: object = None
    final_state: np.ndarray = None
    wall_time: float = 0.0
    summary: dict = field(default_factory=dict)

    def column(self, name):
        return self.data[:, TRACE_COLUMNS.index(name)]

    def block(self, *names):
        return np.column_stack([self.column(n) for n in names])

    @property
    def t(self):
        return self.column("t")

    @property
    def q(self):
        return self.block("q_w", "q_x", "q_y", "q_z")

    @property
    def e(self):
        return self.block("e_w", "e_x", "e_y", "e_z")

    @property
    def tau(self):
        return self.block("tau_x", "tau_y", "tau_z")

    @property
    def diagnostics(self):
        return {name: self.diag[:, i] for i, name in enumerate(DIAG_COLUMNS)}


def _params(s):
    M = inertia_matrix(np.asarray(s.plant.theta, dtype=float))
    Gamma = s.control.Gamma_array
    return (
        CONTROLLERS[s.controller], VARIANTS[s.observer_variant], PROFILES[s.desired.profile],
        bool(s.references.virtual_third), bool(s.sensors.vector_noise),
        s.ref_vectors, s.weights, s.observer.lambda_array(),
        float(s.observer.gamma_f), float(s.observer.mu_b),
        M, np.asarray(s.plant.theta, dtype=float), s.control.K_c_array, Gamma,
        np.linalg.inv(Gamma), float(s.control.lambda_c), float(s.control.alpha1),
        float(s.control.alpha2), float(s.control.h_alignment_sign),
        np.asarray(s.sensors.bias, dtype=float), np.asarray(s.desired.omega_const, dtype=float),
    )


def initial_state(s, noise):
    """Assemble the kernel state at ``t = 0``; ``v_f(0)`` equals the first measurement."""
    P = _params(s)
    r = s.ref_vectors
    n = len(r)
    q0 = np.asarray(s.initial.q, dtype=float)
    R = rodrigues(q0)
    v0 = _measure(R, r, P[3], P[4], noise.directions[0], noise.vector_mag[0])
    bbar0 = initial_bbar(P[1], s.initial.bhat, P[9], P[6], P[7], v0, v0)
    x0 = np.concatenate([
        q0, s.initial.omega, s.initial.q_d, v0.reshape(-1), bbar0, s.initial.theta_hat,
        np.asarray(s.initial.bhat) - np.asarray(s.sensors.bias),
    ]).astype(float)
    assert x0.shape == (11 + 3 * n + 12,)
    return x0, P


def run(scenario):
    """
    Simulate ``scenario`` and return its :class:`SimTrace`.

    Raises
    ------
    NumericalDivergence
        If the state becomes non-finite or the saturated observer's internal
        state leaves ``|bbar_i| <= 20``.
    """
    s = scenario
    nsteps = int(round(s.run.duration / s.run.dt))
    noise = draw_noise(s.sensors, len(s.references.vectors), nsteps + 1)
    x0, P = initial_state(s, noise)
    tic = time.perf_counter()
    rows, diags, x, status, step = _kernel(
        x0, float(s.run.dt), nsteps, int(s.run.decimation), noise.directions,
        noise.vector_mag, noise.gyro, P, s.observer_variant == "saturated")
    wall = time.perf_counter() - tic
    if status != OK:
        reason = "non-finite state" if status == NONFINITE else "saturated observer state beyond clamp"
        raise NumericalDivergence(f"{reason} at step {step}", step=step, t=step * s.run.dt)
    trace = SimTrace(rows, diags, s, x, wall)
    trace.summary = summarize(trace)
    return trace


def settle_time(t, y, threshold):
    """First time after which ``y`` stays at or below ``threshold`` (``inf`` if never)."""
    above = np.nonzero(y > threshold)[0]
    if above.size == 0:
        return float(t[0])
    if above[-1] == len(t) - 1:
        return math.inf
    return float(t[above[-1] + 1])


def summarize(trace):
    t = trace.t
    z = trace.column("z_norm")
    tau = np.linalg.norm(trace.tau, axis=1)
    return {
        "final_e0": float(trace.column("e_w")[-1]),
        "final_z_norm": float(z[-1]),
        "final_btil_norm": float(trace.column("btil_norm")[-1]),
        "sup_z_norm": float(z.max()),
        "sup_tau_norm": float(tau.max()),
        "sup_btil_norm": float(trace.column("btil_norm").max()),
        "sup_sighat_norm": float(trace.column("sighat_norm").max()),
        "settle_z_0.02": settle_time(t, z, 0.02),
        "settle_btil_0.2": settle_time(t, trace.column("btil_norm"), 0.2),
        "wall_time_s": trace.wall_time,
    }


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def _noise_off(s):
    return s.replace(**{"sensors.vector_noise": False, "sensors.gyro_noise": False})


def _aligned_start(s, e0):
    """Scenario whose initial attitude is ``e0 ⊗ q_d(0)`` with ``w(0) = w_d(0)``, ``b_hat(0) = b``."""
    q0 = quat_mul(np.asarray(e0, dtype=float), np.asarray(s.initial.q_d, dtype=float))
    w_d0, _ = desired_rates(PROFILES[s.desired.profile], 0.0,
                            np.asarray(s.desired.omega_const, dtype=float))
    return s.replace(**{"initial.q": q0 / np.linalg.norm(q0), "initial.omega": w_d0,
                        "initial.bhat": s.sensors.bias})


@dataclass
class InstabilityReport:
    j: int
    eps: float
    eigenvalue: float
    escape_time: float
    final_e0: float
    final_z_norm: float
    max_z_norm_10s: float
    trace: SimTrace = None


def instability_experiment(scenario, j, eps, band=0.01):
    """
    Start next to the undesired equilibrium ``e_j`` and time the escape.

    The attitude error starts at ``e_j`` rotated by ``eps`` along its own axis;
    every other state starts at its equilibrium value.  The escape time is the first time ``e_R`` leaves ``2 lambda_w,j ± band``.
    """
    s = _noise_off(scenario).replace(**{"initial.theta_hat": scenario.plant.theta})
    W = build_w(s.reference_set())
    e0 = undesired_equilibrium(W, j, eps)
    trace = run(_aligned_start(s, e0))
    t = trace.t
    e_R = trace.diagnostics["e_R_true"]
    target = 2.0 * W.eigenvalue(j)
    out = np.nonzero(np.abs(e_R - target) > band)[0]
    escape = float(t[out[0]]) if out.size else math.inf
    z = trace.diagnostics["z_true_norm"]
    return InstabilityReport(j, eps, W.eigenvalue(j), escape, float(trace.column("e_w")[-1]),
                             float(z[-1]), float(z[t <= 10.0].max()), trace)


@dataclass
class SweepReport:
    controller: str
    threshold: float
    initial_errors: np.ndarray
    final_z_norm: np.ndarray
    converged: np.ndarray
    in_ball: np.ndarray
    diverged: np.ndarray

    @property
    def fraction(self):
        return float(self.converged.mean())

    @property
    def unexplained_failures(self):
        """Indices that failed to converge yet started outside every ``B_j`` ball."""
        return np.nonzero(~self.converged & ~self.in_ball)[0]

    @property
    def passed(self):
        return self.unexplained_failures.size == 0


def _sweep_one(args):
    s, e0, bhat0 = args
    try:
        trace = run(_aligned_start(s, e0).replace(**{"initial.bhat": bhat0}))
    except NumericalDivergence:
        return math.inf, True
    return float(trace.diagnostics["z_true_norm"][-1]), False


def sample_initial_errors(samples, seed):
    return random_unit_quaternions(np.random.default_rng(seed), samples)


def sample_bias_estimates(rng, samples, radius):
    """Uniform draws from the ball ``|b_hat| <= radius``."""
    d = rng.standard_normal((samples, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * radius * rng.uniform(0.0, 1.0, (samples, 1)) ** (1.0 / 3.0)


def attraction_sweep(scenario, samples, seed, threshold=None, bias_radius=None, workers=1,
                     noise=False):
    """
    Run ``samples`` uniform random initial attitude errors and report convergence.

    A run converges when ``|z(T)| < threshold`` (``1e-4`` noise-free, ``1e-2``
    with noise).  ``z`` here is the noise-free alignment error from the true
    attitude, so sensor noise does not count as tracking error.  The bias estimate starts uniformly in a ball around the
    true bias; for the saturated observer the radius is kept small enough that
    the initial estimate is representable.
    """
    s = scenario if noise else _noise_off(scenario)
    if threshold is None:
        threshold = 1e-2 if noise else 1e-4
    if bias_radius is None:
        bias_radius = 0.5 if s.observer_variant == "saturated" else 1.0
    rng = np.random.default_rng(seed)
    e0 = random_unit_quaternions(rng, samples)
    bhat0 = np.asarray(s.sensors.bias) + sample_bias_estimates(rng, samples, bias_radius)
    jobs = [(s, e0[i], bhat0[i]) for i in range(samples)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(job) for job in jobs]
    final = np.array([r[0] for r in results])
    diverged = np.array([r[1] for r in results])
    W = build_w(s.reference_set())
    in_ball = np.array([in_undesired_ball(e, W, 0.1) for e in e0])
    return SweepReport(s.controller, threshold, e0, final, final < threshold, in_ball, diverged)


@dataclass
class SeparationReport:
    rate_open_loop: float
    rate_closed_loop: float

    @property
    def relative_difference(self):
        return abs(self.rate_closed_loop - self.rate_open_loop) / abs(self.rate_open_loop)


def decay_rate(t, y, t0, t1):
    """Least-squares slope of ``log y`` over ``[t0, t1]``."""
    sel = (t >= t0) & (t <= t1) & (y > 0)
    return float(np.polyfit(t[sel], np.log(y[sel]), 1)[0])


def separation_experiment(scenario, bhat0=(1.0, -1.0, 0.5), window=(0.5, 3.0)):
    """
    Compare the bias-error decay rate of the plain observer run open loop
    (attitude driven along ``w_d``) with the same observer inside the
    nonadaptive closed loop.  Both runs are noise-free and start on the
    desired trajectory.
    """
    s = _noise_off(scenario).replace(**{"run.observer": "plain"})
    s = _aligned_start(s, [1.0, 0.0, 0.0, 0.0]).replace(**{"initial.bhat": bhat0})
    rates = []
    for controller in ("open_loop", "nonadaptive"):
        tr = run(s.replace(**{"run.controller": controller}))
        rates.append(decay_rate(tr.t, tr.column("btil_norm"), *window))
    return SeparationReport(*rates)
