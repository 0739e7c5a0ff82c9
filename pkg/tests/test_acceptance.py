"""
Acceptance suite.

Each test checks one acceptance criterion, prints a single
``C<n> PASS|FAIL <description>`` line followed by its sub-checks and INFO
lines, and fails when any sub-check fails.  The lines are repeated in the
terminal summary.
"""

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, random_refs
from vatrack.attitude_error import build_w, e_r, e_r_from_quat, j_matrix, z_from_quat, z_vec
from vatrack.control import f1, gain_condition_report, regressor
from vatrack.plant import inertia_matrix
from vatrack.scenario import builtin_scenario
from vatrack.sim import (attraction_sweep, decay_rate, instability_experiment, run,
                         sample_bias_estimates)
from vatrack.so3 import (quat_conj, quat_from_axis_angle, quat_mul, random_unit_quaternions,
                         rodrigues)
from vatrack.trace import write_csv

pytestmark = pytest.mark.slow

SEEDS = (1, 2, 3, 4, 5)


def verdict(n, desc, checks, info=()):
    """Print and record the criterion line, then assert every sub-check."""
    passed = all(ok for _, ok in checks)
    lines = [f"C{n} {'PASS' if passed else 'FAIL'} {desc}"]
    lines += [f"    {'ok  ' if ok else 'FAIL'} {name}" for name, ok in checks]
    lines += [f"    INFO {item}" for item in info]
    ACCEPTANCE_LINES.extend(lines)
    print("\n".join(lines))
    assert passed, "\n".join(lines)


def _quiet(s):
    return s.replace(**{"sensors.vector_noise": False, "sensors.gyro_noise": False})


@pytest.fixture(scope="module")
def seed_traces(bench):
    return [run(bench.replace(**{"sensors.seed": seed})) for seed in SEEDS]


# 1 -------------------------------------------------------------------------

def test_c1_adaptive_reproduction(seed_traces):
    t = seed_traces[0].t

    def mean(f):
        return np.mean([f(tr) for tr in seed_traces], axis=0)

    e0 = mean(lambda tr: tr.column("e_w"))
    z_true = mean(lambda tr: tr.diagnostics["z_true_norm"])
    z_meas = mean(lambda tr: tr.column("z_norm"))
    btil = mean(lambda tr: tr.column("btil_norm"))
    sig = mean(lambda tr: tr.column("sighat_norm"))
    sig_true = mean(lambda tr: tr.diagnostics["sigma_norm"])
    th = mean(lambda tr: tr.column("theta_til_norm"))
    tau = mean(lambda tr: np.linalg.norm(tr.tau, axis=1))
    late, later = t > 20.0, t > 30.0
    wall = max(tr.wall_time for tr in seed_traces)
    checks = [
        (f"e0 in [-1, -0.99] for t > 30 s: range [{e0[later].min():.5f}, {e0[later].max():.5f}]",
         bool(np.all((e0[later] >= -1.0) & (e0[later] <= -0.99)))),
        (f"|z| <= 0.02 for t > 20 s: max {z_true[late].max():.4f}", z_true[late].max() <= 0.02),
        (f"|b_tilde| <= 0.2 for t > 20 s: max {btil[late].max():.4f}", btil[late].max() <= 0.2),
        (f"|sigma_hat| <= 0.2 for t > 20 s: max {sig[late].max():.4f}", sig[late].max() <= 0.2),
        (f"|theta_tilde| <= 0.02 for t > 30 s: max {th[later].max():.4f}",
         th[later].max() <= 0.02),
        (f"|tau| <= 1 N m throughout: max {tau.max():.3f} at t = {t[tau.argmax()]:.3f} s",
         tau.max() <= 1.0),
        (f"runtime < 60 s per run: max {wall:.2f} s", wall < 60.0),
    ]
    info = [
        f"norms averaged over seeds {list(SEEDS)}; |z| from the true attitude",
        f"|z| from the noisy measurements, t > 20 s: max {z_meas[late].max():.4f}",
        f"|sigma| from the true rate and attitude, t > 20 s: max {sig_true[late].max():.4f}",
        f"|tau| for t > 1 s: max {tau[t > 1.0].max():.3f}",
    ]
    verdict(1, "adaptive reproduction with noise", checks, info)


# 2 -------------------------------------------------------------------------

def test_c2_exponential_observer(bench):
    s = _quiet(bench).replace(**{"run.controller": "open_loop", "run.observer": "plain",
                                 "initial.omega": (1.5, 0.0, 1.0)})
    bhats = sample_bias_estimates(np.random.default_rng(3), 20, 10.0)
    slopes, margins, reached, lam_o = [], [], [], []
    for bhat in bhats:
        tr = run(s.replace(**{"initial.bhat": bhat}))
        bt = tr.column("btil_norm")
        lo = gain_condition_report(tr, s).lambda_o
        slope = decay_rate(tr.t, bt, 0.0, tr.t[bt > 1e-9][-1])
        slopes.append(slope)
        lam_o.append(lo)
        margins.append(slope <= -0.95 * lo)
        hit = np.nonzero(bt < 1e-6)[0]
        reached.append(tr.t[hit[0]] if hit.size else np.inf)
    reached = np.array(reached)
    checks = [
        (f"log-slope <= -0.95 lambda_o on all 20 runs: slopes in "
         f"[{min(slopes):.3f}, {max(slopes):.3f}], lambda_o in [{min(lam_o):.4f}, {max(lam_o):.4f}]",
         all(margins)),
        (f"|b_tilde| < 1e-6 by 40 s on all 20 runs: latest at {reached.max():.2f} s",
         bool(np.all(reached <= 40.0))),
    ]
    info = [f"|b_hat(0)| in [{np.linalg.norm(bhats, axis=1).min():.2f}, "
            f"{np.linalg.norm(bhats, axis=1).max():.2f}]"]
    verdict(2, "exponential bias observer", checks, info)


# 3 -------------------------------------------------------------------------

def test_c3_identity_suite():
    rng = np.random.default_rng(20240611)
    h = 1e-5
    worst = dict(er=0.0, z=0.0, n2z=0.0, jexcess=-np.inf, er_fd=0.0, z_fd=0.0)
    for _ in range(1000):
        refs = random_refs(rng)
        W = build_w(refs)
        k = refs.weights
        q, q_d = random_unit_quaternions(rng, 2)
        w, w_d = rng.standard_normal((2, 3))
        v, v_d = refs.vectors @ rodrigues(q), refs.vectors @ rodrigues(q_d)
        e = quat_mul(q, quat_conj(q_d))
        ev = e[1:]
        er = e_r(k, v, v_d)
        er_inner = float(np.sum(k * (1.0 - np.einsum("ij,ij->i", v, v_d))))
        z = z_vec(k, v, v_d)
        J = j_matrix(k, v, v_d)
        worst["er"] = max(worst["er"], abs(er - er_inner), abs(er - e_r_from_quat(W, e)))
        worst["z"] = max(worst["z"], np.abs(z - z_from_quat(W, e, rodrigues(q_d))).max())
        worst["n2z"] = max(worst["n2z"], abs(0.5 * z @ z - 2.0 * ev @ W.w @ W.w @ ev
                                             + 2.0 * (ev @ W.w @ ev) ** 2))
        worst["jexcess"] = max(worst["jexcess"], np.linalg.norm(J, 2) - k.sum())

        def at(dt):
            qa = quat_mul(q, quat_from_axis_angle(w, np.linalg.norm(w) * dt))
            qb = quat_mul(q_d, quat_from_axis_angle(w_d, np.linalg.norm(w_d) * dt))
            return refs.vectors @ rodrigues(qa), refs.vectors @ rodrigues(qb)

        (vp, vdp), (vm, vdm) = at(h), at(-h)
        er_fd = (e_r(k, vp, vdp) - e_r(k, vm, vdm)) / (2 * h)
        z_fd = (z_vec(k, vp, vdp) - z_vec(k, vm, vdm)) / (2 * h)
        worst["er_fd"] = max(worst["er_fd"], abs(er_fd - z @ (w - w_d)))
        worst["z_fd"] = max(worst["z_fd"],
                            np.linalg.norm(z_fd - (J @ (w - w_d) + np.cross(z, w_d))))
    checks = [
        (f"three e_R forms agree: worst {worst['er']:.2e}", worst["er"] < 1e-10),
        (f"z from vectors equals z from quaternion: worst {worst['z']:.2e}", worst["z"] < 1e-10),
        (f"|z|^2 identity: worst {worst['n2z']:.2e}", worst["n2z"] < 1e-10),
        (f"|J| <= sum k: worst excess {worst['jexcess']:.2e}", worst["jexcess"] <= 1e-12),
        (f"de_R/dt finite difference: worst {worst['er_fd']:.2e}", worst["er_fd"] < 1e-3),
        (f"dz/dt finite difference: worst {worst['z_fd']:.2e}", worst["z_fd"] < 1e-3),
    ]
    verdict(3, "attitude error identities on 1000 samples", checks)


# 4 -------------------------------------------------------------------------

def test_c4_regressor_oracle():
    rng = np.random.default_rng(4)
    worst_y = worst_f = 0.0
    for _ in range(100):
        w, h = rng.standard_normal((2, 3))
        theta = rng.standard_normal(6)
        M = inertia_matrix(theta)
        rhs = np.cross(w, M @ w) + M @ h
        worst_y = max(worst_y, np.linalg.norm(regressor(w, h) @ theta - rhs)
                      / max(np.linalg.norm(rhs), np.finfo(float).tiny))
        u = rng.standard_normal(3)
        theta = rng.standard_normal(6)
        Mu = inertia_matrix(theta) @ u
        worst_f = max(worst_f, np.linalg.norm(f1(u) @ theta - Mu) / np.linalg.norm(Mu))
    checks = [
        (f"Y(w, h) theta = S(w) M w + M h: worst relative {worst_y:.2e}", worst_y < 1e-12),
        (f"F1(u) theta = M u: worst relative {worst_f:.2e}", worst_f < 1e-12),
    ]
    verdict(4, "regressor oracle on 100 samples", checks)


# 5 -------------------------------------------------------------------------

def test_c5_lyapunov_monotonicity(bench):
    s = _quiet(bench).replace(**{"run.decimation": 1})
    na = s.replace(**{"run.controller": "nonadaptive"})
    tr_na = run(na)
    report = gain_condition_report(tr_na, na)
    dv2 = np.diff(tr_na.column("V")).max()
    tr_ad = run(s.replace(**{"run.controller": "adaptive"}))
    dv3 = np.diff(tr_ad.column("V")).max()
    checks = [
        (f"nonadaptive gain conditions certified: margins {report.margin_17:.4g}, "
         f"{report.margin_18:.4g}", report.passed),
        (f"nonadaptive V2 per-step increase <= 1e-9: max {dv2:.2e}", dv2 <= 1e-9),
        (f"adaptive V3 per-step increase <= 1e-6: max {dv3:.2e}", dv3 <= 1e-6),
    ]
    verdict(5, "Lyapunov monotonicity, noise-free", checks)


# 6 -------------------------------------------------------------------------

def test_c6_instability_of_undesired_equilibria(bench):
    s = builtin_scenario("instability")
    checks, info = [], []
    for j in (1, 2, 3):
        rep = instability_experiment(s, j, 1e-3)
        checks.append((f"j={j} eps=1e-3 leaves 2 lambda_w,j +/- 0.01 within 20 s: "
                       f"{rep.escape_time:.2f} s", rep.escape_time <= 20.0))
        checks.append((f"j={j} eps=1e-3 reaches |z| < 1e-4 by 40 s: {rep.final_z_norm:.2e}",
                       rep.final_z_norm < 1e-4))
        rest = instability_experiment(s, j, 0.0)
        checks.append((f"j={j} eps=0 stays: max |z| over 10 s {rest.max_z_norm_10s:.2e}",
                       rest.max_z_norm_10s < 1e-8))
        times = [instability_experiment(s, j, eps).escape_time for eps in (1e-4, 1e-2)]
        info.append(f"j={j} escape times for eps 1e-4, 1e-3, 1e-2: "
                    f"{times[0]:.2f}, {rep.escape_time:.2f}, {times[1]:.2f} s")
    info.append(f"instability scenario: lambda_c = {s.control.lambda_c}, dt = {s.run.dt}, "
                f"{s.controller}, noise off")
    for j in (1, 2, 3):
        rep = instability_experiment(bench, j, 1e-3)
        info.append(f"benchmark gains j={j}: escape {rep.escape_time:.2f} s, "
                    f"final |z| {rep.final_z_norm:.2e}")
    verdict(6, "instability of the undesired equilibria", checks, info)


# 7 -------------------------------------------------------------------------

def test_c7_almost_global_sweep(bench):
    s = bench.replace(**{"run.decimation": 1000})
    checks, info = [], []
    for controller in ("nonadaptive", "adaptive"):
        rep = attraction_sweep(s.replace(**{"run.controller": controller}), 100, seed=0)
        bad = rep.unexplained_failures
        checks.append((f"{controller}: {int(rep.converged.sum())}/100 reach |z(40 s)| < "
                       f"{rep.threshold:g}, {bad.size} failures outside every B_j",
                       rep.passed))
        info.append(f"{controller}: final |z| median {np.median(rep.final_z_norm):.2e}, "
                    f"max {rep.final_z_norm.max():.2e}, in B_j {int(rep.in_ball.sum())}, "
                    f"diverged {int(rep.diverged.sum())}")
    noisy = attraction_sweep(s, 100, seed=0, noise=True)
    info.append(f"adaptive with noise, threshold {noisy.threshold:g}: "
                f"{int(noisy.converged.sum())}/100 converge, "
                f"{noisy.unexplained_failures.size} failures outside every B_j")
    W = build_w(bench.reference_set())
    info.append(f"slowest linear rate lambda_c lambda_min(W) = "
                f"{bench.control.lambda_c * W.eigenvalues.min():.4f} 1/s")
    verdict(7, "almost-global convergence sweep", checks, info)


# 8 -------------------------------------------------------------------------

def _richardson(s, base):
    xs = [run(s.replace(**{"run.dt": dt})).final_state for dt in (base, base / 2, base / 4)]
    return np.linalg.norm(xs[0] - xs[1]) / np.linalg.norm(xs[1] - xs[2])


def test_c8_numerics(bench, seed_traces, tmp_path):
    s = _quiet(bench).replace(**{"run.duration": 10.0, "run.decimation": 100000})
    checks, info = [], []
    for controller in ("adaptive", "nonadaptive"):
        sc = s.replace(**{"run.controller": controller})
        ratio = _richardson(sc, 5e-4)
        checks.append((f"{controller} Richardson ratio at dt 5e-4 in [12, 20]: {ratio:.3f}",
                       12.0 <= ratio <= 20.0))
        info.append(f"{controller} Richardson ratio at dt 1e-3: {_richardson(sc, 1e-3):.3f}")
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        write_csv(run(bench), p)
    checks.append(("CSV bit-identical for a fixed seed",
                   paths[0].read_bytes() == paths[1].read_bytes()))
    dev = max(np.abs(np.linalg.norm(tr.block(*cols), axis=1) - 1.0).max()
              for tr in seed_traces
              for cols in (("q_w", "q_x", "q_y", "q_z"), ("qd_w", "qd_x", "qd_y", "qd_z"),
                           ("e_w", "e_x", "e_y", "e_z")))
    checks.append((f"quaternion norms within 1e-9 at every logged step: worst {dev:.2e}",
                   dev <= 1e-9))
    verdict(8, "integrator and determinism", checks, info)
