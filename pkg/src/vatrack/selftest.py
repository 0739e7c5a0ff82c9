"""
Fast invariant checks run by ``vatrack selftest``.

Each check draws random inputs from a fixed seed and returns
``(name, passed, worst residual)``.  Nothing here integrates a closed loop,
so the whole suite finishes in a few seconds.
"""

import numpy as np

from .attitude_error import (ReferenceSet, build_w, e_r, e_r_from_quat, j_matrix, z_from_quat,
                             z_vec)
from .control import f1, regressor
from .plant import inertia_matrix
from .so3 import quat_conj, quat_mul, random_unit_quaternions, rodrigues, skew


def _random_refs(rng, n=3):
    r = rng.standard_normal((n, 3))
    r /= np.linalg.norm(r, axis=1, keepdims=True)
    return ReferenceSet(r, rng.uniform(0.05, 1.0, n))


def check_so3(rng, samples=1000):
    worst = 0.0
    for _ in range(samples):
        u, v = rng.standard_normal((2, 3))
        p, q, s = random_unit_quaternions(rng, 3)
        R = rodrigues(q)
        worst = max(worst,
                    np.abs(skew(u) @ v + skew(v) @ u).max(),
                    np.abs(R.T @ R - np.eye(3)).max(),
                    np.abs(rodrigues(q) - rodrigues(-q)).max(),
                    np.abs(rodrigues(quat_mul(p, q)) - rodrigues(p) @ R).max(),
                    np.abs(quat_mul(quat_mul(p, q), s) - quat_mul(p, quat_mul(q, s))).max())
    return "so3 algebra", worst < 1e-12, worst


def check_error_identities(rng, samples=1000):
    worst = 0.0
    for _ in range(samples):
        refs = _random_refs(rng)
        W = build_w(refs)
        q, q_d = random_unit_quaternions(rng, 2)
        R, R_d = rodrigues(q), rodrigues(q_d)
        v, v_d = refs.vectors @ R, refs.vectors @ R_d
        e = quat_mul(q, quat_conj(q_d))
        k = refs.weights
        er = e_r(k, v, v_d)
        er_inner = float(np.sum(k * (1.0 - np.einsum("ij,ij->i", v, v_d))))
        ev = e[1:]
        z = z_vec(k, v, v_d)
        sum_k = k.sum()
        J = j_matrix(k, v, v_d)
        worst = max(worst,
                    abs(er - e_r_from_quat(W, e)),
                    abs(er - er_inner),
                    np.abs(z - z_from_quat(W, e, R_d)).max(),
                    abs(0.5 * z @ z - 2.0 * ev @ W.w @ W.w @ ev + 2.0 * (ev @ W.w @ ev) ** 2),
                    max(np.linalg.norm(J, 2) - sum_k, 0.0))
    return "attitude error identities", worst < 1e-10, worst


def check_regressor(rng, samples=100):
    worst = 0.0
    for _ in range(samples):
        w, h = rng.standard_normal((2, 3))
        theta = rng.standard_normal(6)
        M = inertia_matrix(theta)
        lhs = regressor(w, h) @ theta
        rhs = np.cross(w, M @ w) + M @ h
        scale = max(np.linalg.norm(rhs), 1.0)
        worst = max(worst, np.linalg.norm(lhs - rhs) / scale,
                    np.linalg.norm(f1(h) @ theta - M @ h) / scale)
    return "regressor factorization", worst < 1e-12, worst


CHECKS = (check_so3, check_error_identities, check_regressor)


def run_selftest(seed=0):
    rng = np.random.default_rng(seed)
    return [check(rng) for check in CHECKS]
