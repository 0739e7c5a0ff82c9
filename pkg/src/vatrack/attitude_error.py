"""
Alignment errors between measured and desired body-frame reference vectors.

For inertial reference directions ``r_i`` with weights ``k_i``, the body
measures ``v_i = R^T r_i`` and the desired attitude predicts
``v_d,i = R_d^T r_i``.  From these the controller builds

* ``e_R = 1/2 sum k_i |v_i - v_d,i|^2``, the weighted alignment error,
* ``z = sum k_i v_i x v_d,i``, the weighted cross-product error,
* ``J = sum k_i S(v_d,i)^T S(v_i)``, which drives ``z``.

With the error quaternion ``e = q ⊗ q_d^-1`` and
``W = -sum k_i S(r_i)^2`` these satisfy ``e_R = 2 e_v^T W e_v`` and
``z = 2 R_d^T (e0 I - S(e_v)) W e_v``.  The eigenvectors of ``W`` locate the
three undesired equilibria ``e_j = [0, v_w,j]``.

Vector lists are ``(n, 3)`` arrays; weights are ``(n,)`` arrays.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .exceptions import CollinearReferences, NotUnitQuaternion
from .so3 import cross, matmul, quat_mul, skew

COLLINEAR_TOL = 1e-6
UNIT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ReferenceSet:
    """Known inertial unit vectors and their confidence weights."""

    vectors: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        r = np.array(self.vectors, dtype=float).reshape(-1, 3)
        k = np.array(self.weights, dtype=float).reshape(-1)
        if len(r) != len(k):
            raise ValueError(f"{len(r)} vectors but {len(k)} weights")
        if len(r) < 2:
            raise CollinearReferences("at least two reference vectors are required")
        if np.any(np.abs(np.linalg.norm(r, axis=1) - 1.0) > UNIT_TOL):
            raise ValueError("reference vectors must be unit norm")
        if np.any(k <= 0):
            raise ValueError("weights must be positive")
        if not has_noncollinear_pair(r):
            raise CollinearReferences("all reference vectors are collinear")
        r.setflags(write=False)
        k.setflags(write=False)
        object.__setattr__(self, "vectors", r)
        object.__setattr__(self, "weights", k)

    @property
    def n(self):
        return len(self.weights)

    @property
    def total_weight(self):
        return float(self.weights.sum())


def has_noncollinear_pair(vectors, tol=COLLINEAR_TOL):
    r = np.asarray(vectors, dtype=float)
    for i in range(len(r)):
        for j in range(i + 1, len(r)):
            if np.linalg.norm(np.cross(r[i], r[j])) > tol:
                return True
    return False


@njit(cache=True)
def _unit_cross(a, b):
    c = cross(a, b)
    return c / np.sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2])


def third_virtual_vector(r1, r2):
    """
    Unit vector ``r1 x r2 / |r1 x r2|``.

    Works equally for inertial references and body-frame measurements, since
    ``R^T (r1 x r2) = (R^T r1) x (R^T r2)``.
    """
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    if np.linalg.norm(np.cross(r1, r2)) <= COLLINEAR_TOL:
        raise CollinearReferences("cannot build a third vector from collinear inputs")
    return _unit_cross(r1, r2)


# ---------------------------------------------------------------------------
# W and its eigenstructure
# ---------------------------------------------------------------------------

def jacobi_eigh(a, tol=1e-15, max_sweeps=50):
    """
    Cyclic Jacobi eigen-decomposition of a small symmetric matrix.

    Returns eigenvalues sorted in descending order and the matching unit
    eigenvectors as columns.  Each eigenvector's sign is fixed so that its
    largest-magnitude component is positive.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    scale = max(np.abs(a).max(), 1.0)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for r in range(p + 1, n):
                if abs(a[p, r]) < 1e-300:
                    continue
                theta = (a[r, r] - a[p, p]) / (2.0 * a[p, r])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[r, r] = c
                rot[p, r] = s
                rot[r, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    vals = np.diag(a).copy()
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    v = v[:, order]
    for j in range(n):
        if v[np.argmax(np.abs(v[:, j])), j] < 0:
            v[:, j] = -v[:, j]
    return vals, v


@dataclass(frozen=True, eq=False)
class WMatrix:
    """``W = -sum k_i S(r_i)^2`` with eigenvalues ``l1 >= l2 >= l3 > 0``."""

    w: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns v_w,1..3

    def eigenvector(self, j):
        """Unit eigenvector ``v_w,j`` for ``j`` in 1..3."""
        return self.eigenvectors[:, j - 1]

    def eigenvalue(self, j):
        return float(self.eigenvalues[j - 1])


def build_w(refs):
    w = np.zeros((3, 3))
    for r, k in zip(refs.vectors, refs.weights):
        S = skew(r)
        w -= k * (S @ S)
    w = 0.5 * (w + w.T)
    vals, vecs = jacobi_eigh(w)
    if vals[-1] <= 0.0:
        raise CollinearReferences("W is not positive definite")
    return WMatrix(w, vals, vecs)


# ---------------------------------------------------------------------------
# Error variables
# ---------------------------------------------------------------------------

def _check_lengths(k, v, v_d):
    if not (len(k) == len(v) == len(v_d)):
        raise ValueError("weight and vector arrays differ in length")


@njit(cache=True)
def _e_r(k, v, v_d):
    out = 0.0
    for i in range(k.shape[0]):
        d = v[i] - v_d[i]
        out += 0.5 * k[i] * (d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
    return out


@njit(cache=True)
def _z_vec(k, v, v_d):
    z = np.zeros(3)
    for i in range(k.shape[0]):
        z += k[i] * cross(v[i], v_d[i])
    return z


@njit(cache=True)
def _j_matrix(k, v, v_d):
    J = np.zeros((3, 3))
    for i in range(k.shape[0]):
        J += k[i] * matmul(skew(v_d[i]).T, skew(v[i]))
    return J


@njit(cache=True)
def _k_o_matrix(k, v, lam):
    K = np.zeros((3, 3))
    for i in range(k.shape[0]):
        S = skew(v[i])
        K += k[i] * matmul(matmul(S.T, lam[i]), S)
    return K


def e_r(k, v, v_d):
    """Weighted alignment error ``1/2 sum k_i |v_i - v_d,i|^2``."""
    k, v, v_d = _as_arrays(k, v, v_d)
    return _e_r(k, v, v_d)


def z_vec(k, v, v_d):
    """Weighted cross-product error ``sum k_i v_i x v_d,i``."""
    k, v, v_d = _as_arrays(k, v, v_d)
    return _z_vec(k, v, v_d)


def j_matrix(k, v, v_d):
    """``J = sum k_i S(v_d,i)^T S(v_i)``; ``dz/dt = J (w - w_d) + S(z) w_d``."""
    k, v, v_d = _as_arrays(k, v, v_d)
    return _j_matrix(k, v, v_d)


def k_o_matrix(k, v, lam):
    """``K_o = sum k_i S(v_i)^T Lambda_i S(v_i)``; positive definite iff two v_i are noncollinear."""
    k = np.asarray(k, dtype=float)
    v = np.asarray(v, dtype=float).reshape(-1, 3)
    lam = np.asarray(lam, dtype=float).reshape(-1, 3, 3)
    return _k_o_matrix(k, v, lam)


def _as_arrays(k, v, v_d):
    k = np.asarray(k, dtype=float).reshape(-1)
    v = np.asarray(v, dtype=float).reshape(-1, 3)
    v_d = np.asarray(v_d, dtype=float).reshape(-1, 3)
    _check_lengths(k, v, v_d)
    return k, v, v_d


def e_r_from_quat(W, e):
    """``2 e_v^T W e_v`` for the error quaternion ``e``."""
    w = W.w if isinstance(W, WMatrix) else np.asarray(W)
    ev = np.asarray(e, dtype=float)[1:]
    return 2.0 * ev @ w @ ev


def z_from_quat(W, e, R_d):
    """``2 R_d^T (e0 I - S(e_v)) W e_v``."""
    w = W.w if isinstance(W, WMatrix) else np.asarray(W)
    e = np.asarray(e, dtype=float)
    ev = e[1:]
    return 2.0 * np.asarray(R_d).T @ ((e[0] * np.eye(3) - skew(ev)) @ (w @ ev))


# ---------------------------------------------------------------------------
# Undesired equilibria
# ---------------------------------------------------------------------------

def beta_bound(W, alpha1, eps):
    """
    Smallest ``beta`` certified by the small-rotation worst case:
    ``2 l1 alpha1 / (eps^2 l3^2)``.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    l1, l3 = W.eigenvalues[0], W.eigenvalues[2]
    return 2.0 * l1 * alpha1 / (eps ** 2 * l3 ** 2)


def undesired_equilibrium(W, j, eps=0.0):
    """
    Undesired equilibrium ``e_j = [0, v_w,j]`` rotated by ``eps`` about its own axis.

    Returns ``e_j ⊗ [sqrt(1 - eps^2), eps v_w,j] = [-eps, sqrt(1 - eps^2) v_w,j]``.
    """
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must lie in [0, 1)")
    vw = W.eigenvector(j)
    e_j = np.concatenate(([0.0], vw))
    delta = np.concatenate(([np.sqrt(1.0 - eps ** 2)], eps * vw))
    return quat_mul(e_j, delta)


def in_undesired_ball(e, W, eps=0.1, radius=None):
    """
    True if ``e`` (or ``-e``) lies in one of the balls ``B_j`` around ``e_j``.

    Membership: ``e0 in [-eps, 0]`` and ``|e_v - sqrt(1 - e0^2) (±v_w,j)| < radius``
    for some ``j``.  ``radius`` defaults to ``eps``.
    """
    radius = eps if radius is None else radius
    e = np.asarray(e, dtype=float)
    if abs(np.linalg.norm(e) - 1.0) > 1e-6:
        raise NotUnitQuaternion("ball membership expects a unit quaternion")
    for s in (1.0, -1.0):
        e0, ev = s * e[0], s * e[1:]
        if not -eps <= e0 <= 0.0:
            continue
        scale = np.sqrt(max(1.0 - e0 * e0, 0.0))
        for j in (1, 2, 3):
            vw = W.eigenvector(j)
            for sign in (1.0, -1.0):
                if np.linalg.norm(ev - scale * sign * vw) < radius:
                    return True
    return False
