"""
Quaternion and rotation-matrix algebra.

Conventions
-----------
Quaternions are scalar-first Hamilton quaternions ``q = [q0, qx, qy, qz]``.
``rodrigues(q)`` returns the rotation matrix ``R`` taking body-frame
coordinates to inertial coordinates, so that ``rodrigues(p ⊗ q) =
rodrigues(p) @ rodrigues(q)``.  Rotation matrices are always derived from
quaternions; they are never integrated directly.

All functions here are compiled with numba and work on float64 arrays.
"""

import numpy as np
from numba import njit

from .exceptions import NotUnitQuaternion, ZeroQuaternion

UNIT_TOL = 1e-6
IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


@njit(cache=True)
def skew(u):
    """Cross-product matrix: ``skew(u) @ v == np.cross(u, v)``."""
    return np.array([[0.0, -u[2], u[1]],
                     [u[2], 0.0, -u[0]],
                     [-u[1], u[0], 0.0]])


@njit(cache=True)
def cross(u, v):
    return np.array([u[1] * v[2] - u[2] * v[1],
                     u[2] * v[0] - u[0] * v[2],
                     u[0] * v[1] - u[1] * v[0]])


@njit(cache=True)
def quat_mul(p, q):
    """Hamilton product ``p ⊗ q``."""
    p0, p1, p2, p3 = p[0], p[1], p[2], p[3]
    q0, q1, q2, q3 = q[0], q[1], q[2], q[3]
    return np.array([p0 * q0 - p1 * q1 - p2 * q2 - p3 * q3,
                     p0 * q1 + p1 * q0 + p2 * q3 - p3 * q2,
                     p0 * q2 - p1 * q3 + p2 * q0 + p3 * q1,
                     p0 * q3 + p1 * q2 - p2 * q1 + p3 * q0])


@njit(cache=True)
def quat_conj(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


@njit(cache=True)
def quat_normalize(q):
    n = np.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    if n == 0.0:
        raise ZeroQuaternion("cannot normalize the zero quaternion")
    return q / n


@njit(cache=True)
def rodrigues(q):
    """
    Rotation matrix of a unit quaternion, ``I + 2 q0 S(qv) + 2 S(qv)^2``.

    Raises
    ------
    NotUnitQuaternion
        If ``| ||q|| - 1 | > 1e-6``.
    """
    n = np.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    if abs(n - 1.0) > UNIT_TOL:
        raise NotUnitQuaternion("rodrigues expects a unit quaternion")
    w, x, y, z = q[0], q[1], q[2], q[3]
    return np.array([
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ])


@njit(cache=True)
def quat_kinematics(q, omega):
    """Quaternion rate ``0.5 * q ⊗ [0, omega]`` for body-frame angular velocity."""
    w = np.array([0.0, omega[0], omega[1], omega[2]])
    return 0.5 * quat_mul(q, w)


# Small dense products written out as loops: numba's ``@`` dispatches to BLAS,
# which is slow for 3x3 operands and needs SciPy at run time.

@njit(cache=True)
def dot(a, b):
    out = 0.0
    for i in range(a.shape[0]):
        out += a[i] * b[i]
    return out


@njit(cache=True)
def matvec(A, x):
    out = np.zeros(A.shape[0])
    for i in range(A.shape[0]):
        for j in range(A.shape[1]):
            out[i] += A[i, j] * x[j]
    return out


@njit(cache=True)
def tmatvec(A, x):
    """``A^T x``."""
    out = np.zeros(A.shape[1])
    for i in range(A.shape[0]):
        for j in range(A.shape[1]):
            out[j] += A[i, j] * x[i]
    return out


@njit(cache=True)
def matmul(A, B):
    out = np.zeros((A.shape[0], B.shape[1]))
    for i in range(A.shape[0]):
        for k in range(A.shape[1]):
            a = A[i, k]
            for j in range(B.shape[1]):
                out[i, j] += a * B[k, j]
    return out


@njit(cache=True)
def solve3(A, b):
    """Solve the 3x3 system ``A x = b`` by Cramer's rule (no LAPACK needed)."""
    c0 = np.array([A[1, 1] * A[2, 2] - A[1, 2] * A[2, 1],
                   A[1, 2] * A[2, 0] - A[1, 0] * A[2, 2],
                   A[1, 0] * A[2, 1] - A[1, 1] * A[2, 0]])
    det = A[0, 0] * c0[0] + A[0, 1] * c0[1] + A[0, 2] * c0[2]
    x = np.empty(3)
    for col in range(3):
        B = A.copy()
        B[:, col] = b
        x[col] = (B[0, 0] * (B[1, 1] * B[2, 2] - B[1, 2] * B[2, 1])
                  - B[0, 1] * (B[1, 0] * B[2, 2] - B[1, 2] * B[2, 0])
                  + B[0, 2] * (B[1, 0] * B[2, 1] - B[1, 1] * B[2, 0])) / det
    return x


@njit(cache=True)
def sym3_eigvalsh(A):
    """Ascending eigenvalues of a symmetric 3x3 matrix (closed-form trigonometric solution)."""
    p1 = A[0, 1] ** 2 + A[0, 2] ** 2 + A[1, 2] ** 2
    q = (A[0, 0] + A[1, 1] + A[2, 2]) / 3.0
    out = np.empty(3)
    if p1 == 0.0:
        out[0], out[1], out[2] = A[0, 0], A[1, 1], A[2, 2]
        out.sort()
        return out
    p2 = (A[0, 0] - q) ** 2 + (A[1, 1] - q) ** 2 + (A[2, 2] - q) ** 2 + 2.0 * p1
    p = np.sqrt(p2 / 6.0)
    B = (A - q * np.eye(3)) / p
    r = 0.5 * (B[0, 0] * (B[1, 1] * B[2, 2] - B[1, 2] * B[2, 1])
               - B[0, 1] * (B[1, 0] * B[2, 2] - B[1, 2] * B[2, 0])
               + B[0, 2] * (B[1, 0] * B[2, 1] - B[1, 1] * B[2, 0]))
    r = min(max(r, -1.0), 1.0)
    phi = np.arccos(r) / 3.0
    hi = q + 2.0 * p * np.cos(phi)
    lo = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    out[0], out[1], out[2] = lo, 3.0 * q - hi - lo, hi
    return out


@njit(cache=True)
def spectral_norm3(A):
    """Largest singular value of a 3x3 matrix."""
    return np.sqrt(max(sym3_eigvalsh(matmul(A.T, A))[2], 0.0))


def quat_from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return np.concatenate(([np.cos(angle / 2)], np.sin(angle / 2) * axis))


def random_unit_quaternions(rng, n):
    """Draw ``n`` quaternions uniformly (Haar) on S^3 by normalizing 4-D Gaussians."""
    g = rng.standard_normal((n, 4))
    return g / np.linalg.norm(g, axis=1, keepdims=True)
