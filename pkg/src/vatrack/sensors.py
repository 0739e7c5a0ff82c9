"""
Noisy vector and gyro measurement models with a first-order measurement filter.

Noise model (per sample):

* vectors: ``v_m = (v + m_v nu_bar) / |v + m_v nu_bar|`` with ``nu_bar`` a
  uniformly random direction (normalized standard Gaussian) and
  ``m_v ~ U[0, m_v_max]``;
* gyro: ``w_m = w + m_w nu_w + b`` with ``nu_w`` standard Gaussian and
  ``m_w ~ U[0, m_w_max]``.

In closed-loop runs, noise is drawn once per integrator step and held over
the four RK4 stages (see :func:`draw_noise`).
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .exceptions import InvalidGain
from .so3 import rodrigues


@dataclass(frozen=True)
class SensorConfig:
    bias: tuple = (0.0, 0.0, 0.0)
    bias_bound: float = 1.0
    vector_noise: bool = False
    gyro_noise: bool = False
    vector_noise_max: float = 0.1
    gyro_noise_max: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if np.linalg.norm(self.bias) > self.bias_bound:
            raise InvalidGain("bias", "|b| exceeds the declared bias bound")
        if self.vector_noise_max < 0:
            raise InvalidGain("vector_noise_max", "must be non-negative")
        if self.gyro_noise_max < 0:
            raise InvalidGain("gyro_noise_max", "must be non-negative")


@dataclass
class NoiseSamples:
    """Pre-drawn noise, one row per integrator step (plus the final sample)."""

    directions: np.ndarray  # (N, n, 3) unit directions
    vector_mag: np.ndarray  # (N, n)
    gyro: np.ndarray        # (N, 3) additive gyro noise m_w * nu_w
    vector_on: bool = False


def draw_noise(cfg, n_vectors, n_samples, rng=None):
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    dirs = np.zeros((n_samples, n_vectors, 3))
    dirs[..., 0] = 1.0
    mags = np.zeros((n_samples, n_vectors))
    gyro = np.zeros((n_samples, 3))
    if cfg.vector_noise:
        nu = rng.standard_normal((n_samples, n_vectors, 3))
        dirs = nu / np.linalg.norm(nu, axis=2, keepdims=True)
        mags = rng.uniform(0.0, cfg.vector_noise_max, (n_samples, n_vectors))
    if cfg.gyro_noise:
        nu_w = rng.standard_normal((n_samples, 3))
        m_w = rng.uniform(0.0, cfg.gyro_noise_max, (n_samples, 1))
        gyro = m_w * nu_w
    return NoiseSamples(dirs, mags, gyro, cfg.vector_noise)


@njit(cache=True)
def perturb_vector(v, direction, magnitude):
    p = v + magnitude * direction
    return p / np.sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2])


def measure_vectors(q, refs, cfg, rng=None):
    """Body-frame measurements ``R(q)^T r_i``, corrupted if vector noise is enabled."""
    R = rodrigues(np.asarray(q, dtype=float))
    v = refs.vectors @ R  # rows: R^T r_i
    if not cfg.vector_noise:
        return v
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    nu = rng.standard_normal((len(v), 3))
    nu /= np.linalg.norm(nu, axis=1, keepdims=True)
    m_v = rng.uniform(0.0, cfg.vector_noise_max, len(v))
    return np.array([perturb_vector(v[i], nu[i], m_v[i]) for i in range(len(v))])


def measure_gyro(omega, cfg, rng=None):
    """Biased (and optionally noisy) gyro reading ``w + b [+ m_w nu_w]``."""
    out = np.asarray(omega, dtype=float) + np.asarray(cfg.bias, dtype=float)
    if cfg.gyro_noise:
        rng = np.random.default_rng(cfg.seed) if rng is None else rng
        out = out + rng.uniform(0.0, cfg.gyro_noise_max) * rng.standard_normal(3)
    return out


@njit(cache=True)
def filter_derivative(gamma_f, v, v_f):
    """First-order filter ``dv_f/dt = gamma_f (v - v_f)`` applied row-wise."""
    return gamma_f * (v - v_f)
