"""Independent reference computations used by several test modules."""

import numpy as np
from scipy.linalg import sqrtm

PAULI = [np.array([[0, 1], [1, 0]], dtype=complex), np.array([[0, -1j], [1j, 0]]),
         np.array([[1, 0], [0, -1]], dtype=complex)]


def density(bloch):
    return 0.5 * (np.eye(2) + sum(b * p for b, p in zip(bloch, PAULI)))


def uhlmann_sqrtm(a, b) -> float:
    """Root fidelity tr sqrt(sqrt(rho) sigma sqrt(rho)) via matrix square roots."""
    r = sqrtm(density(a))
    return float(np.real(np.trace(sqrtm(r @ density(b) @ r))))


def random_bloch(rng, pure=False):
    v = rng.standard_normal(3)
    v /= np.linalg.norm(v)
    return v if pure else v * rng.random() ** (1 / 3)


def random_column_stochastic(rng, k, n, size):
    """``size`` random k-outcome measurements on an n-outcome simplex."""
    M = rng.gamma(0.3, size=(size, k, n))
    return M / M.sum(axis=1, keepdims=True)


def bhattacharyya(p, q):
    return np.sqrt(np.clip(p, 0, None) * np.clip(q, 0, None)).sum(axis=-1)
