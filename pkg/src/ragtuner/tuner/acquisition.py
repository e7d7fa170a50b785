"""Expected Improvement (maximization form)."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr

SIGMA_EPS = 1e-12
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def expected_improvement(mu: float, sigma: float, best: float, xi: float = 0.0) -> float:
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    gain = mu - best - xi
    if sigma < SIGMA_EPS:
        return max(0.0, gain)
    z = gain / sigma
    return max(0.0, gain * float(ndtr(z)) + sigma * _INV_SQRT_2PI * math.exp(-0.5 * z * z))


def expected_improvement_vec(mu: np.ndarray, sigma: np.ndarray, best: float, xi: float = 0.0) -> np.ndarray:
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    gain = mu - best - xi
    small = sigma < SIGMA_EPS
    safe = np.where(small, 1.0, sigma)
    z = gain / safe
    ei = gain * ndtr(z) + safe * _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    return np.maximum(0.0, np.where(small, gain, ei))
