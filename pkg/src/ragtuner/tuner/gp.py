"""Gaussian-process surrogate with a squared-exponential kernel.

Targets are standardized before fitting. Kernel hyper-parameters are picked
by maximizing the log marginal likelihood over a small fixed grid, which
keeps fits deterministic and cheap at tuning-trace sizes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular

from ..errors import DegenerateInputs

LENGTHSCALES = (0.1, 0.2, 0.5, 1.0, 2.0)
SIGNALS = (0.5, 1.0, 2.0)
JITTER = 1e-6
STD_FLOOR = 1e-12


def se_kernel(a: np.ndarray, b: np.ndarray, lengthscale, signal: float) -> np.ndarray:
    """sigma_f^2 * exp(-sum_d (a_d - b_d)^2 / (2 l_d^2)); ``lengthscale`` may be per-dimension."""
    ls = np.broadcast_to(np.asarray(lengthscale, dtype=np.float64), (a.shape[1],))
    d2 = (((a[:, None, :] - b[None, :, :]) / ls) ** 2).sum(-1)
    return signal**2 * np.exp(-0.5 * d2)


@dataclass
class GpSurrogate:
    X: np.ndarray
    y_mean: float
    y_std: float
    z: np.ndarray
    lengthscales: np.ndarray
    signal: float
    chol: np.ndarray
    alpha: np.ndarray
    log_likelihood: float

    def predict_standardized(self, Xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and standard deviation in standardized target units."""
        Xs = np.atleast_2d(np.asarray(Xs, dtype=np.float64))
        ks = se_kernel(Xs, self.X, self.lengthscales, self.signal)
        mean = ks @ self.alpha
        v = solve_triangular(self.chol, ks.T, lower=True)
        var = np.maximum(self.signal**2 - (v * v).sum(0), 0.0)
        return mean, np.sqrt(var)

    def predict(self, Xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and standard deviation in the original units."""
        mean, std = self.predict_standardized(Xs)
        return self.y_mean + self.y_std * mean, self.y_std * std

    def standardize(self, y: float) -> float:
        return (y - self.y_mean) / self.y_std


def _fit_one(X: np.ndarray, z: np.ndarray, lengthscale: float, signal: float):
    K = se_kernel(X, X, lengthscale, signal) + JITTER * np.eye(len(X))
    L = cholesky(K, lower=True)
    alpha = solve_triangular(L.T, solve_triangular(L, z, lower=True), lower=False)
    lml = -0.5 * float(z @ alpha) - float(np.log(np.diag(L)).sum()) - 0.5 * len(X) * math.log(2 * math.pi)
    return lml, L, alpha


def gp_fit(X, y) -> GpSurrogate:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] < 1 or X.shape[0] != y.shape[0]:
        raise DegenerateInputs("need at least one observation and matching X/y lengths")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise DegenerateInputs("inputs must be finite")
    y_mean = float(y.mean())
    y_std = max(float(y.std()), STD_FLOOR)
    z = (y - y_mean) / y_std

    best = None
    for ls, sf in itertools.product(LENGTHSCALES, SIGNALS):
        try:
            lml, L, alpha = _fit_one(X, z, ls, sf)
        except LinAlgError:
            continue
        if best is None or lml > best[0]:
            best = (lml, L, alpha, ls, sf)
    if best is None:
        raise DegenerateInputs("kernel matrix is not positive definite for any grid setting")
    lml, L, alpha, ls, sf = best
    return GpSurrogate(X, y_mean, y_std, z, np.full(X.shape[1], ls), sf, L, alpha, lml)
