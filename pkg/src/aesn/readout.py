"""Ridge-regression readout.

Minimizes ``sum_t ||y_t - W h_t||^2 + tau * ||W||_F^2`` whose unique
minimizer for ``tau > 0`` is ``W = Y H^T (H H^T + tau I)^{-1}``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import NumericalError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Readout:
    W_out: np.ndarray
    tau: float
    sigma2: float = 0.0
    intercept: bool = False

    @property
    def n_h(self) -> int:
        return self.W_out.shape[1] - int(self.intercept)

    def design(self, H: np.ndarray) -> np.ndarray:
        return augment(H) if self.intercept else H


def augment(H: np.ndarray) -> np.ndarray:
    """Append the constant-one row used as intercept."""
    H = np.asarray(H, dtype=float)
    return np.vstack([H, np.ones((1, H.shape[1]))])


def _spd_solve(G: np.ndarray, B: np.ndarray, allow_jitter: bool) -> np.ndarray:
    """Solve ``G X = B`` for symmetric positive definite ``G`` by Cholesky."""
    try:
        return linalg.cho_solve(linalg.cho_factor(G, lower=True), B)
    except linalg.LinAlgError:
        if not allow_jitter:
            raise NumericalError("normal equations are singular; use tau > 0") from None
    jitter = 1e-12 * np.trace(G) / G.shape[0]
    logger.warning("Cholesky failed, retrying with jitter %.3g", jitter)
    try:
        return linalg.cho_solve(linalg.cho_factor(G + jitter * np.eye(G.shape[0]), lower=True), B)
    except linalg.LinAlgError:
        raise NumericalError("normal equations are not positive definite") from None


def fit_ridge(H: np.ndarray, Y: np.ndarray, tau: float, intercept: bool = False) -> Readout:
    """Fit ``W_out`` from states ``H`` (``n_h x T``) to targets ``Y`` (``n_y x T``).

    When ``tau > 0`` and there are fewer time steps than states, the
    equivalent ``T x T`` system ``W = Y (H^T H + tau I)^{-1} H^T`` is solved
    instead; both are SPD and share the same minimizer.
    """
    H = np.asarray(H, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if H.ndim != 2 or Y.ndim != 2 or H.shape[1] != Y.shape[1]:
        raise ValueError(f"H {H.shape} and Y {Y.shape} must be 2-D with equal column counts")
    if H.shape[1] < 1:
        raise ValueError("need at least one time step")
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    if not (np.all(np.isfinite(H)) and np.all(np.isfinite(Y))):
        raise NumericalError("non-finite entries in ridge inputs")

    X = augment(H) if intercept else H
    n, T = X.shape
    if tau > 0 and T < n:
        G = X.T @ X + tau * np.eye(T)
        W = _spd_solve(G, Y.T, allow_jitter=True).T @ X.T
    else:
        G = X @ X.T + tau * np.eye(n)
        W = _spd_solve(G, X @ Y.T, allow_jitter=tau > 0).T
    resid = Y - W @ X
    return Readout(W_out=W, tau=float(tau), sigma2=float(np.mean(resid ** 2)), intercept=intercept)


def predict(r: Readout, h: np.ndarray) -> np.ndarray:
    """Point prediction for one state vector (or a ``n_h x T`` block)."""
    h = np.asarray(h, dtype=float)
    if h.shape[0] != r.n_h:
        raise ValueError(f"state has length {h.shape[0]}, readout expects {r.n_h}")
    if r.intercept:
        return r.W_out[:, :-1] @ h + (r.W_out[:, -1] if h.ndim == 1 else r.W_out[:, -1:])
    return r.W_out @ h


def residual_variance(H: np.ndarray, Y: np.ndarray, r: Readout) -> float:
    """Mean squared residual over every output and time step."""
    resid = np.asarray(Y, dtype=float) - predict(r, H)
    return float(np.mean(resid ** 2))
