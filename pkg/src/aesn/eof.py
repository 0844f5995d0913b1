"""Empirical orthogonal functions of a (time x location) field."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class EofBasis:
    """Time-mean per location, orthonormal spatial patterns and their singular values."""

    mean: np.ndarray
    basis: np.ndarray
    singular_values: np.ndarray

    @property
    def n_eof(self) -> int:
        return self.basis.shape[1]


def _svd(X: np.ndarray):
    mean = X.mean(axis=0)
    _, s, Vt = np.linalg.svd(X - mean, full_matrices=False)
    return mean, s, Vt.T


def compute_eofs(panel: np.ndarray, n_eof: int) -> EofBasis:
    """Leading ``n_eof`` EOFs of a ``T x n_s`` array, centered over time.

    Each pattern's largest-magnitude entry is made positive so results are
    reproducible despite the SVD sign ambiguity.
    """
    X = np.asarray(panel, dtype=float)
    T, n_s = X.shape
    if not 1 <= n_eof <= min(T, n_s):
        raise ConfigError(f"n_eof={n_eof} must lie in [1, {min(T, n_s)}]")
    mean, s, V = _svd(X)
    V = V[:, :n_eof].copy()
    pivot = np.abs(V).argmax(axis=0)
    V *= np.sign(V[pivot, np.arange(n_eof)])
    return EofBasis(mean=mean, basis=V, singular_values=s[:n_eof].copy())


def n_eof_for_variance(panel: np.ndarray, fraction: float = 0.9) -> int:
    """Smallest number of EOFs whose cumulative explained variance reaches ``fraction``."""
    if not 0 < fraction <= 1:
        raise ConfigError(f"variance fraction must be in (0, 1], got {fraction}")
    X = np.asarray(panel, dtype=float)
    _, s, _ = _svd(X)
    var = s ** 2
    total = var.sum()
    if total == 0:
        return 1
    cum = np.cumsum(var) / total
    k = int(np.searchsorted(cum, fraction - 1e-12) + 1)
    return min(k, min(X.shape))


def project(b: EofBasis, panel: np.ndarray) -> np.ndarray:
    """EOF coefficients, ``T x n_eof``."""
    X = np.asarray(panel, dtype=float)
    if X.ndim != 2 or X.shape[1] != b.basis.shape[0]:
        raise ValueError(f"panel has shape {X.shape}, basis expects {b.basis.shape[0]} locations")
    return (X - b.mean) @ b.basis


def reconstruct(b: EofBasis, coeffs: np.ndarray) -> np.ndarray:
    """Map coefficients back to a ``T x n_s`` field, restoring the mean."""
    C = np.asarray(coeffs, dtype=float)
    if C.ndim != 2 or C.shape[1] != b.n_eof:
        raise ValueError(f"coefficients have shape {C.shape}, basis has {b.n_eof} EOFs")
    return C @ b.basis.T + b.mean
