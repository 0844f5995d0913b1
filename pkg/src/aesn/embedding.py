"""Areal random representation of per-location input signals.

Each of ``K`` fixed random weight matrices ``U[k]`` (shape ``n_s x n_x``)
mixes a location's own input features into one number, and the resulting
length-``n_s`` vector is locally averaged with the normalized adjacency:

    z[k] = S @ (U[k] * x).sum(axis=1)

Stacking the ``K`` columns gives ``Z`` of shape ``n_s x K``; the reservoir
consumes its column-major flattening.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .graph import NormalizedAdjacency


@dataclass(frozen=True)
class ArealEmbedding:
    """Fixed, untrained embedding weights.

    Attributes:
        U: Array of shape ``(K, n_s, n_x)``; entries drawn from ``Uniform(-a_u, a_u)``.
        a_u: Scale of the uniform draw.
        seed: Seed the weights were drawn with (``None`` for hand-made weights).
    """

    U: np.ndarray
    a_u: float
    seed: int | None = None

    @property
    def K(self) -> int:
        return self.U.shape[0]

    @property
    def n_s(self) -> int:
        return self.U.shape[1]

    @property
    def n_x(self) -> int:
        return self.U.shape[2]


def sample_embedding(n_s: int, n_x: int, K: int, a_u: float, seed) -> ArealEmbedding:
    """Draw ``K`` dense, non-shared ``n_s x n_x`` weight matrices.

    ``seed`` is anything :func:`numpy.random.default_rng` accepts.
    """
    if K < 1:
        raise ConfigError(f"K must be >= 1, got {K}")
    if not a_u > 0:
        raise ConfigError(f"a_u must be positive, got {a_u}")
    rng = np.random.default_rng(seed)
    U = rng.uniform(-a_u, a_u, size=(K, n_s, n_x))
    # uniform() samples [lo, hi); the open lower end is hit with probability ~0
    # but is excluded explicitly so every entry lies strictly inside.
    U[U == -a_u] = 0.0
    U.setflags(write=False)
    return ArealEmbedding(U=U, a_u=float(a_u), seed=seed if isinstance(seed, (int, np.integer)) else None)


def embed(e: ArealEmbedding, S: NormalizedAdjacency, x: np.ndarray) -> np.ndarray:
    """Embed one time step's ``n_s x n_x`` input into ``Z`` of shape ``n_s x K``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape != (e.n_s, e.n_x):
        raise ValueError(f"input shape {x.shape} does not match embedding ({e.n_s}, {e.n_x})")
    if S.n_s != e.n_s:
        raise ValueError(f"adjacency has {S.n_s} nodes, embedding expects {e.n_s}")
    weighted = np.einsum("kij,ij->ik", e.U, x)
    return np.asarray(S @ weighted)


def embed_sequence(e: ArealEmbedding, S: NormalizedAdjacency, X: np.ndarray) -> np.ndarray:
    """Embed and vectorize a stack of inputs ``(T, n_s, n_x)`` into ``(T, n_s * K)``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 3 or X.shape[1:] != (e.n_s, e.n_x):
        raise ValueError(f"input stack shape {X.shape} does not match embedding ({e.n_s}, {e.n_x})")
    weighted = np.einsum("kij,tij->itk", e.U, X)  # (n_s, T, K)
    smoothed = np.asarray(S @ weighted.reshape(e.n_s, -1)).reshape(e.n_s, X.shape[0], e.K)
    # Column-major vec of each Z_t: feature k occupies entries k*n_s .. (k+1)*n_s - 1.
    return smoothed.transpose(1, 2, 0).reshape(X.shape[0], e.K * e.n_s)


def vectorize(Z: np.ndarray) -> np.ndarray:
    """Column-major flattening: all locations of column 0, then column 1, ..."""
    return np.asarray(Z).reshape(-1, order="F")


def unvectorize(z: np.ndarray, n_s: int) -> np.ndarray:
    return np.asarray(z).reshape(n_s, -1, order="F")
