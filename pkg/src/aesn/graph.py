"""Areal proximity graphs and the self-loop normalized adjacency operator.

The operator built here is ``S = D^{-1/2} (A + I) D^{-1/2}`` where ``D`` is
the degree matrix of ``A + I``.  Adding the self-loops before normalizing
means an isolated region keeps its own value (row of ``S`` equals the
identity row) instead of producing a division by zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from .errors import ConvergenceError, DataError

#: Above this many regions ``S`` is stored as CSR; below it a dense array is faster.
DENSE_LIMIT = 64

#: Krylov subspace size for ARPACK.  The scipy default (20) stalls on random
#: reservoirs whose leading complex pairs are nearly tied in modulus.
ARNOLDI_NCV = 60


@dataclass(frozen=True)
class Graph:
    """Undirected, unweighted proximity structure over ``n_s`` areal units.

    Attributes:
        n_s: Number of areal units.
        edges: Sorted tuple of unique pairs ``(i, j)`` with ``i < j``.
    """

    n_s: int
    edges: tuple[tuple[int, int], ...] = ()
    _adjacency: sparse.csr_matrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_s < 1:
            raise DataError(f"graph needs at least one node, got n_s={self.n_s}")
        rows = np.fromiter((i for i, _ in self.edges), dtype=np.int64, count=len(self.edges))
        cols = np.fromiter((j for _, j in self.edges), dtype=np.int64, count=len(self.edges))
        r = np.concatenate([rows, cols])
        c = np.concatenate([cols, rows])
        A = sparse.csr_matrix((np.ones(r.size), (r, c)), shape=(self.n_s, self.n_s))
        object.__setattr__(self, "_adjacency", A)

    @property
    def A(self) -> sparse.csr_matrix:
        """Binary symmetric adjacency with zero diagonal (CSR)."""
        return self._adjacency

    def degree(self) -> np.ndarray:
        return np.asarray(self._adjacency.sum(axis=1)).ravel()

    def neighbors(self, i: int) -> np.ndarray:
        A = self._adjacency
        return A.indices[A.indptr[i]:A.indptr[i + 1]].copy()

    def permute(self, order: Sequence[int]) -> "Graph":
        """Relabel nodes so that new node ``i`` is old node ``order[i]``.

        Mirrors array indexing: ``S(g.permute(order)) == S(g)[order][:, order]``.
        """
        order = np.asarray(order)
        if sorted(order.tolist()) != list(range(self.n_s)):
            raise DataError("order must be a permutation of range(n_s)")
        new_label = np.empty(self.n_s, dtype=np.int64)
        new_label[order] = np.arange(self.n_s)
        return from_edge_list([(int(new_label[i]), int(new_label[j])) for i, j in self.edges], self.n_s)


def from_edge_list(edges: Iterable[tuple[int, int]], n_s: int) -> Graph:
    """Build a :class:`Graph` from (possibly duplicated, either-direction) pairs.

    Raises:
        DataError: if an index falls outside ``[0, n_s)`` or a self-loop is given.
            Self-loops are added internally by :func:`normalized_adjacency`.
    """
    seen = set()
    for i, j in edges:
        i, j = int(i), int(j)
        if not (0 <= i < n_s and 0 <= j < n_s):
            raise DataError(f"edge ({i}, {j}) out of range for n_s={n_s}")
        if i == j:
            raise DataError(f"self-loop ({i}, {i}) in edge list")
        seen.add((min(i, j), max(i, j)))
    return Graph(n_s=int(n_s), edges=tuple(sorted(seen)))


def lattice_graph(rows: int, cols: int) -> Graph:
    """Rook-contiguity lattice; node ``r * cols + c`` sits at grid cell ``(r, c)``."""
    edges = []
    for r in range(rows):
        for c in range(cols):
            k = r * cols + c
            if c + 1 < cols:
                edges.append((k, k + 1))
            if r + 1 < rows:
                edges.append((k, k + cols))
    return from_edge_list(edges, rows * cols)


@dataclass(frozen=True)
class NormalizedAdjacency:
    """Symmetric operator ``S``; dense ``ndarray`` or CSR depending on size."""

    S: np.ndarray | sparse.csr_matrix

    @property
    def n_s(self) -> int:
        return self.S.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sparse.issparse(self.S)

    def toarray(self) -> np.ndarray:
        return self.S.toarray() if self.is_sparse else np.array(self.S)

    def __matmul__(self, other):
        return self.S @ other


def normalized_adjacency(g: Graph, dense_limit: int = DENSE_LIMIT) -> NormalizedAdjacency:
    """Return ``S = D^{-1/2} (A + I) D^{-1/2}`` for graph ``g``."""
    dinv = 1.0 / np.sqrt(g.degree() + 1.0)
    At = (g.A + sparse.identity(g.n_s, format="csr")).tocoo()
    # dinv[i] * dinv[j] commutes exactly, so S is bitwise symmetric.
    data = dinv[At.row] * dinv[At.col]
    S = sparse.csr_matrix((data, (At.row, At.col)), shape=(g.n_s, g.n_s))
    if g.n_s <= dense_limit:
        return NormalizedAdjacency(S.toarray())
    return NormalizedAdjacency(S)


def spectral_radius(
    M, tol: float = 1e-10, max_iter: int = 10_000, block: int = 8, method: str = "power"
) -> float:
    """Largest eigenvalue modulus of a square matrix.

    ``method="power"`` (default) runs block power (subspace) iteration;
    ``method="arnoldi"`` uses ARPACK's implicitly restarted Arnoldi from the
    same normalized all-ones start vector, which needs far fewer matrix
    products on large non-normal matrices such as reservoirs.

    A small block of vectors is iterated and the dominant eigenvalue is read
    from the Ritz values of the projected ``block x block`` problem.  Unlike a
    single power vector this resolves a dominant complex-conjugate pair
    (typical for random non-symmetric reservoirs) or a ``+/-`` real pair, and
    it converges at rate ``|lambda_{block+1} / lambda_1|``.  The start block is
    fixed (column 0 is the normalized all-ones vector, the others are cosine
    modes), so the result is deterministic.

    Args:
        M: Square dense array or scipy sparse matrix.
        tol: Relative tolerance on the residual of the dominant Ritz pair.
        max_iter: Iteration budget.
        block: Number of iterated vectors (capped at the matrix size).
        method: ``"power"`` or ``"arnoldi"``.

    Raises:
        ConvergenceError: if the residual test is not met within ``max_iter``.
    """
    shape = M.shape
    if len(shape) != 2 or shape[0] != shape[1]:
        raise ValueError(f"spectral_radius needs a square matrix, got shape {shape}")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    n = shape[0]
    if method == "arnoldi":
        return _arnoldi_radius(M, tol, max_iter)
    if method != "power":
        raise ValueError(f"unknown method {method!r}")
    k = max(1, min(block, n))
    i = np.arange(n)[:, None] + 0.5
    V = np.cos(np.pi * i * np.arange(k)[None, :] / n)
    Q, _ = np.linalg.qr(V)
    for _ in range(max_iter):
        W = np.asarray(M @ Q)
        B = Q.T @ W
        theta, Y = np.linalg.eig(B)
        j = int(np.argmax(np.abs(theta)))
        lam = abs(theta[j])
        resid = W @ Y[:, j] - theta[j] * (Q @ Y[:, j])
        if np.linalg.norm(resid) <= tol * lam:
            return float(lam)
        Q, _ = np.linalg.qr(W)
    raise ConvergenceError(f"spectral_radius did not converge in {max_iter} iterations")


def _arnoldi_radius(M, tol: float, max_iter: int) -> float:
    n = M.shape[0]
    if n < 3:
        A = M.toarray() if sparse.issparse(M) else np.asarray(M, dtype=float)
        return float(np.max(np.abs(np.linalg.eigvals(A)))) if n else 0.0
    if sparse.issparse(M) and M.nnz == 0 or not sparse.issparse(M) and not np.any(M):
        return 0.0
    try:
        vals = splinalg.eigs(
            M, k=1, which="LM", v0=np.ones(n) / np.sqrt(n), tol=tol, ncv=min(n, ARNOLDI_NCV),
            maxiter=max_iter, return_eigenvectors=False,
        )
    except splinalg.ArpackNoConvergence:
        raise ConvergenceError(f"Arnoldi iteration did not converge in {max_iter} restarts") from None
    return float(np.abs(vals[0]))
