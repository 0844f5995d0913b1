"""Fixed random reservoir and its leaky state recursion.

    h_t = (1 - alpha) * h_{t-1} + alpha * g(nu / lam_w * W_res @ h_{t-1} + W_in @ z_t)

``W_res`` is sparse: each entry is nonzero with probability ``pi_res`` and
then drawn from ``Uniform(-a_res, a_res)``.  ``W_in`` is dense.  The spectral
radius ``lam_w`` is stored with the reservoir and ``nu`` is applied at
evaluation time, so the same draw can be rescaled while tuning.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import ConfigError, ConvergenceError, NumericalError
from .graph import spectral_radius

logger = logging.getLogger(__name__)

ACTIVATIONS = {
    "tanh": np.tanh,
    "identity": lambda v: v,
}

#: Extra draws attempted when a reservoir comes out with zero spectral radius.
ZERO_RADIUS_RETRIES = 8


@dataclass(frozen=True)
class ReservoirConfig:
    n_h: int
    n_in: int
    nu: float = 0.9
    alpha: float = 1.0
    a_res: float = 0.1
    a_in: float = 0.1
    pi_res: float = 0.1
    pi_in: float = 1.0
    activation: str = "tanh"

    def __post_init__(self):
        if self.n_h < 1 or self.n_in < 1:
            raise ConfigError(f"n_h and n_in must be >= 1, got {self.n_h}, {self.n_in}")
        if not 0 < self.alpha <= 1:
            raise ConfigError(f"leaking rate must lie in (0, 1], got {self.alpha}")
        if not self.nu > 0:
            raise ConfigError(f"nu must be positive, got {self.nu}")
        if not (self.a_res > 0 and self.a_in > 0):
            raise ConfigError("a_res and a_in must be positive")
        if not (0 < self.pi_res <= 1 and 0 < self.pi_in <= 1):
            raise ConfigError("densities must lie in (0, 1]")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")


@dataclass(frozen=True)
class Reservoir:
    W_res: sparse.csr_matrix
    W_in: np.ndarray
    lam_w: float
    activation: str = "tanh"
    seed: int | None = None

    @property
    def n_h(self) -> int:
        return self.W_res.shape[0]

    @property
    def n_in(self) -> int:
        return self.W_in.shape[1]

    def scaled(self, nu: float) -> sparse.csr_matrix:
        """``W_res`` rescaled to spectral radius ``nu``."""
        return self.W_res * (nu / self.lam_w)


@dataclass(frozen=True)
class HiddenStates:
    """Post-washout states, one column per time step, plus the final state."""

    H: np.ndarray
    h_last: np.ndarray


def _radius(W: sparse.csr_matrix) -> float:
    for method in ("arnoldi", "power"):
        try:
            return spectral_radius(W, tol=1e-12, method=method)
        except ConvergenceError:
            logger.warning("%s iteration stalled on %d x %d reservoir", method, *W.shape)
    logger.warning("falling back to a dense eigensolver")
    return float(np.max(np.abs(np.linalg.eigvals(W.toarray()))))


def _draw(cfg: ReservoirConfig, seed: int) -> tuple[sparse.csr_matrix, np.ndarray]:
    rng = np.random.default_rng(seed)
    n = cfg.n_h
    mask = rng.random((n, n)) < cfg.pi_res
    rows, cols = np.nonzero(mask)
    vals = rng.uniform(-cfg.a_res, cfg.a_res, size=rows.size)
    W_res = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    W_in = rng.uniform(-cfg.a_in, cfg.a_in, size=(n, cfg.n_in))
    if cfg.pi_in < 1:
        W_in *= rng.random(W_in.shape) < cfg.pi_in
    return W_res, W_in


def sample_reservoir(cfg: ReservoirConfig, seed: int) -> Reservoir:
    """Draw a reservoir; identical ``(cfg, seed)`` gives a bit-identical result.

    A draw whose ``W_res`` has zero spectral radius (for instance all-zero at
    tiny ``n_h * pi_res``) is redrawn with ``seed + 1``, ``seed + 2``, ...
    """
    for offset in range(ZERO_RADIUS_RETRIES + 1):
        W_res, W_in = _draw(cfg, int(seed) + offset)
        lam = _radius(W_res) if W_res.nnz else 0.0
        if lam > 0:
            W_in.setflags(write=False)
            return Reservoir(W_res=W_res, W_in=W_in, lam_w=lam, activation=cfg.activation, seed=int(seed))
        logger.info("zero spectral radius with seed %d, redrawing", int(seed) + offset)
    raise NumericalError(
        f"reservoir spectral radius was zero for {ZERO_RADIUS_RETRIES + 1} consecutive draws"
    )


def _check_finite(name: str, v: np.ndarray):
    if not np.all(np.isfinite(v)):
        raise NumericalError(f"non-finite entries in {name}")


def advance(r: Reservoir, nu: float, alpha: float, h_prev: np.ndarray, z: np.ndarray) -> np.ndarray:
    """One step of the leaky state update."""
    h_prev = np.asarray(h_prev, dtype=float)
    z = np.asarray(z, dtype=float)
    if h_prev.shape != (r.n_h,) or z.shape != (r.n_in,):
        raise ValueError(
            f"expected h_prev ({r.n_h},) and z ({r.n_in},), got {h_prev.shape} and {z.shape}"
        )
    _check_finite("input", z)
    _check_finite("state", h_prev)
    g = ACTIVATIONS[r.activation]
    pre = (nu / r.lam_w) * (r.W_res @ h_prev) + r.W_in @ z
    return (1.0 - alpha) * h_prev + alpha * g(pre)


def run(
    r: Reservoir,
    nu: float,
    alpha: float,
    inputs: np.ndarray,
    washout: int = 3,
    h0: np.ndarray | None = None,
) -> HiddenStates:
    """Evolve the reservoir over ``inputs`` of shape ``(T, n_in)``.

    The state starts at ``h0`` (zeros by default); the first ``washout``
    states warm the reservoir and are dropped from ``H``.
    """
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 2 or inputs.shape[1] != r.n_in:
        raise ValueError(f"inputs must have shape (T, {r.n_in}), got {inputs.shape}")
    T = inputs.shape[0]
    if not 0 <= washout < T:
        raise ValueError(f"washout={washout} must be in [0, T={T})")
    _check_finite("input", inputs)
    g = ACTIVATIONS[r.activation]
    h = np.zeros(r.n_h) if h0 is None else np.array(h0, dtype=float)
    if h.shape != (r.n_h,):
        raise ValueError(f"h0 must have shape ({r.n_h},)")
    W = r.W_res
    scale = nu / r.lam_w
    drive = inputs @ r.W_in.T  # (T, n_h)
    H = np.empty((r.n_h, T - washout))
    for t in range(T):
        h = (1.0 - alpha) * h + alpha * g(scale * (W @ h) + drive[t])
        if t >= washout:
            H[:, t - washout] = h
    return HiddenStates(H=H, h_last=h.copy())
