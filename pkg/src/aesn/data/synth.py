"""Synthetic areal panels on a rook lattice.

On the log-thousands scale each series is

    level + offset[s] + trend[s] * t + amplitude[s] * sin(2 pi t / 12 + phase[s]) + noise[t, s]

where the location fields (offset, trend, amplitude, phase) are smoothed
over the lattice and ``noise`` is an AR(1)-in-time field whose innovations
are white noise multiplied by ``S^p``.  Raw values are ``1000 * exp(.)`` and
therefore strictly positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..graph import Graph, NormalizedAdjacency, lattice_graph, normalized_adjacency
from .panel import Panel, month_range


@dataclass(frozen=True)
class SynthComponents:
    level: float = 3.0
    offset_sd: float = 1.0
    trend: float = 0.01
    trend_sd: float = 0.005
    seasonal_amplitude: float = 0.6
    seasonal_sd: float = 0.3
    phase_sd: float = 0.5
    noise_sd: float = 0.2
    noise_ar: float = 0.6
    diffusive: bool = False
    smoothing: int = 1
    field_smoothing: int = 3

    def __post_init__(self):
        if self.smoothing < 1 or self.field_smoothing < 0:
            raise ConfigError("smoothing must be >= 1 and field_smoothing >= 0")
        if not 0 <= self.noise_ar < 1:
            raise ConfigError(f"noise_ar must lie in [0, 1), got {self.noise_ar}")
        if min(self.offset_sd, self.trend_sd, self.seasonal_sd, self.phase_sd, self.noise_sd) < 0:
            raise ConfigError("standard deviations must be nonnegative")

    @classmethod
    def trend_only(cls, trend: float = 0.01, trend_sd: float = 0.005) -> "SynthComponents":
        return cls(seasonal_amplitude=0.0, seasonal_sd=0.0, phase_sd=0.0, noise_sd=0.0,
                   trend=trend, trend_sd=trend_sd)


def _smooth(S: NormalizedAdjacency, v: np.ndarray, p: int) -> np.ndarray:
    for _ in range(p):
        v = np.asarray(S @ v)
    return v


def _standardized_field(S, rng, n_s: int, p: int) -> np.ndarray:
    f = _smooth(S, rng.standard_normal(n_s), p)
    sd = f.std()
    return (f - f.mean()) / sd if sd > 0 else f


def smoothed_noise(
    S: NormalizedAdjacency, T: int, sd: float, ar: float, p: int, rng, diffusive: bool = False
) -> np.ndarray:
    """``T x n_s`` AR(1) noise with spatially smoothed innovations ``S^p w_t``.

    With ``diffusive=True`` the persistence also spreads over the graph,
    ``e_t = ar * S e_{t-1} + innovation``, so a region's future depends on its
    neighbours' past.
    """
    n_s = S.n_s
    innov = _smooth(S, rng.standard_normal((n_s, T)), p).T * sd
    out = np.empty((T, n_s))
    out[0] = innov[0]
    scale = np.sqrt(1.0 - ar ** 2)
    for t in range(1, T):
        prev = np.asarray(S @ out[t - 1]) if diffusive else out[t - 1]
        out[t] = ar * prev + scale * innov[t]
    return out


def synth_generate(
    rows: int,
    cols: int,
    T: int,
    seed: int,
    components: SynthComponents | None = None,
    start: str = "2020-01",
) -> tuple[Panel, Graph]:
    """Raw-scale synthetic panel on a ``rows x cols`` rook lattice and its graph."""
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise ConfigError(f"lattice {rows}x{cols} needs at least two cells")
    if T < 24:
        raise ConfigError(f"T must be >= 24, got {T}")
    c = components or SynthComponents()
    g = lattice_graph(rows, cols)
    S = normalized_adjacency(g)
    n_s = g.n_s
    rng = np.random.default_rng(seed)
    p = c.field_smoothing
    offset = c.offset_sd * _standardized_field(S, rng, n_s, p)
    trend = c.trend + c.trend_sd * _standardized_field(S, rng, n_s, p)
    amp = c.seasonal_amplitude + c.seasonal_sd * _standardized_field(S, rng, n_s, p)
    phase = c.phase_sd * _standardized_field(S, rng, n_s, p)
    t = np.arange(T)[:, None]
    log_k = c.level + offset + trend * t + amp * np.sin(2 * np.pi * t / 12 + phase)
    if c.noise_sd > 0:
        log_k = log_k + smoothed_noise(S, T, c.noise_sd, c.noise_ar, c.smoothing, rng, c.diffusive)
    ids = tuple(f"R{r:02d}{q:02d}" for r in range(rows) for q in range(cols))
    panel = Panel(region_ids=ids, times=month_range(start, T), values=1000.0 * np.exp(log_k))
    return panel, g
