"""Forecast scores: RMSE, ensemble CRPS and the interval score.

CRPS uses the empirical ensemble estimator

    mean_k |x_k - y|  -  sum_ij |x_i - x_j| / (2 K^2)

by default.  ``fair=True`` switches the second denominator to ``2 K (K - 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def rmse(pred, obs) -> float:
    pred = np.asarray(pred, dtype=float).ravel()
    obs = np.asarray(obs, dtype=float).ravel()
    if pred.size != obs.size:
        raise ValueError(f"length mismatch: {pred.size} predictions, {obs.size} observations")
    if pred.size == 0:
        raise ValueError("rmse of empty input")
    return float(np.sqrt(np.mean((pred - obs) ** 2)))


def _pair_sum(sorted_x: np.ndarray) -> np.ndarray:
    """``sum_ij |x_i - x_j|`` along the last axis of pre-sorted samples."""
    K = sorted_x.shape[-1]
    w = 2.0 * np.arange(1, K + 1) - K - 1
    return 2.0 * np.sum(w * sorted_x, axis=-1)


def crps_ensemble(samples, obs, fair: bool = False):
    """CRPS of ensemble ``samples`` (members on the last axis) against ``obs``.

    Broadcasts: ``samples`` of shape ``(..., K)`` and ``obs`` of shape ``(...)``.
    """
    x = np.asarray(samples, dtype=float)
    y = np.asarray(obs, dtype=float)
    if x.ndim == 0 or x.shape[-1] == 0:
        raise ValueError("crps needs at least one ensemble member")
    K = x.shape[-1]
    if fair and K < 2:
        raise ValueError("the fair estimator needs at least two members")
    spread = np.mean(np.abs(x - y[..., None]), axis=-1)
    denom = 2.0 * K * (K - 1) if fair else 2.0 * K * K
    out = spread - _pair_sum(np.sort(x, axis=-1)) / denom
    return float(out) if out.ndim == 0 else out


def interval_score(lower, upper, obs, alpha_sig: float):
    """Width plus ``2/alpha`` times the distance of ``obs`` outside ``[lower, upper]``."""
    l = np.asarray(lower, dtype=float)
    u = np.asarray(upper, dtype=float)
    y = np.asarray(obs, dtype=float)
    if not 0 < alpha_sig < 1:
        raise ValueError(f"alpha_sig must lie in (0, 1), got {alpha_sig}")
    if np.any(l > u):
        raise ValueError("lower bound exceeds upper bound")
    out = (u - l) + (2.0 / alpha_sig) * (np.maximum(l - y, 0.0) + np.maximum(y - u, 0.0))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ScoreReport:
    """Aggregate scores with per-location and per-horizon-step breakdowns."""

    rmse: float
    crps: float
    interval_score: float
    rmse_by_location: list = field(default_factory=list)
    crps_by_location: list = field(default_factory=list)
    interval_score_by_location: list = field(default_factory=list)
    rmse_by_horizon: list = field(default_factory=list)
    crps_by_horizon: list = field(default_factory=list)
    interval_score_by_horizon: list = field(default_factory=list)

    def headline(self) -> dict:
        return {"rmse": self.rmse, "crps": self.crps, "is": self.interval_score}

    def to_dict(self) -> dict:
        return {
            **self.headline(),
            "by_location": {
                "rmse": self.rmse_by_location,
                "crps": self.crps_by_location,
                "is": self.interval_score_by_location,
            },
            "by_horizon": {
                "rmse": self.rmse_by_horizon,
                "crps": self.crps_by_horizon,
                "is": self.interval_score_by_horizon,
            },
        }


def aggregate(sq_err, crps, iscore) -> ScoreReport:
    """Combine per-cell scores laid out as ``n_s x horizon`` grids.

    RMSE is the root of the unweighted mean squared error over all cells;
    CRPS and IS are unweighted cell means.  ``sq_err`` holds squared errors.
    """
    grids = [np.atleast_2d(np.asarray(a, dtype=float)) for a in (sq_err, crps, iscore)]
    if any(g.size == 0 for g in grids):
        raise ValueError("cannot aggregate an empty score grid")
    if len({g.shape for g in grids}) != 1:
        raise ValueError("score grids must share one shape")
    se, cr, isc = grids
    return ScoreReport(
        rmse=float(np.sqrt(se.mean())),
        crps=float(cr.mean()),
        interval_score=float(isc.mean()),
        rmse_by_location=np.sqrt(se.mean(axis=1)).tolist(),
        crps_by_location=cr.mean(axis=1).tolist(),
        interval_score_by_location=isc.mean(axis=1).tolist(),
        rmse_by_horizon=np.sqrt(se.mean(axis=0)).tolist(),
        crps_by_horizon=cr.mean(axis=0).tolist(),
        interval_score_by_horizon=isc.mean(axis=0).tolist(),
    )
