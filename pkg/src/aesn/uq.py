"""Ensemble forecasts and shortest (unimodal HDR) prediction intervals.

Member ``k`` of an ensemble with base seed ``b`` is fitted with seed
:func:`member_seed(b, k) <member_seed>`, i.e. the first 32-bit word of
``numpy.random.SeedSequence(b, spawn_key=(k,))``.  Hyperparameter jitter,
when enabled, draws from ``SeedSequence(b, spawn_key=(k, 1))``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data.panel import Panel
from .errors import AesnError, NumericalError
from .graph import Graph
from .hyper import HyperParams
from .metrics import ScoreReport, aggregate, crps_ensemble, interval_score
from .model import FittedModel, ModelSpec, fit, predict_at, target_times

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnsembleForecasts:
    """``values[k, s, j]``: member ``k``, region ``s``, target month ``times[j]`` (original scale)."""

    values: np.ndarray
    seeds: tuple[int, ...]
    hypers: tuple[HyperParams, ...]
    region_ids: tuple[str, ...]
    times: tuple[str, ...]
    failures: tuple[str, ...] = ()

    @property
    def n_ens(self) -> int:
        return self.values.shape[0]

    def mean(self) -> np.ndarray:
        return self.values.mean(axis=0)

    def intervals(self, alpha_sig: float) -> tuple[np.ndarray, np.ndarray]:
        """Per-cell HDR bounds, each ``n_s x horizon``."""
        return hdr_bounds(self.values, alpha_sig)


@dataclass(frozen=True)
class PredictionInterval:
    l: float
    u: float
    alpha_sig: float


def member_seed(base_seed: int, k: int) -> int:
    return int(np.random.SeedSequence(int(base_seed), spawn_key=(int(k),)).generate_state(1)[0])


def jitter_hyper(hp: HyperParams, base_seed: int, k: int, bracket: float) -> HyperParams:
    """Multiply ``nu``, ``tau`` and ``a_u`` by log-uniform factors in ``[1/bracket, bracket]``."""
    if bracket < 1:
        raise ValueError("jitter bracket must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(int(base_seed), spawn_key=(int(k), 1)))
    f = np.exp(rng.uniform(-math.log(bracket), math.log(bracket), size=3))
    return hp.update(nu=hp.nu * f[0], tau=hp.tau * f[1], a_u=hp.a_u * f[2])


def _required(alpha_sig: float, n: int) -> int:
    if not 0 < alpha_sig < 1:
        raise ValueError(f"alpha_sig must lie in (0, 1), got {alpha_sig}")
    # Guard against 0.95 * 20 = 19.000000000000004 rounding up to 20.
    return min(n, max(1, math.ceil(round((1.0 - alpha_sig) * n, 9))))


def hdr_interval(samples, alpha_sig: float) -> PredictionInterval:
    """Shortest interval holding ``ceil((1 - alpha) n)`` of the samples; ties go to the lowest start."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n < 2:
        raise ValueError("hdr_interval needs at least two samples")
    m = _required(alpha_sig, n)
    widths = x[m - 1:] - x[: n - m + 1]
    i = int(np.argmin(widths))  # argmin returns the first minimum -> smallest lower bound
    return PredictionInterval(l=float(x[i]), u=float(x[i + m - 1]), alpha_sig=alpha_sig)


def hdr_bounds(values: np.ndarray, alpha_sig: float) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`hdr_interval` over the leading (member) axis."""
    x = np.sort(np.asarray(values, dtype=float), axis=0)
    n = x.shape[0]
    if n < 2:
        raise ValueError("intervals need at least two ensemble members")
    m = _required(alpha_sig, n)
    widths = x[m - 1:] - x[: n - m + 1]
    i = np.argmin(widths, axis=0)[None]
    lo = np.take_along_axis(x, i, axis=0)[0]
    hi = np.take_along_axis(x, i + m - 1, axis=0)[0]
    return lo, hi


def point_forecast(samples) -> float:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("point forecast of an empty ensemble")
    return float(np.mean(x))


def ensemble_forecast(
    spec: ModelSpec,
    panel: Panel,
    graph: Graph,
    n_ens: int,
    base_seed: int,
    horizon: int,
    train_len: int | None = None,
    hyper_jitter: float | None = None,
    jobs: int = 1,
    first_member: FittedModel | None = None,
) -> EnsembleForecasts:
    """Fit ``n_ens`` members on the first ``train_len`` months and forecast the next ``horizon``.

    Target month ``t`` reads observations of ``panel`` up to ``t - lead``; when
    ``horizon > lead`` the panel must therefore extend past the training window.
    ``first_member`` supplies an already-fitted member 0 (as loaded from an
    artifact) instead of refitting it.
    """
    if n_ens < 1:
        raise ValueError("n_ens must be >= 1")
    train_len = panel.T if train_len is None else train_len
    train = panel.head(train_len)
    targets = np.arange(train_len, train_len + horizon)

    def member(k: int):
        hp = spec.hyper if not hyper_jitter else jitter_hyper(spec.hyper, base_seed, k, hyper_jitter)
        seed = member_seed(base_seed, k)
        if k == 0 and first_member is not None:
            mf = first_member
        else:
            mf = fit(ModelSpec(spec.kind, hp, spec.lead, spec.standardize), train, graph, seed)
        return seed, hp, predict_at(mf, panel, targets)

    def safe(k: int):
        try:
            return member(k)
        except AesnError as exc:
            logger.warning("ensemble member %d failed: %s", k, exc)
            return exc

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(safe, range(n_ens)))
    else:
        results = [safe(k) for k in range(n_ens)]

    ok = [r for r in results if not isinstance(r, Exception)]
    failures = tuple(f"member {k}: {r}" for k, r in enumerate(results) if isinstance(r, Exception))
    if n_ens == 1 and not ok:
        raise results[0]
    if n_ens > 1 and len(ok) < 2:
        raise NumericalError(f"only {len(ok)} of {n_ens} ensemble members succeeded: {failures}")
    return EnsembleForecasts(
        values=np.stack([r[2] for r in ok]),
        seeds=tuple(r[0] for r in ok),
        hypers=tuple(r[1] for r in ok),
        region_ids=panel.region_ids,
        times=target_times(panel, targets),
        failures=failures,
    )


def score_ensemble(ens: EnsembleForecasts, truth: np.ndarray, alpha_sig: float, fair: bool = False) -> ScoreReport:
    """RMSE of the ensemble mean, CRPS of the raw members and IS of the HDR bounds.

    ``truth`` is ``n_s x horizon`` on the original scale.
    """
    truth = np.asarray(truth, dtype=float)
    if truth.shape != ens.values.shape[1:]:
        raise ValueError(f"truth has shape {truth.shape}, forecasts {ens.values.shape[1:]}")
    lo, hi = ens.intervals(alpha_sig)
    members = np.moveaxis(ens.values, 0, -1)
    return aggregate(
        (ens.mean() - truth) ** 2,
        crps_ensemble(members, truth, fair=fair),
        interval_score(lo, hi, truth, alpha_sig),
    )
