"""Random-search hyperparameter selection on a chronological validation split.

Trial ``i`` under search seed ``s`` draws its hyperparameters from
``SeedSequence(s, spawn_key=(i, 0))`` and fits with the model seed taken from
``SeedSequence(s, spawn_key=(i, 1))``, so the trial log does not depend on
how trials are scheduled across workers.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .data.panel import Panel
from .errors import AesnError, ConfigError, DataError
from .graph import Graph
from .hyper import HyperParams
from .metrics import rmse
from .model import ModelSpec, fit, predict_at

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

logger = logging.getLogger(__name__)

SCALES = ("log", "int", "uniform")
INT_PARAMS = {"n_h", "k_embed", "lags", "n_eof", "washout"}
_ORDER = [f.name for f in fields(HyperParams)]


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float
    scale: str

    def __post_init__(self):
        if self.scale not in SCALES:
            raise ConfigError(f"unknown scale {self.scale!r}; choose from {SCALES}")
        if not self.lo <= self.hi:
            raise ConfigError(f"bracket lo={self.lo} exceeds hi={self.hi}")
        if self.scale == "log" and not self.lo > 0:
            raise ConfigError("log-scaled brackets need lo > 0")
        if self.scale == "int" and (self.lo != int(self.lo) or self.hi != int(self.hi)):
            raise ConfigError("integer brackets need integral bounds")

    def draw(self, rng: np.random.Generator):
        if self.lo == self.hi:
            return int(self.lo) if self.scale == "int" else float(self.lo)
        if self.scale == "int":
            return int(rng.integers(int(self.lo), int(self.hi) + 1))
        if self.scale == "log":
            return float(math.exp(rng.uniform(math.log(self.lo), math.log(self.hi))))
        return float(rng.uniform(self.lo, self.hi))


@dataclass(frozen=True)
class SearchSpace:
    brackets: dict

    def __post_init__(self):
        unknown = set(self.brackets) - set(_ORDER)
        if unknown:
            raise ConfigError(f"search space names unknown parameter(s) {sorted(unknown)}")
        for name, b in self.brackets.items():
            if name in INT_PARAMS and b.scale != "int":
                raise ConfigError(f"{name} must use the 'int' scale")

    @classmethod
    def default(cls) -> "SearchSpace":
        return cls({
            "a_u": Bracket(1e-3, 1.0, "log"),
            "a_in": Bracket(1e-3, 1.0, "log"),
            "nu": Bracket(0.1, 1.0, "log"),
            "tau": Bracket(1e-6, 1e2, "log"),
            "alpha": Bracket(0.1, 1.0, "uniform"),
            "n_h": Bracket(50, 1000, "int"),
            "k_embed": Bracket(2, 50, "int"),
            "lags": Bracket(1, 6, "int"),
        })

    def with_bracket(self, name: str, b: Bracket) -> "SearchSpace":
        return SearchSpace({**self.brackets, name: b})


def load_search_space(path: str | Path) -> SearchSpace:
    """Read brackets from TOML (``[[space]]`` tables) or CSV, both keyed ``parameter, lo, hi, scale``."""
    path = Path(path)
    try:
        if path.suffix.lower() == ".csv":
            with path.open(newline="") as fh:
                rows = list(csv.DictReader(fh))
        else:
            rows = tomllib.loads(path.read_text()).get("space", [])
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    brackets = {}
    for row in rows:
        try:
            name = str(row["parameter"]).strip()
            brackets[name] = Bracket(float(row["lo"]), float(row["hi"]), str(row["scale"]).strip())
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"{path}: bad search-space row {row!r} ({exc})") from None
    if not brackets:
        raise ConfigError(f"{path}: empty search space")
    return SearchSpace(brackets)


def split(panel: Panel, train_len: int, val_len: int) -> tuple[Panel, Panel]:
    """Chronological ``[0, train_len)`` / ``[train_len, train_len + val_len)`` split."""
    if train_len < 1 or val_len < 1:
        raise DataError("train and validation lengths must be >= 1")
    if train_len + val_len > panel.T:
        raise DataError(f"train_len + val_len = {train_len + val_len} exceeds T = {panel.T}")
    return panel.window(0, train_len), panel.window(train_len, train_len + val_len)


def sample_hyperparams(space: SearchSpace, seed, base: HyperParams | None = None) -> HyperParams:
    """One draw from ``space``; parameters outside it keep their ``base`` values."""
    rng = np.random.default_rng(seed)
    base = base or HyperParams()
    drawn = {name: space.brackets[name].draw(rng) for name in _ORDER if name in space.brackets}
    return base.update(**drawn)


@dataclass(frozen=True)
class Trial:
    index: int
    hyper: HyperParams
    val_rmse: float
    status: str
    best_so_far: float


def _feasible_space(space: SearchSpace, base: HyperParams, lead: int, train_len: int) -> SearchSpace:
    # Need train_len - lags*lead > washout for at least one post-washout pair.
    b = space.brackets.get("lags")
    washout = base.washout
    if "washout" in space.brackets:
        washout = int(space.brackets["washout"].hi)
    cap = (train_len - washout - 1) // lead
    if cap < 1:
        raise DataError(f"training split of {train_len} months is too short for lead {lead}")
    if b is None:
        return space
    if b.lo > cap:
        raise DataError(f"lags bracket starts at {b.lo} but at most {cap} lags fit lead {lead}")
    if b.hi > cap:
        logger.info("capping lags bracket at %d for lead %d", cap, lead)
        return space.with_bracket("lags", Bracket(b.lo, cap, "int"))
    return space


def random_search(
    kind: str,
    panel: Panel,
    graph: Graph,
    space: SearchSpace,
    n_trials: int,
    seed: int,
    lead: int,
    train_len: int,
    val_len: int,
    base: HyperParams | None = None,
    candidates: Sequence[HyperParams] = (),
    fits_per_trial: int = 1,
    jobs: int = 1,
    standardize: bool = True,
) -> tuple[HyperParams, list[Trial]]:
    """Score random draws (plus explicit ``candidates``) by validation RMSE.

    Each trial fits on months ``[0, train_len)`` of ``panel`` and forecasts
    ``[train_len, train_len + val_len)`` at ``lead`` on the modelling scale;
    a forecast for month ``t`` reads observations up to ``t - lead`` only.
    The lowest RMSE wins, ties going to the smaller reservoir and then to
    the earlier trial.  ``fits_per_trial > 1`` averages the forecasts of that
    many independently seeded fits before scoring.
    """
    if n_trials < 0 or (n_trials == 0 and not candidates):
        raise ConfigError("need at least one trial")
    base = base or HyperParams()
    train, val = split(panel, train_len, val_len)
    observed = panel.head(train_len + val_len)
    space = _feasible_space(space, base, lead, train_len)
    targets = np.arange(train_len, train_len + val_len)

    hypers = [
        sample_hyperparams(space, np.random.SeedSequence(int(seed), spawn_key=(i, 0)), base)
        for i in range(n_trials)
    ]
    hypers.extend(candidates)

    def evaluate(i: int):
        hp = hypers[i]
        try:
            preds = []
            for f in range(fits_per_trial):
                model_seed = int(np.random.SeedSequence(int(seed), spawn_key=(i, 1, f)).generate_state(1)[0])
                mf = fit(ModelSpec(kind, hp, lead, standardize), train, graph, model_seed)
                preds.append(predict_at(mf, observed, targets, original_scale=False))
            score = rmse(np.mean(preds, axis=0), val.values.T)
            if not math.isfinite(score):
                return math.nan, "failed: non-finite validation error"
            return score, "ok"
        except AesnError as exc:
            return math.nan, f"failed: {exc}"

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            scores = list(pool.map(evaluate, range(len(hypers))))
    else:
        scores = [evaluate(i) for i in range(len(hypers))]

    log, best, winner = [], math.inf, None
    for i, (hp, (score, status)) in enumerate(zip(hypers, scores)):
        if status == "ok":
            key = (score, hp.n_h, i)
            if winner is None or key < winner[0]:
                winner = (key, hp)
            best = min(best, score)
        log.append(Trial(index=i, hyper=hp, val_rmse=score, status=status, best_so_far=best))
    if winner is None:
        raise DataError(f"all {len(hypers)} trials failed; first error: {scores[0][1]}")
    return winner[1], log


def write_trial_log(log: Sequence[Trial], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", *_ORDER, "val_rmse", "best_so_far", "status"])
        for t in log:
            d = t.hyper.to_dict()
            w.writerow([t.index, *(repr(d[k]) if isinstance(d[k], float) else d[k] for k in _ORDER),
                        repr(t.val_rmse), repr(t.best_so_far), t.status])
