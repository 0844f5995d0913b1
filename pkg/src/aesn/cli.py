"""Command-line pipeline: synth, tune, fit, forecast, evaluate, plot-data.

Every command reads one TOML run configuration (``--config``) whose
relative paths resolve against the directory holding that file.
Flags override single settings.  Example::

    seed = 7
    model = "aesn"            # aesn | esn | esn-eof
    lead = 3
    horizon = 12
    n_ens = 100
    alpha = 0.05              # significance level of the HDR intervals
    train_len = 36
    transform = "log_thousands"   # or "none"
    jobs = 1

    [paths]
    panel = "data/panel.csv"      # long CSV: region_id,time,value
    edges = "data/edges.csv"      # src,dst region ids
    out_dir = "out"
    search_space = "space.toml"   # optional, defaults to the built-in brackets

    [hyper]                       # used by fit when no tuned parameters exist
    n_h = 200

    [tune]
    n_trials = 50
    train_len = 24
    val_len = 12

    [synth]
    rows = 6
    cols = 6
    T = 48

Outputs are named by model and lead (``<model>_lead<h>``) inside
``out_dir``.  Exit codes: 0 success, 2 configuration error, 3 data error,
4 numerical failure; failures print a JSON object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import synth
from .data.panel import (
    Panel, load_edge_csv, load_long_csv, to_log_thousands, write_edge_csv, write_long_csv,
)
from .errors import ConfigError, DataError, NumericalError
from .graph import Graph
from .hyper import HyperParams
from .model import MODEL_KINDS, ModelSpec, fit, load_model, normalize_kind, save_model
from .tune import SearchSpace, load_search_space, random_search, write_trial_log
from .uq import EnsembleForecasts, ensemble_forecast, member_seed, score_ensemble

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

logger = logging.getLogger("aesn")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4
TRANSFORMS = ("log_thousands", "none")
LABELS = {"aesn": "AESN", "esn": "ESN", "esn_eof": "ESN_EOF"}


@dataclass
class RunConfig:
    base_dir: Path
    model: str = "aesn"
    lead: int = 3
    horizon: int = 12
    n_ens: int = 100
    alpha: float = 0.05
    seed: int = 0
    jobs: int = 1
    train_len: int = 36
    transform: str = "log_thousands"
    hyper_jitter: float | None = None
    paths: dict = field(default_factory=dict)
    hyper: dict = field(default_factory=dict)
    tune: dict = field(default_factory=dict)
    synth: dict = field(default_factory=dict)

    def __post_init__(self):
        self.model = normalize_kind(self.model)
        for name in ("lead", "horizon", "n_ens", "jobs", "train_len"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.transform not in TRANSFORMS:
            raise ConfigError(f"transform must be one of {TRANSFORMS}")

    @property
    def tag(self) -> str:
        return f"{self.model}_lead{self.lead}"

    def path(self, key: str, default: str | None = None, must_exist: bool = False) -> Path:
        raw = self.paths.get(key, default)
        if raw is None:
            raise ConfigError(f"config needs paths.{key}")
        p = Path(raw)
        p = p if p.is_absolute() else self.base_dir / p
        if must_exist and not p.exists():
            raise ConfigError(f"paths.{key} = {raw!r} does not exist ({p})")
        return p

    @property
    def out_dir(self) -> Path:
        d = self.path("out_dir", "out")
        d.mkdir(parents=True, exist_ok=True)
        return d

    def echo(self) -> dict:
        """Settings written into every output so a run can be reproduced."""
        return {
            "seed": self.seed, "model": self.model, "lead": self.lead, "horizon": self.horizon,
            "n_ens": self.n_ens, "alpha": self.alpha, "train_len": self.train_len,
            "transform": self.transform, "hyper_jitter": self.hyper_jitter,
        }


_TOP_KEYS = {f.name for f in dataclasses.fields(RunConfig)} - {"base_dir"}
_OVERRIDES = ("model", "lead", "horizon", "n_ens", "alpha", "seed", "jobs")


def load_config(path: str | None, overrides: dict) -> RunConfig:
    data, base = {}, Path.cwd()
    if path is not None:
        p = Path(path)
        try:
            data = tomllib.loads(p.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        base = p.resolve().parent
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(base_dir=base, **data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


# --- shared helpers -----------------------------------------------------------

def _write_json(obj, path: Path):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _read_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: {exc}") from None


def _fmt(v: float) -> str:
    return repr(float(v))


def _load_data(cfg: RunConfig) -> tuple[Panel, Panel, Graph]:
    """Raw panel, modelling-scale panel and graph."""
    raw = load_long_csv(cfg.path("panel", must_exist=True))
    graph = load_edge_csv(cfg.path("edges", must_exist=True), raw.region_ids)
    model_panel = to_log_thousands(raw) if cfg.transform == "log_thousands" else raw
    return raw, model_panel, graph


def _hyper(cfg: RunConfig) -> HyperParams:
    """Tuned parameters when present, otherwise ``[hyper]`` on top of the defaults."""
    tuned = cfg.out_dir / f"best_params_{cfg.tag}.json"
    explicit = cfg.paths.get("params")
    if explicit is not None:
        return HyperParams.from_dict(_read_json(cfg.path("params", must_exist=True))["hyper"])
    if tuned.exists():
        return HyperParams.from_dict(_read_json(tuned)["hyper"])
    return HyperParams.from_dict(cfg.hyper)


def _space(cfg: RunConfig) -> SearchSpace:
    if "search_space" in cfg.paths:
        return load_search_space(cfg.path("search_space", must_exist=True))
    return SearchSpace.default()


# --- commands -------------------------------------------------------------------

def cmd_synth(cfg: RunConfig) -> list[Path]:
    """Write a synthetic lattice panel and its edge list."""
    s = dict(cfg.synth)
    rows, cols, T = int(s.pop("rows", 6)), int(s.pop("cols", 6)), int(s.pop("T", 48))
    start = str(s.pop("start", "2020-01"))
    names = {f.name for f in dataclasses.fields(synth.SynthComponents)}
    if set(s) - names:
        raise ConfigError(f"unknown synth setting(s): {sorted(set(s) - names)}")
    comps = synth.SynthComponents(**s)
    panel, graph = synth.synth_generate(rows, cols, T, cfg.seed, comps, start=start)
    out = [cfg.path("panel", "panel.csv"), cfg.path("edges", "edges.csv")]
    for p in out:
        p.parent.mkdir(parents=True, exist_ok=True)
    write_long_csv(panel, out[0])
    write_edge_csv(graph, panel.region_ids, out[1])
    return out


def cmd_tune(cfg: RunConfig) -> list[Path]:
    """Random search on the training window; writes best parameters and the trial log."""
    _, panel, graph = _load_data(cfg)
    t = cfg.tune
    train_len, val_len = int(t.get("train_len", 24)), int(t.get("val_len", 12))
    if train_len + val_len > cfg.train_len:
        raise ConfigError(
            f"tune window {train_len}+{val_len} exceeds the training window of {cfg.train_len} months"
        )
    best, log = random_search(
        cfg.model, panel, graph, _space(cfg), int(t.get("n_trials", 50)), cfg.seed, cfg.lead,
        train_len, val_len, base=HyperParams.from_dict(cfg.hyper),
        fits_per_trial=int(t.get("fits_per_trial", 1)), jobs=cfg.jobs,
    )
    winner = min((tr for tr in log if tr.status == "ok" and tr.hyper == best), key=lambda tr: tr.index)
    params = cfg.out_dir / f"best_params_{cfg.tag}.json"
    trials = cfg.out_dir / f"trials_{cfg.tag}.csv"
    _write_json({**cfg.echo(), "hyper": best.to_dict(), "val_rmse": winner.val_rmse,
                 "trial": winner.index, "tune": {"train_len": train_len, "val_len": val_len}}, params)
    write_trial_log(log, trials)
    return [params, trials]


def cmd_fit(cfg: RunConfig) -> list[Path]:
    """Fit ensemble member 0 on the training window and save it."""
    _, panel, graph = _load_data(cfg)
    if panel.T < cfg.train_len:
        raise DataError(f"panel has {panel.T} months, train_len is {cfg.train_len}")
    spec = ModelSpec(cfg.model, _hyper(cfg), cfg.lead)
    mf = fit(spec, panel.head(cfg.train_len), graph, member_seed(cfg.seed, 0))
    path = cfg.out_dir / f"model_{cfg.tag}.npz"
    save_model(mf, path)
    return [path]


def _artifact(cfg: RunConfig) -> Path:
    if "model" in cfg.paths:
        return cfg.path("model", must_exist=True)
    p = cfg.out_dir / f"model_{cfg.tag}.npz"
    if not p.exists():
        raise ConfigError(f"no model artifact at {p}; run 'aesn fit' first")
    return p


def cmd_forecast(cfg: RunConfig) -> list[Path]:
    """Ensemble forecasts with HDR intervals for the months after the training window."""
    _, panel, graph = _load_data(cfg)
    mf = load_model(_artifact(cfg))
    if mf.spec.kind != cfg.model or mf.spec.lead != cfg.lead:
        raise ConfigError(
            f"artifact holds {mf.spec.kind} at lead {mf.spec.lead}, config asks for {cfg.model} at lead {cfg.lead}"
        )
    if mf.region_ids != panel.region_ids or mf.train_len != cfg.train_len:
        raise DataError("artifact was fitted on a different panel or training window")
    if mf.seed != member_seed(cfg.seed, 0):
        raise ConfigError("artifact seed does not match the configured base seed")
    ens = ensemble_forecast(
        mf.spec, panel, graph, cfg.n_ens, cfg.seed, cfg.horizon, train_len=cfg.train_len,
        hyper_jitter=cfg.hyper_jitter, jobs=cfg.jobs, first_member=mf,
    )
    out = cfg.out_dir
    fc, members, meta = (out / f"forecasts_{cfg.tag}.csv", out / f"members_{cfg.tag}.csv",
                         out / f"forecast_meta_{cfg.tag}.json")
    lo, hi = ens.intervals(cfg.alpha)
    mean = ens.mean()
    with fc.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["region_id", "time", "mean", "lower", "upper", "alpha"])
        for s, rid in enumerate(ens.region_ids):
            for j, t in enumerate(ens.times):
                w.writerow([rid, t, _fmt(mean[s, j]), _fmt(lo[s, j]), _fmt(hi[s, j]), _fmt(cfg.alpha)])
    with members.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["member", "seed", "region_id", "time", "value"])
        for k, seed in enumerate(ens.seeds):
            for s, rid in enumerate(ens.region_ids):
                for j, t in enumerate(ens.times):
                    w.writerow([k, seed, rid, t, _fmt(ens.values[k, s, j])])
    _write_json({
        **cfg.echo(), "member_seeds": list(ens.seeds), "failures": list(ens.failures),
        "times": list(ens.times), "hyper": mf.spec.hyper.to_dict(),
        "members": members.name, "forecasts": fc.name,
    }, meta)
    return [fc, members, meta]


def _load_members(path: Path, region_ids, times) -> EnsembleForecasts:
    import pandas as pd

    df = pd.read_csv(path, dtype={"region_id": str, "time": str}, float_precision="round_trip")
    seeds = tuple(int(s) for s in df.drop_duplicates("member").sort_values("member")["seed"])
    cube = np.full((len(seeds), len(region_ids), len(times)), np.nan)
    r_ix = {r: i for i, r in enumerate(region_ids)}
    t_ix = {t: j for j, t in enumerate(times)}
    try:
        cube[df["member"].to_numpy(), df["region_id"].map(r_ix).to_numpy(),
             df["time"].map(t_ix).to_numpy()] = df["value"].to_numpy()
    except (IndexError, ValueError, TypeError):
        raise DataError(f"{path}: members do not match the panel regions or forecast months") from None
    if np.isnan(cube).any():
        raise DataError(f"{path}: incomplete member table")
    return EnsembleForecasts(values=cube, seeds=seeds, hypers=(), region_ids=tuple(region_ids),
                             times=tuple(times))


def _forecast_runs(cfg: RunConfig, region_ids) -> list[tuple[dict, EnsembleForecasts]]:
    """Every forecast in ``out_dir``, in file-name order."""
    runs = []
    for meta_path in sorted(cfg.out_dir.glob("forecast_meta_*.json")):
        meta = _read_json(meta_path)
        ens = _load_members(meta_path.parent / meta["members"], region_ids, meta["times"])
        runs.append((meta, ens))
    if not runs:
        raise DataError(f"no forecasts found in {cfg.out_dir}; run 'aesn forecast' first")
    return runs


def _truth(raw: Panel, times) -> np.ndarray:
    index = {t: i for i, t in enumerate(raw.times)}
    missing = [t for t in times if t not in index]
    if missing:
        raise DataError(f"no observations for forecast month(s) {missing[:3]}")
    return raw.values[[index[t] for t in times]].T


def cmd_evaluate(cfg: RunConfig) -> list[Path]:
    """Score every forecast in the output directory against the observed panel."""
    raw = load_long_csv(cfg.path("panel", must_exist=True))
    table, details = {}, []
    for meta, ens in _forecast_runs(cfg, raw.region_ids):
        report = score_ensemble(ens, _truth(raw, ens.times), meta["alpha"])
        label, lead = LABELS[meta["model"]], f"lead_{meta['lead']}"
        table.setdefault(label, {})[lead] = report.headline()
        details.append({"model": label, "lead": meta["lead"], "alpha": meta["alpha"],
                        "seed": meta["seed"], "n_ens": ens.n_ens, "times": list(ens.times),
                        **report.to_dict()})
    path = cfg.out_dir / "scores.json"
    _write_json({
        "seed": cfg.seed, "scale": "original", "columns": ["rmse", "crps", "is"],
        "region_ids": list(raw.region_ids),
        "rows": [m for m in (LABELS[k] for k in MODEL_KINDS) if m in table],
        "table": table, "details": details,
    }, path)
    return [path]


def cmd_plot_data(cfg: RunConfig) -> list[Path]:
    """Tidy CSVs for time-series and per-month map plots."""
    raw = load_long_csv(cfg.path("panel", must_exist=True))
    ts, choro = cfg.out_dir / "plot_timeseries.csv", cfg.out_dir / "plot_choropleth.csv"
    runs = _forecast_runs(cfg, raw.region_ids)
    with ts.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "lead", "region_id", "time", "observed", "mean", "lower", "upper", "alpha"])
        bands = []
        for meta, ens in runs:
            lo, hi = ens.intervals(meta["alpha"])
            bands.append((meta, ens.times, ens.mean(), lo, hi))
        for s, rid in enumerate(raw.region_ids):
            for t_i, t in enumerate(raw.times):
                w.writerow(["observed", "", rid, t, _fmt(raw.values[t_i, s]), "", "", "", ""])
            for meta, times, mean, lo, hi in bands:
                for j, t in enumerate(times):
                    w.writerow([LABELS[meta["model"]], meta["lead"], rid, t, "", _fmt(mean[s, j]),
                                _fmt(lo[s, j]), _fmt(hi[s, j]), _fmt(meta["alpha"])])
    index = {t: i for i, t in enumerate(raw.times)}
    with choro.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "lead", "time", "region_id", "value", "observed", "error"])
        for meta, times, mean, _, _ in bands:
            for j, t in enumerate(times):
                for s, rid in enumerate(raw.region_ids):
                    obs = raw.values[index[t], s] if t in index else None
                    w.writerow([LABELS[meta["model"]], meta["lead"], t, rid, _fmt(mean[s, j]),
                                "" if obs is None else _fmt(obs),
                                "" if obs is None else _fmt(mean[s, j] - obs)])
    return [ts, choro]


COMMANDS = {
    "synth": cmd_synth,
    "tune": cmd_tune,
    "fit": cmd_fit,
    "forecast": cmd_forecast,
    "evaluate": cmd_evaluate,
    "plot-data": cmd_plot_data,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail(EXIT_CONFIG, "usage", message)


def _fail(code: int, kind: str, message: str):
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    sys.exit(code)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--model", choices=["aesn", "esn", "esn-eof"])
    common.add_argument("--lead", type=int)
    common.add_argument("--horizon", type=int)
    common.add_argument("--n-ens", dest="n_ens", type=int)
    common.add_argument("--alpha", type=float, help="interval significance level")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int)
    common.add_argument("-v", "--verbose", action="store_true")
    parser = _Parser(prog="aesn", description="Areal echo state network forecasting")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=fn.__doc__.splitlines()[0])
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, {k: getattr(args, k) for k in _OVERRIDES})
        written = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        _fail(EXIT_CONFIG, "config", str(exc))
    except DataError as exc:
        _fail(EXIT_DATA, "data", str(exc))
    except (NumericalError, ArithmeticError) as exc:
        _fail(EXIT_NUMERICAL, "numerical", str(exc))
    except ValueError as exc:
        _fail(EXIT_CONFIG, "config", str(exc))
    except OSError as exc:
        _fail(EXIT_DATA, "data", str(exc))
    for p in written:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
