"""AESN, plain ESN and ESN-with-EOF forecasters built from the components.

All three share one direct-lead design: a model fitted at lead ``h`` maps
the lagged frames ``t-h, t-2h, ..., t-m*h`` to the value at ``t``.  No
forecast is ever fed back as an input, so a prediction for month ``t``
reads nothing later than ``t - h``.

Input layout per time step (before the reservoir):

* ``aesn``    -- embedded ``Z_t`` (``n_s x K``), column-major flattened.
* ``esn``     -- raw lag matrix ``x_t`` (``n_s x m``), column-major flattened.
* ``esn_eof`` -- EOF-coefficient lag matrix (``n_eof x m``), same layout;
  the readout predicts coefficients that are mapped back to locations.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from . import eof as eof_mod
from .data.panel import Panel, inverse_transform, month_index, month_stamp
from .embedding import ArealEmbedding, embed_sequence, sample_embedding
from .errors import ConfigError, DataError
from .graph import Graph, from_edge_list, normalized_adjacency
from .hyper import HyperParams
from .readout import Readout, fit_ridge, predict
from .reservoir import Reservoir, ReservoirConfig, run, sample_reservoir

MODEL_KINDS = ("aesn", "esn", "esn_eof")
ARTIFACT_FORMAT = "aesn-model"
ARTIFACT_VERSION = 1
EOF_VARIANCE = 0.9


def normalize_kind(kind: str) -> str:
    k = kind.lower().replace("-", "_")
    if k not in MODEL_KINDS:
        raise ConfigError(f"unknown model kind {kind!r}; choose from aesn, esn, esn-eof")
    return k


@dataclass(frozen=True)
class ModelSpec:
    """What to fit.  ``standardize`` centers and scales each input series
    (location or EOF coefficient) with its training mean and standard deviation."""

    kind: str
    hyper: HyperParams
    lead: int
    standardize: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", normalize_kind(self.kind))
        if self.lead < 1:
            raise ConfigError(f"lead must be >= 1, got {self.lead}")

    @property
    def lags(self) -> int:
        return self.hyper.lags


@dataclass(frozen=True)
class FittedModel:
    spec: ModelSpec
    reservoir: Reservoir
    readout: Readout
    h_last: np.ndarray
    graph: Graph
    region_ids: tuple[str, ...]
    start_time: str
    train_len: int
    transform_state: str
    seed: int | None = None
    embedding: ArealEmbedding | None = None
    eof_basis: eof_mod.EofBasis | None = None
    center: np.ndarray | None = None
    scale: np.ndarray | None = None

    def to_model_series(self, values: np.ndarray) -> np.ndarray:
        """Observations to the standardized series the reservoir sees."""
        series = _series(self.eof_basis, values)
        return series if self.center is None else (series - self.center) / self.scale

    def from_model_series(self, out: np.ndarray) -> np.ndarray:
        """Readout outputs (``n x T``) back to location values on the panel scale."""
        if self.center is not None:
            out = out * self.scale[:, None] + self.center[:, None]
        if self.eof_basis is not None:
            out = eof_mod.reconstruct(self.eof_basis, out.T).T
        return out

    @property
    def n_s(self) -> int:
        return len(self.region_ids)


def build_inputs(values: np.ndarray, lags: int, lead: int) -> tuple[np.ndarray, np.ndarray]:
    """Lagged input/target pairs from a ``T x n`` array.

    Returns ``X`` of shape ``(N, n, lags)`` with ``X[i, :, j]`` the values at
    ``t - (j + 1) * lead`` and ``Y`` of shape ``(N, n)`` with the values at
    ``t``, for ``t = lags * lead, ..., T - 1``.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    T = values.shape[0]
    first = lags * lead
    if T < first + 1:
        raise DataError(f"need at least lags*lead+1 = {first + 1} time steps, have {T}")
    return lagged_frames(values, lags, lead, np.arange(first, T)), values[first:]


def lagged_frames(values: np.ndarray, lags: int, lead: int, targets: np.ndarray) -> np.ndarray:
    """Input frames for arbitrary target indices (targets may lie past the data)."""
    targets = np.asarray(targets)
    idx = targets[:, None] - lead * np.arange(1, lags + 1)[None, :]
    if idx.min() < 0 or idx.max() >= values.shape[0]:
        raise DataError("lagged inputs reach outside the observed history")
    return values[idx].transpose(0, 2, 1)


def member_seeds(seed: int) -> tuple[int, int]:
    """Reservoir and embedding seeds derived from one model seed."""
    reservoir_ss, embedding_ss = np.random.SeedSequence(int(seed)).spawn(2)
    return int(reservoir_ss.generate_state(1)[0]), int(embedding_ss.generate_state(1)[0])


def _series(basis: eof_mod.EofBasis | None, values: np.ndarray) -> np.ndarray:
    return values if basis is None else eof_mod.project(basis, values)


def _features(kind: str, X: np.ndarray, embedding: ArealEmbedding | None, S) -> np.ndarray:
    if kind == "aesn":
        return embed_sequence(embedding, S, X)
    N, n, m = X.shape
    return X.transpose(0, 2, 1).reshape(N, n * m)


def fit(
    spec: ModelSpec,
    panel: Panel,
    graph: Graph,
    seed: int,
    embedding: ArealEmbedding | None = None,
    reservoir: Reservoir | None = None,
) -> FittedModel:
    """Fit one model on ``panel`` (already on the modelling scale).

    ``embedding`` and ``reservoir`` override the seeded draws; they exist for
    harnesses that need to control the random weights directly.
    """
    hp = spec.hyper
    if graph.n_s != panel.n_s:
        raise DataError(f"graph has {graph.n_s} nodes but panel has {panel.n_s} regions")
    values = panel.values
    basis = None
    if spec.kind == "esn_eof":
        n_eof = hp.n_eof if hp.n_eof is not None else eof_mod.n_eof_for_variance(values, EOF_VARIANCE)
        basis = eof_mod.compute_eofs(values, min(n_eof, min(values.shape)))
    series = _series(basis, values)
    center = scale = None
    if spec.standardize:
        center = series.mean(axis=0)
        scale = series.std(axis=0)
        scale[scale == 0] = 1.0
        series = (series - center) / scale
    X, Y = build_inputs(series, hp.lags, spec.lead)
    if X.shape[0] <= hp.washout:
        raise DataError(
            f"only {X.shape[0]} training pairs for lags={hp.lags}, lead={spec.lead}; washout is {hp.washout}"
        )
    res_seed, emb_seed = member_seeds(seed)
    S = None
    if spec.kind == "aesn":
        S = normalized_adjacency(graph)
        if embedding is None:
            embedding = sample_embedding(panel.n_s, hp.lags, hp.k_embed, hp.a_u, emb_seed)
    else:
        embedding = None
    Z = _features(spec.kind, X, embedding, S)
    if reservoir is None:
        cfg = ReservoirConfig(
            n_h=hp.n_h, n_in=Z.shape[1], nu=hp.nu, alpha=hp.alpha,
            a_res=hp.a_res, a_in=hp.a_in, pi_res=hp.pi_res,
        )
        reservoir = sample_reservoir(cfg, res_seed)
    states = run(reservoir, hp.nu, hp.alpha, Z, washout=hp.washout)
    readout = fit_ridge(states.H, Y[hp.washout:].T, hp.tau, intercept=True)
    return FittedModel(
        spec=spec, reservoir=reservoir, readout=readout, h_last=states.h_last,
        graph=graph, region_ids=panel.region_ids, start_time=panel.times[0],
        train_len=panel.T, transform_state=panel.transform_state, seed=int(seed),
        embedding=embedding, eof_basis=basis, center=center, scale=scale,
    )


def hidden_states(mf: FittedModel, panel: Panel, upto: int) -> np.ndarray:
    """Reservoir states for times ``lags*lead .. upto`` (inclusive), ``n_h x N``.

    Only rows ``<= upto - lead`` of ``panel`` are read.
    """
    _check_panel(mf, panel)
    hp, lead = mf.spec.hyper, mf.spec.lead
    first = hp.lags * lead
    if upto < first:
        raise DataError(f"target index {upto} precedes the first input time {first}")
    last_row = upto - lead
    if last_row >= panel.T:
        raise DataError(
            f"target index {upto} needs observations up to {last_row}; panel has {panel.T}"
        )
    series = mf.to_model_series(panel.values[: last_row + 1])
    X = lagged_frames(series, hp.lags, lead, np.arange(first, upto + 1))
    S = normalized_adjacency(mf.graph) if mf.spec.kind == "aesn" else None
    Z = _features(mf.spec.kind, X, mf.embedding, S)
    return run(mf.reservoir, hp.nu, hp.alpha, Z, washout=0).H


def _check_panel(mf: FittedModel, panel: Panel):
    if panel.region_ids != mf.region_ids:
        raise DataError("panel regions differ from the fitted model's regions")
    if panel.times[0] != mf.start_time:
        raise DataError(
            f"panel starts at {panel.times[0]} but the model was fitted from {mf.start_time}"
        )
    if panel.transform_state != mf.transform_state:
        raise DataError(
            f"panel is on the {panel.transform_state} scale, model expects {mf.transform_state}"
        )


def predict_at(mf: FittedModel, panel: Panel, targets, original_scale: bool = True) -> np.ndarray:
    """Forecasts for target month indices (counted from the panel start), ``n_s x len(targets)``.

    Each target ``t`` uses observations up to ``t - lead`` only.
    """
    targets = np.asarray(targets, dtype=int)
    if targets.size == 0:
        raise ValueError("no targets")
    first = mf.spec.hyper.lags * mf.spec.lead
    H = hidden_states(mf, panel, int(targets.max()))
    out = mf.from_model_series(predict(mf.readout, H[:, targets - first]))
    return inverse_transform(out, mf.transform_state) if original_scale else out


def forecast(mf: FittedModel, panel: Panel, horizon: int, original_scale: bool = True) -> np.ndarray:
    """Forecast the ``horizon`` months after the end of ``panel``.

    With the direct strategy this needs ``horizon <= lead``.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if horizon > mf.spec.lead:
        raise DataError(
            f"horizon {horizon} exceeds lead {mf.spec.lead}: months past the lead have no observed inputs"
        )
    return predict_at(mf, panel, np.arange(panel.T, panel.T + horizon), original_scale)


def target_times(panel: Panel, targets) -> tuple[str, ...]:
    start = month_index(panel.times[0])
    return tuple(month_stamp(start + int(t)) for t in targets)


# --- artifact serialization -------------------------------------------------

def save_model(mf: FittedModel, path: str | Path) -> None:
    """Write a versioned ``.npz`` holding weights plus a JSON metadata record."""
    meta = {
        "format": ARTIFACT_FORMAT,
        "version": ARTIFACT_VERSION,
        "kind": mf.spec.kind,
        "lead": mf.spec.lead,
        "standardize": mf.spec.standardize,
        "hyper": mf.spec.hyper.to_dict(),
        "seed": mf.seed,
        "region_ids": list(mf.region_ids),
        "edges": [list(e) for e in mf.graph.edges],
        "start_time": mf.start_time,
        "train_len": mf.train_len,
        "transform_state": mf.transform_state,
        "lam_w": mf.reservoir.lam_w,
        "activation": mf.reservoir.activation,
        "tau": mf.readout.tau,
        "sigma2": mf.readout.sigma2,
    }
    W = mf.reservoir.W_res.tocsr()
    arrays = {
        "w_res_data": W.data, "w_res_indices": W.indices, "w_res_indptr": W.indptr,
        "w_in": mf.reservoir.W_in, "w_out": mf.readout.W_out, "h_last": mf.h_last,
    }
    if mf.embedding is not None:
        arrays["embedding_u"] = mf.embedding.U
        meta["a_u"] = mf.embedding.a_u
    if mf.center is not None:
        arrays["center"] = mf.center
        arrays["scale"] = mf.scale
    if mf.eof_basis is not None:
        arrays["eof_mean"] = mf.eof_basis.mean
        arrays["eof_basis"] = mf.eof_basis.basis
        arrays["eof_singular_values"] = mf.eof_basis.singular_values
    arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    Path(path).write_bytes(buf.getvalue())


def load_model(path: str | Path) -> FittedModel:
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(z["meta"].tobytes().decode())
        if meta.get("format") != ARTIFACT_FORMAT:
            raise DataError(f"{path}: not a model artifact")
        if meta.get("version") != ARTIFACT_VERSION:
            raise DataError(f"{path}: unsupported artifact version {meta.get('version')}")
        n_h = z["w_in"].shape[0]
        W_res = sparse.csr_matrix((z["w_res_data"], z["w_res_indices"], z["w_res_indptr"]), shape=(n_h, n_h))
        reservoir = Reservoir(W_res=W_res, W_in=z["w_in"], lam_w=meta["lam_w"], activation=meta["activation"])
        readout = Readout(W_out=z["w_out"], tau=meta["tau"], sigma2=meta["sigma2"], intercept=True)
        embedding = ArealEmbedding(U=z["embedding_u"], a_u=meta["a_u"]) if "embedding_u" in z else None
        basis = None
        if "eof_basis" in z:
            basis = eof_mod.EofBasis(z["eof_mean"], z["eof_basis"], z["eof_singular_values"])
        h_last = z["h_last"]
        center = z["center"] if "center" in z else None
        scale = z["scale"] if "scale" in z else None
    spec = ModelSpec(kind=meta["kind"], hyper=HyperParams.from_dict(meta["hyper"]), lead=meta["lead"],
                     standardize=meta["standardize"])
    graph = from_edge_list([tuple(e) for e in meta["edges"]], len(meta["region_ids"]))
    return FittedModel(
        spec=spec, reservoir=reservoir, readout=readout, h_last=h_last, graph=graph,
        region_ids=tuple(meta["region_ids"]), start_time=meta["start_time"],
        train_len=meta["train_len"], transform_state=meta["transform_state"],
        seed=meta["seed"], embedding=embedding, eof_basis=basis, center=center, scale=scale,
    )
