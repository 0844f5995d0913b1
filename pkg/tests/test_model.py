import numpy as np
import pytest

from aesn.data import Panel, synth_generate, to_log_thousands
from aesn.data.panel import LOG_THOUSANDS, month_range
from aesn.embedding import ArealEmbedding
from aesn.eof import compute_eofs, project, reconstruct
from aesn.errors import ConfigError, DataError
from aesn.graph import from_edge_list, lattice_graph, normalized_adjacency
from aesn.hyper import HyperParams
from aesn.model import (
    ModelSpec, build_inputs, fit, forecast, hidden_states, load_model, member_seeds,
    predict_at, save_model,
)
from aesn.readout import predict
from aesn.reservoir import Reservoir, run

HP = HyperParams(n_h=60, k_embed=4, lags=2, tau=1e-3, a_in=0.3, a_u=0.5, nu=0.8, alpha=0.9)


def _panel(values, start="2020-01", state=LOG_THOUSANDS):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    ids = tuple(f"r{i}" for i in range(values.shape[1]))
    return Panel(region_ids=ids, times=month_range(start, values.shape[0]), values=values,
                 transform_state=state)


def test_build_inputs_stride_one():
    X, Y = build_inputs(np.arange(1.0, 6.0), lags=2, lead=1)
    assert [X[i, 0].tolist() for i in range(3)] == [[2, 1], [3, 2], [4, 3]]
    assert Y[:, 0].tolist() == [3, 4, 5]


def test_build_inputs_stride_lead():
    X, Y = build_inputs(np.arange(1.0, 6.0), lags=1, lead=2)
    assert X[:, 0, 0].tolist() == [1, 2, 3]
    assert Y[:, 0].tolist() == [3, 4, 5]


def test_build_inputs_needs_history():
    with pytest.raises(DataError):
        build_inputs(np.arange(4.0), lags=2, lead=2)


def test_spec_validation():
    with pytest.raises(ConfigError):
        ModelSpec("aesn", HP, lead=0)
    with pytest.raises(ConfigError):
        ModelSpec("dlm", HP, lead=1)
    assert ModelSpec("esn-eof", HP, lead=1).kind == "esn_eof"
    with pytest.raises(ConfigError):
        HP.update(lags=0)


@pytest.mark.parametrize("kind", ["aesn", "esn", "esn_eof"])
def test_fit_is_deterministic(small_synth, kind):
    _, p, g = small_synth
    spec = ModelSpec(kind, HP, lead=3)
    a, b = fit(spec, p.head(36), g, seed=5), fit(spec, p.head(36), g, seed=5)
    np.testing.assert_array_equal(a.readout.W_out, b.readout.W_out)
    np.testing.assert_array_equal(predict_at(a, p, range(36, 48)), predict_at(b, p, range(36, 48)))


def test_interpolation_regime(small_synth):
    _, p, g = small_synth
    hp = HP.update(n_h=400, tau=1e-10, washout=0)
    mf = fit(ModelSpec("aesn", hp, lead=1, standardize=False), p.head(36), g, seed=2)
    X_first = hp.lags
    H = hidden_states(mf, p.head(36), 35)
    fitted = predict(mf.readout, H)
    err = np.sqrt(np.mean((fitted - p.values[X_first:36].T) ** 2))
    assert err < 1e-3 * np.abs(p.values).max()


@pytest.mark.parametrize("kind", ["aesn", "esn", "esn_eof"])
def test_constant_panel_forecasts_constant(kind):
    hp = HP.update(tau=1e-8)
    g = lattice_graph(2, 3)
    p = _panel(np.full((30, 6), 1.7))
    mf = fit(ModelSpec(kind, hp, lead=2), p, g, seed=1)
    out = forecast(mf, p, horizon=2, original_scale=False)
    np.testing.assert_allclose(out, 1.7, atol=1e-6)


def _onehot(n_s, lags):
    U = np.zeros((lags, n_s, lags))
    for k in range(lags):
        U[k, :, k] = 1.0
    return ArealEmbedding(U=U, a_u=1.0)


@pytest.mark.parametrize("lags", [1, 3])
def test_edgeless_aesn_collapses_to_esn(small_synth, lags):
    """With S = I and U picking lag k into copy k, AESN inputs equal ESN inputs."""
    _, p, _ = small_synth
    g = from_edge_list([], p.n_s)
    hp = HP.update(lags=lags, k_embed=lags)
    esn = fit(ModelSpec("esn", hp, lead=3), p.head(36), g, seed=9)
    aesn = fit(ModelSpec("aesn", hp, lead=3), p.head(36), g, seed=9, embedding=_onehot(p.n_s, lags))
    np.testing.assert_array_equal(esn.reservoir.W_in, aesn.reservoir.W_in)
    np.testing.assert_array_equal(hidden_states(esn, p, 47), hidden_states(aesn, p, 47))
    np.testing.assert_array_equal(predict_at(esn, p, range(36, 48)), predict_at(aesn, p, range(36, 48)))


def test_edgeless_all_ones_single_lag_collapse(small_synth):
    _, p, _ = small_synth
    g = from_edge_list([], p.n_s)
    hp = HP.update(lags=1, k_embed=1)
    ones = ArealEmbedding(U=np.ones((1, p.n_s, 1)), a_u=1.0)
    esn = fit(ModelSpec("esn", hp, lead=2), p.head(36), g, seed=4)
    aesn = fit(ModelSpec("aesn", hp, lead=2), p.head(36), g, seed=4, embedding=ones)
    np.testing.assert_array_equal(hidden_states(esn, p, 40), hidden_states(aesn, p, 40))


def _permuted_weights(mf, order):
    """Embedding and reservoir that see permuted locations exactly as the originals saw them."""
    n_s, K = mf.n_s, mf.embedding.K
    U = mf.embedding.U[:, order, :]
    cols = np.concatenate([k * n_s + np.asarray(order) for k in range(K)])
    res = Reservoir(W_res=mf.reservoir.W_res, W_in=mf.reservoir.W_in[:, cols], lam_w=mf.reservoir.lam_w)
    return ArealEmbedding(U=U, a_u=mf.embedding.a_u), res


@pytest.mark.parametrize("standardize", [True, False])
def test_permutation_equivariance(small_synth, standardize):
    _, p, g = small_synth
    spec = ModelSpec("aesn", HP, lead=3, standardize=standardize)
    mf = fit(spec, p.head(36), g, seed=11)
    order = np.random.default_rng(0).permutation(p.n_s)
    emb, res = _permuted_weights(mf, order)
    pp, gp = p.permute(order), g.permute(order)
    mfp = fit(spec, pp.head(36), gp, seed=11, embedding=emb, reservoir=res)
    a = predict_at(mf, p, range(36, 48))
    b = predict_at(mfp, pp, range(36, 48))
    np.testing.assert_allclose(b, a[order], rtol=1e-9)


def test_two_node_permutation():
    raw, g = synth_generate(1, 2, 30, seed=2)
    p = to_log_thousands(raw)
    spec = ModelSpec("aesn", HP.update(lags=1), lead=1)
    mf = fit(spec, p.head(24), g, seed=3)
    emb, res = _permuted_weights(mf, [1, 0])
    mfp = fit(spec, p.permute([1, 0]).head(24), g.permute([1, 0]), seed=3, embedding=emb, reservoir=res)
    np.testing.assert_allclose(predict_at(mfp, p.permute([1, 0]), range(24, 30)),
                               predict_at(mf, p, range(24, 30))[[1, 0]], rtol=1e-9)


@pytest.mark.parametrize("kind", ["aesn", "esn", "esn_eof"])
def test_direct_lead_never_reads_ahead(small_synth, kind):
    _, p, g = small_synth
    lead = 3
    mf = fit(ModelSpec(kind, HP, lead=lead), p.head(36), g, seed=6)
    target = 41
    base = predict_at(mf, p, [target])
    noisy = p.values.copy()
    noisy[target - lead + 1:] += 100.0
    np.testing.assert_array_equal(predict_at(mf, p.with_values(noisy), [target]), base)
    noisy[target - lead] += 1.0
    assert not np.array_equal(predict_at(mf, p.with_values(noisy), [target]), base)


def test_forecast_horizon_rules(small_synth):
    _, p, g = small_synth
    mf = fit(ModelSpec("aesn", HP, lead=3), p.head(36), g, seed=6)
    train = p.head(36)
    np.testing.assert_array_equal(forecast(mf, train, 1), predict_at(mf, train, [36]))
    assert forecast(mf, train, 3).shape == (p.n_s, 3)
    with pytest.raises(DataError):
        forecast(mf, train, 4)
    with pytest.raises(ValueError):
        forecast(mf, train, 0)
    with pytest.raises(DataError):
        predict_at(mf, train, [40])


def test_forecast_on_original_scale(small_synth):
    raw, p, g = small_synth
    mf = fit(ModelSpec("esn", HP, lead=3), p.head(36), g, seed=6)
    np.testing.assert_allclose(forecast(mf, p.head(36), 3),
                               1000 * np.exp(forecast(mf, p.head(36), 3, original_scale=False)))


def test_panel_mismatch_rejected(small_synth):
    raw, p, g = small_synth
    mf = fit(ModelSpec("esn", HP, lead=3), p.head(36), g, seed=6)
    with pytest.raises(DataError):
        predict_at(mf, raw, [36])
    with pytest.raises(DataError):
        predict_at(mf, p.window(1, 48), [36])
    with pytest.raises(DataError):
        fit(ModelSpec("aesn", HP, lead=3), p, lattice_graph(2, 2), seed=0)


def test_eof_full_rank_reconstructs_training_data(small_synth):
    _, p, g = small_synth
    hp = HP.update(n_eof=p.n_s)
    mf = fit(ModelSpec("esn_eof", hp, lead=3), p.head(36), g, seed=1)
    tr = p.values[:36]
    np.testing.assert_allclose(mf.from_model_series(mf.to_model_series(tr).T).T, tr, atol=1e-8)
    b = compute_eofs(tr, p.n_s)
    np.testing.assert_allclose(reconstruct(b, project(b, tr)), tr, atol=1e-8)


def test_eof_default_count_uses_variance_rule(small_synth):
    _, p, g = small_synth
    mf = fit(ModelSpec("esn_eof", HP, lead=3), p.head(36), g, seed=1)
    assert 1 <= mf.eof_basis.n_eof <= p.n_s
    assert mf.reservoir.n_in == mf.eof_basis.n_eof * HP.lags


def test_too_short_training_window(small_synth):
    _, p, g = small_synth
    with pytest.raises(DataError):
        fit(ModelSpec("aesn", HP.update(lags=3), lead=12), p.head(36), g, seed=0)


@pytest.mark.parametrize("kind", ["aesn", "esn", "esn_eof"])
def test_artifact_round_trip(tmp_path, small_synth, kind):
    _, p, g = small_synth
    mf = fit(ModelSpec(kind, HP, lead=3), p.head(36), g, seed=8)
    path = tmp_path / "m.npz"
    save_model(mf, path)
    back = load_model(path)
    assert back.spec == mf.spec and back.seed == mf.seed and back.graph.edges == g.edges
    np.testing.assert_array_equal(predict_at(back, p, range(36, 48)), predict_at(mf, p, range(36, 48)))
    save_model(back, tmp_path / "m2.npz")
    assert (tmp_path / "m2.npz").read_bytes() == path.read_bytes()


def test_artifact_format_checked(tmp_path):
    path = tmp_path / "bad.npz"
    meta = np.frombuffer(b'{"format": "other"}', dtype=np.uint8)
    np.savez(path, meta=meta, w_in=np.zeros((1, 1)))
    with pytest.raises(DataError):
        load_model(path)


def test_member_seeds_distinct():
    a, b = member_seeds(3)
    assert a != b and member_seeds(3) == (a, b) and member_seeds(4) != (a, b)


def test_hidden_states_warm_start_equivalence(small_synth):
    """Forecast-time states (from zero, no washout) reproduce the training trajectory."""
    _, p, g = small_synth
    mf = fit(ModelSpec("aesn", HP, lead=3), p.head(36), g, seed=8)
    H = hidden_states(mf, p.head(36), 35)
    np.testing.assert_allclose(H[:, -1], mf.h_last, atol=1e-14)
    S = normalized_adjacency(g)
    assert S.n_s == p.n_s
    assert run(mf.reservoir, HP.nu, HP.alpha, np.zeros((2, mf.reservoir.n_in)), washout=0).H.shape[1] == 2
