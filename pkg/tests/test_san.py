from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sanet.complex import build_complex
from sanet.config import task_defaults
from sanet.errors import FingerprintMismatch, ShapeMismatch
from sanet.hodge import ProjectorSpec, exact_harmonic_projector
from sanet.nn import functional as F
from sanet.san.checkpoint import load_checkpoint, save_checkpoint
from sanet.san.layers import (
    SanLayerConfig,
    SimplicialOperators,
    head_preactivation,
    init_layer_params,
    matrix_polynomial,
    multi_head,
    param_count,
    reduction_config,
    san_layer_forward,
)
from sanet.san.model import SanModel
from sanet.train import layer_config
from strategies import complexes, filled_and_hollow, hollow_triangle

SIGMA = {"identity": lambda x: x, "relu": lambda x: np.maximum(x, 0), "tanh": np.tanh}


def leaky(x, slope=0.2):
    return np.where(x > 0, x, slope * x)


def dense_attention(H, a, pattern):
    """Row-softmax of leaky([h_i || h_j] a) over the neighbours of each row."""
    n, w = H.shape
    A = np.zeros((n, n))
    for i in range(n):
        nbrs = np.flatnonzero(pattern[i])
        e = np.array([leaky(H[i] @ a[:w, 0] + H[j] @ a[w:, 0]) for j in nbrs])
        e = np.exp(e - e.max())
        A[i, nbrs] = e / e.sum()
    return A


def dense_san_head(Z, X, params, cfg, k=1):
    """Independent dense evaluation of one SAN head on a single input."""
    table = X.neighborhoods(k)
    _, _, L = X.laplacians(k)
    out = np.zeros((Z.shape[0], cfg.f_out))
    for ws, a, pat in ((params.w_up, params.a_up, table.upper), (params.w_down, params.a_down, table.lower)):
        if not ws:
            continue
        H = np.concatenate([Z @ W.value for W in ws], axis=1)
        A = dense_attention(H, a.value, pat.toarray())
        for p, W in enumerate(ws, start=1):
            out += np.linalg.matrix_power(A, p) @ Z @ W.value
    if cfg.harmonic != "off":
        P = np.linalg.matrix_power(np.eye(L.shape[0]) - cfg.projector.epsilon * L.toarray(),
                                   cfg.projector.j_h) if cfg.harmonic == "projector" else np.eye(L.shape[0])
        out += P @ Z @ params.w_h.value
    return out


# -- full SAN layer against the dense reference -------------------------------------------

@pytest.mark.parametrize("sigma", ["identity", "relu", "tanh"])
def test_san_layer_matches_dense_reference(sigma):
    X = filled_and_hollow()
    ops = SimplicialOperators(X, 1)
    cfg = replace(reduction_config("san", 2, 3, j=3, projector=ProjectorSpec(0.2, 5)), sigma=sigma)
    rng = np.random.default_rng(0)
    params = init_layer_params(cfg, rng)
    Z = rng.normal(size=(ops.n, 2))
    got = san_layer_forward(Z, ops, params, cfg).value
    want = SIGMA[sigma](dense_san_head(Z, X, params[0], cfg))
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_batched_forward_matches_per_sample():
    X = filled_and_hollow()
    ops = SimplicialOperators(X, 1)
    cfg = reduction_config("san", 1, 2, j=2, projector=ProjectorSpec(0.2, 3))
    rng = np.random.default_rng(1)
    params = init_layer_params(cfg, rng)
    Z = rng.normal(size=(4, ops.n, 1))
    batched = san_layer_forward(Z, ops, params, cfg).value
    for b in range(4):
        np.testing.assert_allclose(batched[b], san_layer_forward(Z[b], ops, params, cfg).value, atol=1e-13)


def test_attention_rows_are_stochastic_on_the_pattern():
    X = filled_and_hollow()
    ops = SimplicialOperators(X, 1)
    cfg = reduction_config("san", 1, 2, j=2, projector=ProjectorSpec(0.2, 3))
    params = init_layer_params(cfg, np.random.default_rng(2))[0]
    from sanet.san.layers import attention_coefficients, transform_features

    Z = np.random.default_rng(3).normal(size=(ops.n, 1))
    _, h_up = transform_features(Z, params.w_up)
    _, h_down = transform_features(Z, params.w_down)
    att = attention_coefficients(h_up, h_down, params.a_up, params.a_down, ops)
    table = X.neighborhoods(1)
    for which, pat in (("up", table.upper), ("down", table.lower)):
        A = att.to_sparse(which).toarray()
        np.testing.assert_allclose(A.sum(axis=1), 1.0, atol=1e-12)
        assert np.all((A != 0) == pat.toarray())


# -- reductions ------------------------------------------------------------------------

def test_snn_reduction_matches_reference():
    X = filled_and_hollow()
    ops = SimplicialOperators(X, 1)
    cfg = replace(reduction_config("snn", 2, 3), sigma="tanh")
    rng = np.random.default_rng(4)
    params = init_layer_params(cfg, rng)
    Z = rng.normal(size=(ops.n, 2))
    W = params[0].w_down[0].value
    assert params[0].w_up[0] is params[0].w_down[0]
    ref = np.tanh(X.laplacians(1)[2].toarray() @ Z @ W)
    np.testing.assert_allclose(san_layer_forward(Z, ops, params, cfg).value, ref, atol=1e-12)


@pytest.mark.parametrize("j", [1, 2, 4])
def test_scnn_reduction_matches_reference(j):
    X = filled_and_hollow()
    ops = SimplicialOperators(X, 1)
    cfg = replace(reduction_config("scnn", 2, 3, j=j), sigma="relu")
    rng = np.random.default_rng(5)
    params = init_layer_params(cfg, rng)[0]
    Z = rng.normal(size=(ops.n, 2))
    down, up, _ = (M.toarray() for M in X.laplacians(1))
    ref = Z @ params.w_h.value
    for p in range(1, j + 1):
        ref = ref + np.linalg.matrix_power(down, p) @ Z @ params.w_down[p - 1].value
        ref = ref + np.linalg.matrix_power(up, p) @ Z @ params.w_up[p - 1].value
    np.testing.assert_allclose(san_layer_forward(Z, ops, [params], cfg).value, np.maximum(ref, 0), atol=1e-12)


def test_scnn_with_projector_matches_exact_kernel_limit():
    X = filled_and_hollow()
    ops = SimplicialOperators(X, 1)
    L = X.laplacians(1)[2]
    eps = 1.0 / np.linalg.eigvalsh(L.toarray())[-1]
    cfg = reduction_config("scnn", 1, 1, j=1, harmonic="projector", projector=ProjectorSpec(eps, 400),
                           j_down=0, j_up=0)
    params = init_layer_params(cfg, np.random.default_rng(6))
    Z = np.random.default_rng(7).normal(size=(ops.n, 1))
    ref = exact_harmonic_projector(L) @ Z @ params[0].w_h.value
    np.testing.assert_allclose(san_layer_forward(Z, ops, params, cfg).value, ref, atol=1e-10)


def scalar_gat(x, adj, w, a_src, a_dst, slope=0.2):
    """Node-level GAT with scalar features, written with plain loops."""
    n = len(x)
    h = [w * xi for xi in x]
    out = []
    for i in range(n):
        nbrs = [j for j in range(n) if adj[i][j] or i == j]
        e = [h[i] * a_src + h[j] * a_dst for j in nbrs]
        e = [v if v > 0 else slope * v for v in e]
        m = max(e)
        ex = [np.exp(v - m) for v in e]
        s = sum(ex)
        out.append(sum(ex[t] / s * h[j] for t, j in enumerate(nbrs)))
    return np.array(out)


def test_gat_reduction_matches_scalar_oracle():
    # path 0-1-2-3 plus chord 0-2
    X = build_complex([[0, 1], [1, 2], [2, 3], [0, 2]])
    ops = SimplicialOperators(X, 0)
    cfg = reduction_config("gat", 1, 1)
    params = init_layer_params(cfg, np.random.default_rng(8))
    x = np.array([0.3, -1.2, 0.7, 2.0])
    w = params[0].w_up[0].value[0, 0]
    a = params[0].a_up.value[:, 0]
    adj = [[(min(i, j), max(i, j)) in X for j in range(4)] for i in range(4)]
    ref = scalar_gat(x, adj, w, a[0], a[1])
    got = san_layer_forward(x[:, None], ops, params, cfg).value[:, 0]
    np.testing.assert_allclose(got, ref, atol=1e-10)


def test_sat_reduction_shares_attention():
    cfg = reduction_config("sat", 2, 3)
    params = init_layer_params(cfg, np.random.default_rng(9))[0]
    assert params.a_up is params.a_down
    assert params.w_h is None and len(params.w_up) == len(params.w_down) == 1


def test_unknown_reduction_rejected():
    with pytest.raises(ValueError):
        reduction_config("gcn", 1, 1)
    with pytest.raises(ValueError):
        reduction_config("san", 1, 1)


@settings(max_examples=20, deadline=None)
@given(complexes(min_vertices=4), st.integers(0, 2 ** 32 - 1))
def test_fixed_operator_layer_is_orientation_equivariant(X, seed):
    """Flipping edge orientations flips input and output of an odd-sigma SCNN layer."""
    if X.n(1) < 2:
        return
    ops = SimplicialOperators(X, 1)
    cfg = replace(reduction_config("scnn", 1, 2, j=2), sigma="tanh")
    rng = np.random.default_rng(seed)
    params = init_layer_params(cfg, rng)
    Z = rng.normal(size=(ops.n, 1))
    D = rng.choice([-1.0, 1.0], size=(ops.n, 1))
    flipped = san_layer_forward(D * Z, ops, params, cfg, signs=D).value
    np.testing.assert_allclose(flipped, D * san_layer_forward(Z, ops, params, cfg).value, atol=1e-12)


# -- building blocks -----------------------------------------------------------------------

def test_matrix_polynomial_is_horner_of_powers():
    rng = np.random.default_rng(10)
    A = rng.normal(size=(5, 5))
    blocks = [rng.normal(size=(5, 2)) for _ in range(3)]
    got = matrix_polynomial(lambda Y: F.matmul(A, Y), [F.reshape(b, b.shape) for b in blocks]).value
    want = sum(np.linalg.matrix_power(A, p + 1) @ b for p, b in enumerate(blocks))
    np.testing.assert_allclose(got, want, atol=1e-12)
    assert matrix_polynomial(lambda Y: Y, []) is None


def test_multi_head_concat_and_average():
    a, b = np.full((2, 3), -1.0), np.full((2, 3), 3.0)
    np.testing.assert_array_equal(multi_head([a, b], "concat", "relu").value,
                                  np.concatenate([np.zeros((2, 3)), b], axis=1))
    np.testing.assert_array_equal(multi_head([a, b], "average", "identity").value, np.ones((2, 3)))
    with pytest.raises(ShapeMismatch):
        multi_head([a, np.ones((2, 2))], "concat")


def test_head_rejects_wrong_input_shape():
    ops = SimplicialOperators(hollow_triangle(), 1)
    cfg = reduction_config("san-no-harmonic", 2, 2)
    params = init_layer_params(cfg, np.random.default_rng(0))[0]
    with pytest.raises(ShapeMismatch):
        head_preactivation(np.ones((3, 1)), ops, params, cfg)


def test_layer_config_validation():
    with pytest.raises(ValueError):
        SanLayerConfig(1, 1, harmonic="projector")
    with pytest.raises(ValueError):
        SanLayerConfig(1, 1, 1, 2, harmonic="off", tie_weights=True)
    with pytest.raises(ValueError):
        SanLayerConfig(1, 1, harmonic="off", sigma="gelu")


# -- parameter accounting ------------------------------------------------------------------

def test_trajectory_layer_has_76_parameters():
    mc = task_defaults("trajectory").model
    cfg = layer_config(mc, 1, mc.features, mc.sigma, 0.1)
    assert param_count(cfg) == 76
    assert sum(p.size for h in init_layer_params(cfg, np.random.default_rng(0)) for p in h.parameters()) == 76


@st.composite
def layer_configs(draw):
    j = draw(st.integers(0, 4))
    tied = draw(st.booleans())
    shared = draw(st.booleans())
    j_down = j if (tied or shared) else draw(st.integers(0, 4))
    harmonic = draw(st.sampled_from(["projector", "skip", "off"]))
    return SanLayerConfig(
        draw(st.integers(1, 6)), draw(st.integers(1, 6)), j_down, j,
        harmonic=harmonic,
        projector=ProjectorSpec(0.1, draw(st.integers(0, 5))) if harmonic == "projector" else None,
        heads=draw(st.integers(1, 3)),
        head_combine=draw(st.sampled_from(["concat", "average"])),
        attention_enabled=draw(st.booleans()),
        shared_attention=shared,
        tie_weights=tied,
    )


@settings(max_examples=50, deadline=None)
@given(layer_configs())
def test_param_count_matches_registered_parameters(cfg):
    params = init_layer_params(cfg, np.random.default_rng(0))
    assert param_count(cfg) == sum(p.size for h in params for p in h.parameters())


# -- model and checkpoints --------------------------------------------------------------------

def small_model(readout, n):
    cfg = reduction_config("san", 1, 2, j=2, projector=ProjectorSpec(0.2, 2))
    last = replace(cfg, f_in=2, f_out=1) if readout == "per_simplex_linear" else replace(cfg, f_in=2)
    return SanModel([cfg, last], readout=readout, n_classes=3, seed=4, n_simplices=n)


@pytest.mark.parametrize("readout,shape", [("mean_pool_mlp", (5, 3)), ("flatten_mlp", (5, 3)),
                                           ("per_simplex_linear", (5, 8))])
def test_model_output_shapes(readout, shape):
    ops = SimplicialOperators(filled_and_hollow(), 1)
    model = small_model(readout, ops.n)
    assert model(np.ones((5, ops.n, 1)), ops).shape == shape


def test_checkpoint_round_trip_and_fingerprint(tmp_path):
    X = filled_and_hollow()
    ops = SimplicialOperators(X, 1)
    model = small_model("flatten_mlp", ops.n)
    Z = np.random.default_rng(0).normal(size=(2, ops.n, 1))
    path = tmp_path / "ck.json"
    save_checkpoint(path, model, X.fingerprint, {"arch": "san"})
    loaded, blob = load_checkpoint(path, X.fingerprint)
    assert blob["meta"]["arch"] == "san"
    np.testing.assert_array_equal(loaded(Z, ops).value, model(Z, ops).value)
    with pytest.raises(FingerprintMismatch):
        load_checkpoint(path, hollow_triangle().fingerprint)


def test_dropout_only_in_training():
    ops = SimplicialOperators(filled_and_hollow(), 1)
    cfg = reduction_config("san", 1, 4, j=1, projector=ProjectorSpec(0.2, 1))
    model = SanModel([cfg], dropout=0.5, seed=0)
    Z = np.ones((ops.n, 1))
    np.testing.assert_array_equal(model(Z, ops).value, model(Z, ops).value)
    noisy = model(Z, ops, training=True, rng=np.random.default_rng(0)).value
    assert not np.allclose(noisy, model(Z, ops).value)
