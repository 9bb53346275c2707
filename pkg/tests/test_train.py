import json
import warnings
from dataclasses import replace

import numpy as np
import pytest

from sanet.config import config_from_dict, load_config, override, task_defaults
from sanet.data.mdi import generate_coauthorship, generate_mdi_instance
from sanet.data.synthetic_flow import generate_synthetic_flow
from sanet.errors import ConfigError, DivergedLoss
from sanet.hodge import admissible_epsilon
from sanet.san.layers import SimplicialOperators
from sanet.train import (
    DivergenceGuard,
    build_model,
    metrics_csv,
    parse_metrics_csv,
    resolve_epsilon,
    train_mdi,
    train_trajectory,
    value_scale,
)
from strategies import filled_and_hollow


@pytest.fixture(scope="module")
def tiny_flow():
    return generate_synthetic_flow(n_points=60, n_train=16, n_test=8, seed=2)


def tiny_cfg(task="trajectory", **optim):
    cfg = task_defaults(task)
    cfg = override(cfg, "optim", **{"max_epochs": 3, **optim})
    if task == "mdi":
        cfg = override(cfg, "model", features=8, layers=2)
    return cfg


# -- configuration ---------------------------------------------------------------------------

def test_defaults_validate():
    for task in ("trajectory", "mdi"):
        task_defaults(task).validate()


def test_unknown_keys_and_bad_values_rejected(tmp_path):
    with pytest.raises(ConfigError):
        config_from_dict({"model": {"widht": 3}})
    with pytest.raises(ConfigError):
        config_from_dict({"extra": 1})
    with pytest.raises(ConfigError):
        config_from_dict({"optim": {"dropout": 1.0}}).validate()
    with pytest.raises(ConfigError):
        config_from_dict({"data": {"complex": str(tmp_path / "missing.txt")}}).validate()
    with pytest.raises(ConfigError):
        config_from_dict({"task": "regression"}).validate()
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)


def test_config_file_round_trip(tmp_path):
    cfg = override(task_defaults("mdi"), "model", features=32)
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert load_config(p) == cfg


def test_override_ignores_none_and_sets_seed():
    cfg = task_defaults("trajectory")
    assert override(cfg, "model", arch=None) == cfg
    assert override(cfg, "run", seed=7).seed == 7


# -- model construction ------------------------------------------------------------------------

def test_epsilon_is_clamped_for_projector_models_only():
    ops = SimplicialOperators(filled_and_hollow(), 1)
    cfg = task_defaults("trajectory")
    with pytest.warns(UserWarning, match="clamping"):
        eps = resolve_epsilon(cfg.model, ops)
    assert eps == admissible_epsilon(ops.L)
    assert resolve_epsilon(replace(cfg.model, j_h=0), ops) is None
    assert resolve_epsilon(replace(cfg.model, arch="snn"), ops) is None


@pytest.mark.parametrize("arch", ["san", "san-no-harmonic", "scnn", "snn", "sat", "gat"])
def test_every_architecture_builds_and_runs(arch):
    ops = SimplicialOperators(filled_and_hollow(), 1)
    cfg = override(task_defaults("trajectory"), "model", arch=arch)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        model, _ = build_model(cfg, ops)
    assert model(np.ones((2, ops.n, 1)), ops).shape == (2, 2)


def test_per_simplex_last_layer_is_linear_and_scalar():
    ops = SimplicialOperators(filled_and_hollow(), 1)
    model, _ = build_model(override(task_defaults("mdi"), "model", features=4), ops)
    assert model.layers[-1].f_out == 1 and model.layers[-1].sigma == "identity"
    assert all(c.sigma == "relu" for c in model.layers[:-1])
    assert model(np.ones((ops.n, 1)), ops).shape == (ops.n,)


# -- bookkeeping ------------------------------------------------------------------------------

def test_metrics_csv_round_trip_is_exact():
    rows = [dict(epoch=1, loss=0.1 + 0.2, lr=0.01, train_acc=0.5, test_acc=1 / 3)]
    text = metrics_csv(rows)
    assert text.splitlines()[0] == "epoch,loss,lr,train_acc,test_acc"
    assert parse_metrics_csv(text) == rows


def test_divergence_guard():
    guard = DivergenceGuard(1.0, factor=10.0, epochs=2)
    guard.check(1, 50.0)
    guard.check(2, 5.0)
    guard.check(3, 50.0)
    with pytest.raises(DivergedLoss):
        guard.check(4, 60.0)
    with pytest.raises(DivergedLoss):
        DivergenceGuard(1.0).check(1, float("nan"))


# -- training loops ----------------------------------------------------------------------------

def test_trajectory_training_is_deterministic(tiny_flow):
    cfg = tiny_cfg()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = train_trajectory(cfg, tiny_flow.complex, tiny_flow.train, tiny_flow.test)
        b = train_trajectory(cfg, tiny_flow.complex, tiny_flow.train, tiny_flow.test)
    assert metrics_csv(a.history) == metrics_csv(b.history)
    assert len(a.history) == 3
    assert [r["epoch"] for r in a.history] == [1, 2, 3]


def test_trajectory_loss_decreases(tiny_flow):
    cfg = override(tiny_cfg(), "optim", max_epochs=15, dropout=0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = train_trajectory(cfg, tiny_flow.complex, tiny_flow.train, tiny_flow.test)
    assert res.history[-1]["loss"] < res.history[0]["loss"]


def test_early_stopping_ends_training(tiny_flow):
    # steps of 1e-300 leave every parameter bit-identical, so the loss never improves
    cfg = override(tiny_cfg(), "optim", max_epochs=50, early_stop=1, lr=1e-300)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = train_trajectory(cfg, tiny_flow.complex, tiny_flow.train, tiny_flow.test)
    assert res.stopped_early and len(res.history) < 50


@pytest.fixture(scope="module")
def tiny_mdi():
    co = generate_coauthorship(n_authors=40, n_papers=30, seed=0)
    return co.complex, generate_mdi_instance(co.complex, 1, co.values(1), seed=0)


def test_mdi_training_runs_and_reports_metrics(tiny_mdi):
    X, inst = tiny_mdi
    res = train_mdi(tiny_cfg("mdi"), X, inst)
    m = res.metrics
    assert set(m) >= {"accuracy", "accuracy_all", "mae_missing", "scale"}
    assert 0.0 <= m["accuracy"] <= 1.0
    assert m["scale"] == value_scale(inst)


def test_mdi_training_is_deterministic(tiny_mdi):
    X, inst = tiny_mdi
    cfg = tiny_cfg("mdi")
    assert metrics_csv(train_mdi(cfg, X, inst).history) == metrics_csv(train_mdi(cfg, X, inst).history)


def test_mdi_loss_decreases(tiny_mdi):
    X, inst = tiny_mdi
    res = train_mdi(tiny_cfg("mdi", max_epochs=20), X, inst)
    assert min(r["loss"] for r in res.history) < res.history[0]["loss"]
