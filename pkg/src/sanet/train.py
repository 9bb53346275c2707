"""Training loops for trajectory classification and missing-data imputation."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .complex import SimplicialComplex
from .config import ModelConfig, OptimConfig, RunConfig
from .data.io import MdiInstance, TrajectoryInstance
from .data.mdi import imputation_accuracy, within_tolerance
from .errors import DivergedLoss, EmptyInput
from .hodge import ProjectorSpec, clamp_epsilon
from .nn import losses
from .nn.autograd import Tape, backward
from .nn.optim import Adam, EarlyStopping, PlateauScheduler
from .san.layers import SanLayerConfig, SimplicialOperators, reduction_config
from .san.model import SanModel

METRIC_COLUMNS = ("epoch", "loss", "lr", "train_acc", "test_acc")
DIVERGE_FACTOR = 1e6
DIVERGE_EPOCHS = 5


@dataclass
class TrainResult:
    model: SanModel
    history: list[dict]
    metrics: dict
    epsilon: float | None = None
    stopped_early: bool = False
    extra: dict = field(default_factory=dict)


# -- model construction ------------------------------------------------------------------

def resolve_epsilon(mc: ModelConfig, ops: SimplicialOperators) -> float | None:
    """Projector step after clamping to the admissible bound of this complex."""
    if mc.arch == "san" and mc.harmonic in (None, "projector") and mc.j_h > 0:
        return clamp_epsilon(ops.L, mc.epsilon)
    if mc.arch == "scnn" and mc.harmonic == "projector":
        return clamp_epsilon(ops.L, mc.epsilon)
    return None


def layer_config(mc: ModelConfig, f_in: int, f_out: int, sigma: str,
                 epsilon: float | None) -> SanLayerConfig:
    common = dict(sigma=sigma, heads=mc.heads, head_combine=mc.head_combine)
    if mc.arch in ("san", "san-no-harmonic", "scnn"):
        common.update(j_down=mc.j_down, j_up=mc.j_up)
    if mc.arch == "san":
        harmonic = mc.harmonic or ("projector" if mc.j_h > 0 else "skip")
        if harmonic == "projector":
            return reduction_config("san", f_in, f_out, projector=ProjectorSpec(epsilon, mc.j_h), **common)
        return reduction_config("san-no-harmonic", f_in, f_out, harmonic=harmonic, **common)
    if mc.arch == "scnn" and mc.harmonic is not None:
        common.update(harmonic=mc.harmonic)
        if mc.harmonic == "projector":
            common.update(projector=ProjectorSpec(epsilon, mc.j_h))
    return reduction_config(mc.arch, f_in, f_out, **common)


def build_model(cfg: RunConfig, ops: SimplicialOperators, f_in: int = 1,
                n_classes: int = 2) -> tuple[SanModel, float | None]:
    mc = cfg.model
    eps = resolve_epsilon(mc, ops)
    layers = []
    width = f_in
    per_simplex = mc.readout == "per_simplex_linear"
    for i in range(mc.layers):
        last = i == mc.layers - 1
        if per_simplex and last:
            # the estimate itself: one feature, no squashing
            cfg_i = replace(layer_config(mc, width, 1, "identity", eps), heads=1)
        else:
            cfg_i = layer_config(mc, width, mc.features, mc.sigma, eps)
        layers.append(cfg_i)
        width = cfg_i.out_width
    model = SanModel(layers, readout=mc.readout, n_classes=n_classes, mlp_hidden=mc.mlp_hidden,
                     gain=mc.gain, dropout=cfg.optim.dropout, seed=cfg.seed,
                     n_simplices=ops.n)
    return model, eps


# -- helpers ------------------------------------------------------------------------------------

def metrics_csv(history: list[dict]) -> str:
    """Metrics table with ``repr`` floats so it parses back exactly."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_COLUMNS)
    for row in history:
        w.writerow([row["epoch"]] + [repr(float(row[c])) for c in METRIC_COLUMNS[1:]])
    return buf.getvalue()


def parse_metrics_csv(text: str) -> list[dict]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != METRIC_COLUMNS:
        raise ValueError("not a metrics file")
    return [{"epoch": int(r[0]), **{c: float(v) for c, v in zip(METRIC_COLUMNS[1:], r[1:])}} for r in rows[1:]]


class DivergenceGuard:
    """Abort on a non-finite loss or one far above the untrained loss for several epochs."""

    def __init__(self, initial: float, factor: float = DIVERGE_FACTOR, epochs: int = DIVERGE_EPOCHS):
        if not math.isfinite(initial):
            raise DivergedLoss(f"loss of the untrained model is {initial}")
        self.factor = factor
        self.epochs = epochs
        self.initial = abs(initial)
        self.count = 0

    def check(self, epoch: int, loss: float) -> None:
        if not math.isfinite(loss):
            raise DivergedLoss(f"epoch {epoch}: loss is {loss}")
        if abs(loss) > self.factor * max(self.initial, 1e-300):
            self.count += 1
            if self.count >= self.epochs:
                raise DivergedLoss(
                    f"epoch {epoch}: loss {loss:.4g} above {self.factor:g}x its initial value "
                    f"{self.initial:.4g} for {self.epochs} epochs")
        else:
            self.count = 0


def _rngs(seed: int):
    return np.random.default_rng([seed, 1]), np.random.default_rng([seed, 2])


def _loss_with_penalty(loss, model: SanModel, l2: float):
    if l2 == 0:
        return loss
    return loss + losses.l2_penalty(model.regularized_parameters(), l2)


# -- trajectory classification --------------------------------------------------------------

def stack_trajectories(instances: list[TrajectoryInstance]):
    if not instances:
        raise EmptyInput("no trajectories")
    X = np.stack([t.edge_signal for t in instances])[..., None]
    y = np.array([t.label for t in instances], dtype=np.int64)
    if all(t.orientation is None for t in instances):
        signs = None
    else:
        signs = np.stack([t.orientation if t.orientation is not None else np.ones(X.shape[1])
                          for t in instances])[..., None]
    return X, y, signs


def predict_logits(model: SanModel, ops, X, signs=None, batch_size: int = 64) -> np.ndarray:
    out = []
    for s in range(0, len(X), batch_size):
        sb = None if signs is None else signs[s:s + batch_size]
        out.append(model(X[s:s + batch_size], ops, signs=sb).value)
    return np.concatenate(out)


def evaluate_classifier(model: SanModel, ops, instances) -> tuple[float, float]:
    """(mean cross entropy, accuracy) in inference mode."""
    X, y, signs = stack_trajectories(instances)
    logits = predict_logits(model, ops, X, signs)
    return float(losses.cross_entropy(logits, y).value), float(np.mean(np.argmax(logits, -1) == y))


def classification_accuracy(model: SanModel, ops, instances) -> float:
    return evaluate_classifier(model, ops, instances)[1]


def train_trajectory(cfg: RunConfig, complex_: SimplicialComplex, train: list[TrajectoryInstance],
                     test: list[TrajectoryInstance], log=None) -> TrainResult:
    ops = SimplicialOperators(complex_, 1, cfg.model.normalize_laplacians)
    model, eps = build_model(cfg, ops, f_in=1, n_classes=int(max(t.label for t in train + test)) + 1)
    oc: OptimConfig = cfg.optim
    params = model.parameters()
    opt = Adam(params, oc.lr)
    sched = PlateauScheduler(opt, oc.factor, oc.patience)
    stopper = EarlyStopping(oc.early_stop)
    shuffle_rng, drop_rng = _rngs(cfg.seed)
    X, y, signs = stack_trajectories(train)
    guard = DivergenceGuard(evaluate_classifier(model, ops, train)[0])
    history = []
    stopped = False
    for epoch in range(1, oc.max_epochs + 1):
        lr = opt.lr
        order = shuffle_rng.permutation(len(X))
        for s in range(0, len(X), oc.batch_size):
            idx = order[s:s + oc.batch_size]
            sb = None if signs is None else signs[idx]
            with Tape() as tape:
                logits = model(X[idx], ops, training=True, rng=drop_rng, signs=sb)
                loss = _loss_with_penalty(losses.cross_entropy(logits, y[idx]), model, oc.l2)
            grads = backward(tape, loss, params)
            opt.step(grads)
        # monitored loss: full training set, inference mode (no dropout noise)
        epoch_loss, train_acc = evaluate_classifier(model, ops, train)
        guard.check(epoch, epoch_loss)
        row = dict(epoch=epoch, loss=epoch_loss, lr=lr, train_acc=train_acc,
                   test_acc=classification_accuracy(model, ops, test))
        history.append(row)
        if log:
            log(row)
        sched.step(epoch_loss)
        if stopper.step(epoch_loss):
            stopped = True
            break
    final = history[-1]
    return TrainResult(model, history, dict(accuracy=final["test_acc"], train_accuracy=final["train_acc"],
                                            epochs=len(history)), eps, stopped)


# -- missing-data imputation ----------------------------------------------------------------

def value_scale(inst: MdiInstance) -> float:
    """Median magnitude of the known values; inputs and targets are divided by it."""
    m = float(np.median(np.abs(inst.values[inst.known_mask])))
    return m if m > 0 else 1.0


def predict_values(model: SanModel, ops, inst: MdiInstance, scale: float | None = None) -> np.ndarray:
    """Predictions in the original units."""
    scale = value_scale(inst) if scale is None else scale
    return np.asarray(model(inst.input_features[:, None] / scale, ops).value, dtype=float) * scale


def imputation_metrics(pred: np.ndarray, inst: MdiInstance) -> dict:
    return dict(
        accuracy=imputation_accuracy(pred, inst),
        accuracy_all=imputation_accuracy(pred, inst, missing_only=False),
        mae_missing=float(np.mean(np.abs(pred - inst.values)[inst.missing_mask])),
    )


def train_mdi(cfg: RunConfig, complex_: SimplicialComplex, inst: MdiInstance, log=None) -> TrainResult:
    """Transductive fit on the known entries; ``loss`` is the masked l1 in scaled units."""
    ops = SimplicialOperators(complex_, inst.order, cfg.model.normalize_laplacians)
    model, eps = build_model(cfg, ops, f_in=1)
    oc = cfg.optim
    params = model.parameters()
    opt = Adam(params, oc.lr)
    sched = PlateauScheduler(opt, oc.factor, oc.patience)
    stopper = EarlyStopping(oc.early_stop)
    mask_rng, drop_rng = _rngs(cfg.seed)
    scale = value_scale(inst)
    Z0 = inst.input_features[:, None] / scale
    target = inst.values / scale
    known = inst.known_mask
    known_idx = np.flatnonzero(known)
    fill = float(np.median(target[known]))
    n_hide = int(round(oc.remask * known_idx.size))

    def known_loss(p):
        return float(np.mean(np.abs(p - inst.values)[known])) / scale

    guard = DivergenceGuard(known_loss(predict_values(model, ops, inst, scale)))
    history = []
    stopped = False
    for epoch in range(1, oc.max_epochs + 1):
        lr = opt.lr
        Z = Z0
        if n_hide:
            Z = Z0.copy()
            Z[mask_rng.choice(known_idx, size=n_hide, replace=False)] = fill
        with Tape() as tape:
            pred = model(Z, ops, training=True, rng=drop_rng)
            loss = _loss_with_penalty(losses.masked_l1(pred, target, known), model, oc.l2)
        grads = backward(tape, loss, params)
        opt.step(grads)
        p = predict_values(model, ops, inst, scale)
        epoch_loss = known_loss(p)
        guard.check(epoch, epoch_loss)
        row = dict(epoch=epoch, loss=epoch_loss, lr=lr,
                   train_acc=float(within_tolerance(p[known], inst.values[known]).mean()),
                   test_acc=imputation_accuracy(p, inst))
        history.append(row)
        if log:
            log(row)
        sched.step(epoch_loss)
        if stopper.step(epoch_loss):
            stopped = True
            break
    pred = predict_values(model, ops, inst, scale)
    metrics = {**imputation_metrics(pred, inst), "epochs": len(history), "scale": scale}
    return TrainResult(model, history, metrics, eps, stopped)
