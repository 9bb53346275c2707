"""Command-line entry point: gen, inspect, train, eval, gradcheck."""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from contextlib import nullcontext
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import errors
from .complex import SimplicialComplex, build_complex
from .config import RunConfig, load_config, override, task_defaults
from .data.io import (
    load_complex,
    load_mdi,
    load_trajectories,
    save_complex,
    save_mdi,
    save_trajectories,
    write_manifest,
)
from .data.mdi import generate_coauthorship, generate_mdi_instance
from .data.synthetic_flow import generate_synthetic_flow, validate_holes
from .hodge import lambda_max, spectral_basis
from .nn import losses
from .nn.gradcheck import gradcheck
from .san.checkpoint import load_checkpoint, save_checkpoint
from .san.layers import ARCHITECTURES, SimplicialOperators
from .san.model import READOUTS
from .train import (
    build_model,
    evaluate_classifier,
    imputation_metrics,
    metrics_csv,
    predict_values,
    train_mdi,
    train_trajectory,
)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
GRADCHECK_MAX_EDGES = 30

CONFIG_ERRORS = (errors.ConfigError,)
DATA_ERRORS = (
    errors.ParseError, errors.EmptyInput, errors.DimensionMismatch, errors.FingerprintMismatch,
    errors.DegenerateTriangulation, errors.DisconnectedAfterHolePunch, errors.DuplicateVertex,
    errors.EmptyMask, errors.EmptyNeighborhood, errors.OrderOutOfRange, FileNotFoundError,
)
NUMERIC_ERRORS = (errors.DivergedLoss, errors.EigenFailure, errors.EpsilonOutOfRange, FloatingPointError)

ORIENTATION_FILE = "test_orientation.txt"


# -- argument parsing ----------------------------------------------------------------------

def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=d, help="JSON run configuration")
    parser.add_argument("--seed", type=int, default=d)
    parser.add_argument("--out-dir", default=d, help="directory for outputs (default: .)")
    parser.add_argument("--threads", type=int, default=d, help="BLAS thread limit")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sanet", description="Simplicial attention networks")
    _global_flags(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_):
        sp_ = sub.add_parser(name, help=help_)
        _global_flags(sp_, suppress=True)
        return sp_

    g = add("gen", "generate a dataset")
    g.add_argument("--task", choices=("trajectory", "mdi"), default=None)
    g.add_argument("--points", type=int)
    g.add_argument("--holes", type=float, nargs=4, metavar=("X1", "Y1", "X2", "Y2"))
    g.add_argument("--radius", type=float)
    g.add_argument("--train", type=int, dest="n_train")
    g.add_argument("--test", type=int, dest="n_test")
    g.add_argument("--orient-test", action="store_true", default=None,
                   help="random per-edge orientation flips on test trajectories")
    g.add_argument("--authors", type=int)
    g.add_argument("--papers", type=int)
    g.add_argument("--order", type=int)
    g.add_argument("--miss", type=float)
    g.add_argument("--masks", type=int, default=1, help="number of imputation masks")

    i = add("inspect", "summarise a complex")
    i.add_argument("complex")

    t = add("train", "train a model")
    _model_flags(t)
    t.add_argument("--data-dir", help="directory written by gen")
    t.add_argument("--mask", default="mdi.txt", help="imputation file inside --data-dir")

    e = add("eval", "evaluate a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data-dir", required=True)
    e.add_argument("--mask", default="mdi.txt")

    c = add("gradcheck", "finite-difference check of every parameter gradient")
    _model_flags(c)
    c.add_argument("--complex", help="complex file (at most 30 edges); default: small built-in complex")
    c.add_argument("--tol", type=float, default=1e-4)
    c.add_argument("--step", type=float, default=1e-6)
    return p


def _model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--task", choices=("trajectory", "mdi"))
    p.add_argument("--arch", choices=ARCHITECTURES)
    p.add_argument("--sigma", choices=("identity", "relu", "tanh"))
    p.add_argument("--readout", choices=READOUTS)
    p.add_argument("--features", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--j", type=int, help="sets both j_down and j_up")
    p.add_argument("--jh", type=int, dest="j_h")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--heads", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--l2", type=float)
    p.add_argument("--dropout", type=float)
    p.add_argument("--epochs", type=int, dest="max_epochs")
    p.add_argument("--batch-size", type=int)


# -- config resolution ---------------------------------------------------------------------

def resolve_config(args) -> RunConfig:
    """File config (or task defaults), then flag overrides, then validation."""
    task = getattr(args, "task", None)
    if args.config:
        cfg = load_config(args.config)
        if task and task != cfg.task:
            raise errors.ConfigError(f"--task {task} contradicts config task {cfg.task}")
    else:
        cfg = task_defaults(task or "trajectory")
    j = getattr(args, "j", None)
    cfg = override(cfg, "model", arch=getattr(args, "arch", None), sigma=getattr(args, "sigma", None),
                   readout=getattr(args, "readout", None), features=getattr(args, "features", None),
                   layers=getattr(args, "layers", None), j_down=j, j_up=j,
                   j_h=getattr(args, "j_h", None), epsilon=getattr(args, "epsilon", None),
                   heads=getattr(args, "heads", None))
    cfg = override(cfg, "optim", lr=getattr(args, "lr", None), l2=getattr(args, "l2", None),
                   dropout=getattr(args, "dropout", None), max_epochs=getattr(args, "max_epochs", None),
                   batch_size=getattr(args, "batch_size", None))
    cfg = override(cfg, "run", seed=args.seed)
    return cfg.validate()


def _out_dir(args) -> Path:
    out = Path(args.out_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- gen ---------------------------------------------------------------------------------------

def cmd_gen(args) -> int:
    cfg = task_defaults(args.task or "trajectory")
    if args.config:
        cfg = load_config(args.config)
    dc = cfg.data
    holes = [[args.holes[0], args.holes[1]], [args.holes[2], args.holes[3]]] if args.holes else None
    dc = replace(dc, **{k: v for k, v in dict(
        points=args.points, hole_centers=holes, hole_radius=args.radius, n_train=args.n_train,
        n_test=args.n_test, random_test_orientation=args.orient_test, authors=args.authors,
        papers=args.papers, order=args.order, miss=args.miss).items() if v is not None})
    task = args.task or cfg.task
    seed = cfg.seed if args.seed is None else args.seed
    if args.masks < 1:
        raise errors.ConfigError("--masks must be >= 1")
    # validate everything before touching the filesystem
    if task == "trajectory":
        validate_holes(dc.hole_centers, dc.hole_radius)
        if dc.points < 20 or dc.n_train < 1 or dc.n_test < 1:
            raise errors.ConfigError("need points >= 20 and at least one train and test trajectory")
    else:
        if not 0.0 < dc.miss < 1.0:
            raise errors.ConfigError("--miss must be in (0, 1)")
    out = _out_dir(args)
    if task == "trajectory":
        ds = generate_synthetic_flow(dc.points, dc.hole_centers, dc.hole_radius, dc.n_train, dc.n_test,
                                     seed=seed, random_test_orientation=dc.random_test_orientation)
        save_complex(out / "complex.txt", ds.complex)
        save_trajectories(out / "train.txt", ds.train)
        save_trajectories(out / "test.txt", ds.test)
        if dc.random_test_orientation:
            lines = [" ".join("+1" if s > 0 else "-1" for s in t.orientation) for t in ds.test]
            (out / ORIENTATION_FILE).write_text("\n".join(lines) + "\n", encoding="utf-8")
        manifest = {**ds.params, "fingerprint": ds.complex.fingerprint}
    else:
        co = generate_coauthorship(dc.authors, dc.papers, max_authors=dc.max_authors, seed=seed)
        if dc.order > co.complex.max_order:
            raise errors.ConfigError(f"order {dc.order} exceeds complex dimension {co.complex.max_order}")
        values = co.values(dc.order)
        save_complex(out / "complex.txt", co.complex)
        files = []
        for m in range(args.masks):
            inst = generate_mdi_instance(co.complex, dc.order, values, missing_fraction=dc.miss, seed=seed + m)
            name = "mdi.txt" if args.masks == 1 else f"mdi_{m:02d}.txt"
            save_mdi(out / name, inst)
            files.append(name)
        manifest = {"task": "mdi", **co.params, "order": dc.order, "miss": dc.miss, "masks": args.masks,
                    "mask_seeds": [seed + m for m in range(args.masks)], "files": files,
                    "shape": list(co.complex.shape), "fingerprint": co.complex.fingerprint}
    write_manifest(out / "manifest.json", manifest)
    print(json.dumps({"out_dir": str(out), **manifest}, sort_keys=True))
    return EXIT_OK


# -- inspect -----------------------------------------------------------------------------------

def inspect_complex(X: SimplicialComplex) -> dict:
    report = {"counts": list(X.shape), "fingerprint": X.fingerprint, "orders": []}
    for k in range(X.max_order + 1):
        L = X.laplacians(k)[2]
        basis = spectral_basis(L.toarray())
        ev = basis.eigenvalues
        nonzero = ev[ev > 1e-8 * max(float(ev.max(initial=0.0)), 1.0)]
        report["orders"].append({
            "k": k,
            "n": X.n(k),
            "harmonic_dim": int(basis.harmonic_dim),
            "lambda_max": float(ev.max(initial=0.0)),
            "lambda_max_power": lambda_max(L),
            "lambda_min_nonzero": float(nonzero.min()) if nonzero.size else None,
            "nnz": int(L.nnz),
        })
    return report


def cmd_inspect(args) -> int:
    report = inspect_complex(load_complex(args.complex))
    print(json.dumps(report, indent=2))
    if args.out_dir:
        write_manifest(_out_dir(args) / "inspect.json", report)
    return EXIT_OK


# -- data loading ------------------------------------------------------------------------------

def _load_orientations(path: Path, n_edges: int) -> list[np.ndarray] | None:
    if not path.exists():
        return None
    rows = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            signs = np.array([int(t) for t in line.split()], dtype=float)
        except ValueError as exc:
            raise errors.ParseError(f"bad orientation row", lineno) from exc
        if signs.size != n_edges or not np.all(np.abs(signs) == 1):
            raise errors.DimensionMismatch(f"line {lineno}: need {n_edges} signs of +-1")
        rows.append(signs)
    return rows


def load_trajectory_data(data_dir: Path):
    X = load_complex(data_dir / "complex.txt")
    train = load_trajectories(data_dir / "train.txt", X)
    test = load_trajectories(data_dir / "test.txt", X)
    orient = _load_orientations(data_dir / ORIENTATION_FILE, X.n(1))
    if orient is not None:
        if len(orient) != len(test):
            raise errors.DimensionMismatch("orientation rows do not match test trajectories")
        for t, o in zip(test, orient):
            t.orientation = o
    return X, train, test


def _trajectory_data(cfg: RunConfig, data_dir):
    if data_dir:
        return load_trajectory_data(Path(data_dir))
    dc = cfg.data
    if dc.complex:
        X = load_complex(dc.complex)
        return X, load_trajectories(dc.train, X), load_trajectories(dc.test, X)
    ds = generate_synthetic_flow(dc.points, dc.hole_centers, dc.hole_radius, dc.n_train, dc.n_test,
                                 seed=cfg.seed, random_test_orientation=dc.random_test_orientation)
    return ds.complex, ds.train, ds.test


def _mdi_data(cfg: RunConfig, data_dir, mask_name: str):
    if data_dir:
        X = load_complex(Path(data_dir) / "complex.txt")
        return X, load_mdi(Path(data_dir) / mask_name, X)
    dc = cfg.data
    if dc.complex:
        X = load_complex(dc.complex)
        return X, load_mdi(dc.mdi, X)
    co = generate_coauthorship(dc.authors, dc.papers, max_authors=dc.max_authors, seed=cfg.seed)
    inst = generate_mdi_instance(co.complex, dc.order, co.values(dc.order), missing_fraction=dc.miss,
                                 seed=cfg.seed)
    return co.complex, inst


# -- train / eval ------------------------------------------------------------------------------

def cmd_train(args) -> int:
    cfg = resolve_config(args)
    out = _out_dir(args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if cfg.task == "trajectory":
            X, train, test = _trajectory_data(cfg, args.data_dir)
            result = train_trajectory(cfg, X, train, test)
        else:
            X, inst = _mdi_data(cfg, args.data_dir, args.mask)
            result = train_mdi(cfg, X, inst)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    (out / "metrics.csv").write_text(metrics_csv(result.history), encoding="utf-8")
    meta = {"task": cfg.task, "arch": cfg.model.arch, "config": cfg.to_dict(), "epsilon_used": result.epsilon}
    save_checkpoint(out / "checkpoint.json", result.model, X.fingerprint, meta)
    manifest = {"config": cfg.to_dict(), "epsilon_used": result.epsilon, "metrics": result.metrics,
                "stopped_early": result.stopped_early, "fingerprint": X.fingerprint,
                "n_parameters": result.model.n_parameters(), "warnings": [str(w.message) for w in caught]}
    write_manifest(out / "manifest.json", manifest)
    print(json.dumps(result.metrics, sort_keys=True))
    return EXIT_OK


def cmd_eval(args) -> int:
    data_dir = Path(args.data_dir)
    X = load_complex(data_dir / "complex.txt")
    model, blob = load_checkpoint(args.checkpoint, expected_fingerprint=X.fingerprint)
    task = blob["meta"].get("task", "trajectory")
    normalize = blob["meta"].get("config", {}).get("model", {}).get("normalize_laplacians", False)
    if task == "trajectory":
        _, _, test = load_trajectory_data(data_dir)
        ops = SimplicialOperators(X, 1, normalize)
        loss, acc = evaluate_classifier(model, ops, test)
        metrics = {"task": task, "accuracy": acc, "loss": loss, "n": len(test)}
    else:
        inst = load_mdi(data_dir / args.mask, X)
        ops = SimplicialOperators(X, inst.order, normalize)
        metrics = {"task": task, **imputation_metrics(predict_values(model, ops, inst), inst),
                   "n_missing": int(inst.missing_mask.sum())}
    print(json.dumps(metrics, sort_keys=True))
    if args.out_dir:
        write_manifest(_out_dir(args) / "eval.json", metrics)
    return EXIT_OK


# -- gradcheck ---------------------------------------------------------------------------------

def hollow_triangle() -> SimplicialComplex:
    return build_complex([[0, 1], [1, 2], [0, 2]])


def gradcheck_complex() -> SimplicialComplex:
    """Two filled triangles and one open square: both adjacencies and a hole."""
    return build_complex([[0, 1, 2], [1, 2, 3], [3, 4], [4, 5], [2, 5]])


def gradcheck_report(cfg: RunConfig, X: SimplicialComplex, tol: float = 1e-4, step: float = 1e-6,
                     n_samples: int = 3) -> list:
    """Per-parameter finite-difference comparison for one small batch."""
    if X.n(1) > GRADCHECK_MAX_EDGES:
        raise errors.ConfigError(f"gradcheck is limited to {GRADCHECK_MAX_EDGES} edges, got {X.n(1)}")
    cfg = replace(cfg, optim=replace(cfg.optim, dropout=0.0))
    if cfg.model.readout == "per_simplex_linear" and cfg.model.layers < 2:
        # the output layer is linear, so sigma only shows up from two layers on
        cfg = replace(cfg, model=replace(cfg.model, layers=2))
    ops = SimplicialOperators(X, 1, cfg.model.normalize_laplacians)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        model, _ = build_model(cfg, ops, f_in=1)
    rng = np.random.default_rng([cfg.seed, 3])
    if cfg.model.readout == "per_simplex_linear":
        Z = rng.normal(size=(ops.n, 1))
        target = rng.normal(size=ops.n) * 3.0
        mask = np.ones(ops.n, dtype=bool)

        def loss_fn():
            return losses.masked_l1(model(Z, ops), target, mask)
    else:
        Z = rng.normal(size=(n_samples, ops.n, 1))
        y = rng.integers(0, 2, size=n_samples)

        def loss_fn():
            out = losses.cross_entropy(model(Z, ops), y)
            return out + losses.l2_penalty(model.regularized_parameters(), cfg.optim.l2) if cfg.optim.l2 else out

    return gradcheck(loss_fn, model.parameters(), step=step, tol=tol)


def cmd_gradcheck(args) -> int:
    cfg = resolve_config(args)
    X = load_complex(args.complex) if args.complex else gradcheck_complex()
    reports = gradcheck_report(cfg, X, args.tol, args.step)
    rows = [{"param": r.name, "size": r.size, "max_rel_error": r.max_rel_error, "passed": r.passed}
            for r in reports]
    ok = all(r.passed for r in reports)
    print(json.dumps({"passed": ok, "tolerance": args.tol, "params": rows}, indent=2))
    return EXIT_OK if ok else EXIT_NUMERIC


COMMANDS = {"gen": cmd_gen, "inspect": cmd_inspect, "train": cmd_train, "eval": cmd_eval,
            "gradcheck": cmd_gradcheck}


def _thread_limit(n):
    if n is None:
        return nullcontext()
    if n < 1:
        raise errors.ConfigError("--threads must be >= 1")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with _thread_limit(args.threads):
            return COMMANDS[args.command](args)
    except CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NUMERIC_ERRORS as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
