"""Desk-scale synthetic-flow classification over several seeds and architectures.

    python3 scripts/run_trajectory.py --seeds 0 1 2 --archs san san-no-harmonic scnn
"""
import argparse
import json
import time
import warnings

import numpy as np

from sanet.config import override, task_defaults
from sanet.data.synthetic_flow import generate_synthetic_flow
from sanet.train import train_trajectory


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--archs", nargs="+", default=["san", "san-no-harmonic"])
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--train", type=int, default=200)
    p.add_argument("--test", type=int, default=50)
    p.add_argument("--epochs", type=int, default=None)
    args = p.parse_args()

    base = override(task_defaults("trajectory"), "optim", max_epochs=args.epochs)
    results = {a: [] for a in args.archs}
    for seed in args.seeds:
        ds = generate_synthetic_flow(args.points, n_train=args.train, n_test=args.test, seed=seed)
        for arch in args.archs:
            cfg = override(override(base, "model", arch=arch), "run", seed=seed)
            t0 = time.perf_counter()
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                res = train_trajectory(cfg, ds.complex, ds.train, ds.test)
            acc = res.metrics["accuracy"]
            results[arch].append(acc)
            print(json.dumps({"seed": seed, "arch": arch, "accuracy": acc, "epochs": res.metrics["epochs"],
                              "seconds": round(time.perf_counter() - t0, 1)}), flush=True)
    for arch, accs in results.items():
        print(f"{arch:>16s}: {100 * np.mean(accs):.1f} +- {100 * np.std(accs):.1f} %")


if __name__ == "__main__":
    main()
