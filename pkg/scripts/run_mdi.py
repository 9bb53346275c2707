"""Missing-data imputation on a synthetic co-authorship complex over the 10-mask protocol.

    python3 scripts/run_mdi.py --miss 0.3 --orders 1 --archs san scnn
"""
import argparse
import json
import time

import numpy as np

from sanet.config import override, task_defaults
from sanet.data.mdi import generate_coauthorship, mask_protocol
from sanet.train import train_mdi


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--archs", nargs="+", default=["san", "scnn"])
    p.add_argument("--orders", type=int, nargs="+", default=[1])
    p.add_argument("--miss", type=float, nargs="+", default=[0.3])
    p.add_argument("--masks", type=int, default=10)
    p.add_argument("--authors", type=int, default=300)
    p.add_argument("--papers", type=int, default=200)
    p.add_argument("--features", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    base = task_defaults("mdi")
    base = override(override(base, "model", features=args.features), "optim", max_epochs=args.epochs)
    co = generate_coauthorship(args.authors, args.papers, seed=args.seed)
    print(json.dumps({"counts": [co.complex.n(k) for k in range(co.complex.max_order + 1)]}))
    for k in args.orders:
        for miss in args.miss:
            instances = mask_protocol(co.complex, k, co.values(k), miss, n_masks=args.masks, seed=args.seed)
            for arch in args.archs:
                accs, t0 = [], time.perf_counter()
                for i, inst in enumerate(instances):
                    cfg = override(override(base, "model", arch=arch), "run", seed=args.seed + i)
                    accs.append(train_mdi(cfg, co.complex, inst).metrics["accuracy"])
                print(json.dumps({"order": k, "miss": miss, "arch": arch,
                                  "accuracy_mean": float(np.mean(accs)), "accuracy_std": float(np.std(accs)),
                                  "seconds": round(time.perf_counter() - t0, 1)}), flush=True)


if __name__ == "__main__":
    main()
