#!/usr/bin/env python3
"""Nearest-neighbor accuracy before and after reduction, across target dims.

Reports, per measure, the accuracy on the original manifold and after
training the map at each requested dimension. Run with defaults for the
demo-scale picture, or point it at other synthetic shapes.
"""

import argparse

import numpy as np

from ggdr import MeasureKind, demo_analog_params, evaluate, fit, synth_dataset


def split(ds, per_class, train_per_class):
    tr = [i for i in range(ds.size) if i % per_class < train_per_class]
    te = [i for i in range(ds.size) if i % per_class >= train_per_class]
    return ds.subset(tr), ds.subset(te)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--noise", type=float, default=0.3)
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--dims", type=int, nargs="+", default=[8, 12, 18, 24, 30])
    args = ap.parse_args()

    kinds = list(MeasureKind)
    header = "metric  pre    " + "  ".join(f"d={d:<4d}" for d in args.dims)
    print(header)
    print("-" * len(header))
    for kind in kinds:
        pre, post = [], {d: [] for d in args.dims}
        for seed in range(args.seeds):
            params = demo_analog_params(args.noise, seed)
            tr, te = split(synth_dataset(params), params.samples_per_class, 5)
            pre.append(evaluate(tr, te, kind))
            for d in args.dims:
                w, _, _ = fit(tr, kind, target_dim=d)
                post[d].append(evaluate(tr, te, kind, w))
        row = "  ".join(f"{np.mean(post[d]):.3f}" for d in args.dims)
        print(f"{kind.value:>5}  {np.mean(pre):.3f}  {row}")


if __name__ == "__main__":
    main()
