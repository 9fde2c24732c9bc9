#!/usr/bin/env python3
"""Sweep the class spread of a synthetic geometry and record how the
same/different-class histogram overlap responds, as CSV on stdout."""

import argparse

from embedgeo import ConeSpec, class_pair_histograms, generate_labeled


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dim", type=int, default=8)
    parser.add_argument("--classes", type=int, default=6)
    parser.add_argument("--per-class", type=int, default=30)
    parser.add_argument("--spreads", default="0.5,0.4,0.3,0.2,0.1")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    print("spread,overlap,mean_same,mean_diff")
    for spread in (float(v) for v in args.spreads.split(",")):
        ds = generate_labeled(
            ConeSpec(dim=args.dim, n_classes=args.classes, per_class=args.per_class,
                     class_spread=spread, seed=args.seed)
        )
        pair = class_pair_histograms(ds, seed=args.seed)
        print(f"{spread},{pair.overlap!r},{pair.mean_a!r},{pair.mean_b!r}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
