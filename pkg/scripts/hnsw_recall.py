"""HNSW recall@10 against the exact inner-product oracle on clustered synthetic corpora."""

import argparse
import time

import numpy as np

from latentprobe import ann, normalize
from latentprobe.knn import exact_knn
from latentprobe.synth import SynthSpec, generate


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--d", type=int, default=32)
    ap.add_argument("--classes", type=int, default=20)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--queries", type=int, default=500)
    ap.add_argument("--ef-search", type=int, nargs="+", default=[16, 32, 64, 128])
    args = ap.parse_args(argv)

    print("seed  build_s  " + "  ".join(f"ef={ef:<4}" for ef in args.ef_search))
    for seed in range(args.seeds):
        e = normalize(generate(SynthSpec("labeled_mixture", args.n, args.d, seed=seed, n_classes=args.classes, separation=4.0)), "l2")
        t0 = time.perf_counter()
        idx = ann.hnsw_build(e, ann.HnswConfig(seed=seed))
        build = time.perf_counter() - t0
        truth = exact_knn(e, 10, "ip", exclude_self=False)
        qs = np.random.default_rng(seed).choice(e.n, min(args.queries, e.n), replace=False)
        cells = []
        for ef in args.ef_search:
            hits = sum(len(set(idx.search(e.vectors[i], 10, ef)[0]) & set(truth.neighbor_ids[i])) for i in qs)
            cells.append(hits / (10 * len(qs)))
        print(f"{seed:<4}  {build:7.1f}  " + "  ".join(f"{c:7.4f}" for c in cells))


if __name__ == "__main__":
    main()
