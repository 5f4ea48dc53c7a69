"""LSH P@10 as a function of code length on separated labeled mixtures, several seeds."""

import argparse

import numpy as np

from latentprobe import ann
from latentprobe.retrieval import evaluate_index
from latentprobe.synth import SynthSpec, generate


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--bits", default="16,64,256,1024,4096")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--d", type=int, default=64)
    ap.add_argument("--classes", type=int, default=10)
    ap.add_argument("--separation", type=float, default=6.0)
    args = ap.parse_args(argv)
    bits = [int(b) for b in args.bits.split(",")]

    curves = []
    for seed in range(args.seeds):
        e = generate(SynthSpec("labeled_mixture", args.n, args.d, seed=seed, n_classes=args.classes, separation=args.separation))
        curves.append([evaluate_index(e, ann.lsh_build(e, ann.LshConfig(b, seed=seed)), 10).p_at_k[0] for b in bits])
        print(f"seed {seed}: " + " ".join(f"{p:.3f}" for p in curves[-1]))
    mean = np.mean(curves, axis=0)
    print("mean:   " + " ".join(f"{p:.3f}" for p in mean))
    print("nbits:  " + " ".join(f"{b:>5}" for b in bits))


if __name__ == "__main__":
    main()
