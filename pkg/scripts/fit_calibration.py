"""Coverage of the 95% intervals from both fitting methods on noisy synthetic grids.

    python scripts/fit_calibration.py [--reps 500] [--noise 0.05] [--alpha 0.2] [--beta -0.1]
"""

import argparse

from robustgen.rng import Stream
from robustgen.scalefit import fit_joint, fit_slices, synthetic_records

NS = [1000 * i for i in range(1, 11)]
PS = [2, 4, 8, 16, 32, 64, 128, 256, 512, 768]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=500)
    ap.add_argument("--noise", type=float, default=0.05)
    ap.add_argument("--alpha", type=float, default=0.2)
    ap.add_argument("--beta", type=float, default=-0.1)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    hits = {(m, k): 0 for m in ("slices", "joint") for k in ("alpha", "beta")}
    for r in range(args.reps):
        recs = synthetic_records(NS, PS, args.alpha, args.beta, 1.0, args.noise, Stream(args.seed, r))
        for method, res in (("slices", fit_slices(recs).result), ("joint", fit_joint(recs))):
            hits[method, "alpha"] += res.ci95_alpha[0] <= args.alpha <= res.ci95_alpha[1]
            hits[method, "beta"] += res.ci95_beta[0] <= args.beta <= res.ci95_beta[1]
    print("method  exponent  coverage")
    for (method, k), h in hits.items():
        print(f"{method:<8}{k:<10}{h / args.reps:.3f}")


if __name__ == "__main__":
    main()
