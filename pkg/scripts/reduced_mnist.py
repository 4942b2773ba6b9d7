"""Reduced MNIST scaling run: grid, power-law fits and the comparison table.

    python scripts/reduced_mnist.py [--config configs/mnist_reduced.toml] [--out DIR] [--jobs K]

Resumable: cells already in DIR/results.csv are skipped.
"""

import argparse
import logging
import subprocess
import sys
import time
from pathlib import Path

from robustgen.cli import fit_reports
from robustgen.experiment import load_config, run_grid

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "mnist_reduced.toml")
    ap.add_argument("--out", type=Path, default=None)
    ap.add_argument("--jobs", type=int, default=None)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    if not (ROOT / "data" / "mnist5k" / "train-images-idx3-ubyte").exists():
        subprocess.run([sys.executable, str(ROOT / "scripts" / "prepare_mnist5k.py"),
                        "--csv", str(ROOT / "data" / "mnist_5k.csv.gz"),
                        "--out", str(ROOT / "data" / "mnist5k")], check=True)

    cfg = load_config(args.config, out=args.out, jobs=args.jobs)
    start = time.perf_counter()
    csv = run_grid(cfg)
    print(f"grid finished in {time.perf_counter() - start:.0f} s -> {csv}")
    report = fit_reports(csv, out=cfg.out)
    for name in ("slices", "joint"):
        fit = report[name]
        print(f"{name}: alpha {fit['alpha']:.4f} CI {fit['ci95_alpha']}, beta {fit['beta']:.4f} CI {fit['ci95_beta']}")
    print("\n\n".join(report["_tables"]))


if __name__ == "__main__":
    main()
