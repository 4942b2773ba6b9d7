"""Convert the bundled 5000-image MNIST sample into IDX files.

The CSV (784 pixel columns then the label) is the ``mnist_5k.csv.gz`` file
shipped with mlxtend (BSD-3). Its rows are sorted by label, so they are
shuffled once with the portable stream (seed 0) before the first 4000 become
the training pool and the remaining 1000 the held-out test set.

    python scripts/prepare_mnist5k.py [--csv data/mnist_5k.csv.gz] [--out data/mnist5k]
"""

import argparse
import gzip
from pathlib import Path

import numpy as np

from robustgen.dataset import IdxTensor, write_idx
from robustgen.rng import Stream

N_TRAIN = 4000


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--csv", type=Path, default=Path("data/mnist_5k.csv.gz"))
    ap.add_argument("--out", type=Path, default=Path("data/mnist5k"))
    args = ap.parse_args()

    with gzip.open(args.csv, "rt") as fh:
        table = np.loadtxt(fh, delimiter=",", dtype=np.int64)
    pixels = table[:, :-1].astype(np.uint8).reshape(-1, 28, 28)
    labels = table[:, -1].astype(np.uint8)
    order = Stream(0).permutation(len(labels))
    pixels, labels = pixels[order], labels[order]

    args.out.mkdir(parents=True, exist_ok=True)
    for name, sl in (("train", slice(0, N_TRAIN)), ("test", slice(N_TRAIN, None))):
        img, lab = pixels[sl], labels[sl]
        write_idx(args.out / f"{name}-images-idx3-ubyte", IdxTensor(img.shape, img))
        write_idx(args.out / f"{name}-labels-idx1-ubyte", IdxTensor(lab.shape, lab))
        print(f"{name}: {img.shape[0]} images, label counts {np.bincount(lab, minlength=10).tolist()}")


if __name__ == "__main__":
    main()
