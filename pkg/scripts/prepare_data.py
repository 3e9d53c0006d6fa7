"""Build the committed datasets under data/ from locally available sources.

MNIST: a 5000-digit subset (CSV, 784 intensities per row) is shuffled with a
fixed seed and split 4000/1000 into IDX files.  Boston Housing: copied as a
header-less numeric CSV with the target (MEDV) in the last column.  By
default both sources are read from the copies bundled with ``mlxtend``.
"""
import argparse
import gzip
import importlib.util
import shutil
from pathlib import Path

import numpy as np

from trugnet.data import write_idx


def _mlxtend_file(name):
    spec = importlib.util.find_spec("mlxtend")
    if spec is None:
        return None
    return Path(spec.origin).parent / "data" / "data" / name


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--mnist-csv", type=Path, default=_mlxtend_file("mnist_5k.csv.gz"))
    p.add_argument("--boston-csv", type=Path, default=_mlxtend_file("boston_housing.csv"))
    p.add_argument("--out", type=Path, default=Path(__file__).resolve().parents[1] / "data")
    p.add_argument("--n-train", type=int, default=4000)
    args = p.parse_args()
    if args.mnist_csv is None or args.boston_csv is None:
        p.error("source files not found; pass --mnist-csv and --boston-csv")
    args.out.mkdir(parents=True, exist_ok=True)

    with gzip.open(args.mnist_csv, "rt") as fh:
        table = np.loadtxt(fh, delimiter=",")
    pixels = table[:, :784].astype(np.uint8).reshape(-1, 28, 28)
    order = np.random.default_rng(0).permutation(len(pixels))
    pixels = pixels[order]
    write_idx(args.out / "mnist_train-images-idx3-ubyte.gz", pixels[: args.n_train])
    write_idx(args.out / "mnist_test-images-idx3-ubyte.gz", pixels[args.n_train:])
    shutil.copyfile(args.boston_csv, args.out / "boston_housing.csv")
    print(f"wrote {args.n_train} train / {len(pixels) - args.n_train} test digits and boston_housing.csv")


if __name__ == "__main__":
    main()
