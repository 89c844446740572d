"""Rebuild data/mnist5k-*.gz from the 5000-digit MNIST sample bundled in the mlxtend wheel.

The full MNIST distribution is not fetched by this project; point ``ephv`` at
the official ``train-images-idx3-ubyte`` files when you have them. This subset
(500 digits per class) is enough for the desk-scale smoke runs.

    python scripts/make_mnist_subset.py [--wheel mlxtend-0.24.0-py3-none-any.whl]
"""
import argparse
import gzip
import io
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

import numpy as np

from epvae.data import write_idx

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def fetch_wheel(dest):
    subprocess.run([sys.executable, "-m", "pip", "download", "--no-deps", "-q",
                    "-d", str(dest), "mlxtend==0.24.0"], check=True)
    return next(Path(dest).glob("mlxtend-*.whl"))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--wheel", type=Path)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parents[1] / "data")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        wheel = args.wheel or fetch_wheel(tmp)
        csv = gzip.decompress(zipfile.ZipFile(wheel).read(MEMBER))
    table = np.loadtxt(io.BytesIO(csv), delimiter=",", dtype=np.int64)
    pixels, labels = table[:, :-1], table[:, -1]
    assert pixels.shape == (5000, 784) and pixels.min() >= 0 and pixels.max() <= 255

    # the csv is sorted by class; store one fixed shuffle so leading slices are mixed
    order = np.random.default_rng(args.seed).permutation(len(labels))
    args.out.mkdir(parents=True, exist_ok=True)
    write_idx(pixels[order], labels[order],
              args.out / "mnist5k-images-idx3-ubyte.gz",
              args.out / "mnist5k-labels-idx1-ubyte.gz")
    print(f"wrote {len(labels)} digits to {args.out}")


if __name__ == "__main__":
    main()
