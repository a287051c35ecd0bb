"""Build the bundled desk-scale MNIST corpus (data/mnist5k/).

Source: the 5000-image MNIST subset shipped inside the ``mlxtend`` wheel
(``mlxtend/data/data/mnist_5k.csv.gz``; 500 images per digit, label in the
last column).  The script splits it 400/100 per class into train/test, with a
fixed permutation, and writes gzip'd IDX files.

    pip download mlxtend --no-deps -d /tmp/dl
    python scripts/make_mnist5k.py /tmp/dl/mlxtend-*.whl data/mnist5k
"""

import gzip
import io
import sys
import zipfile
from pathlib import Path

import numpy as np

from basisguard.formats import write_idx_images, write_idx_labels


def main(wheel, out_dir):
    with zipfile.ZipFile(wheel) as z:
        raw = gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz"))
    table = np.loadtxt(io.BytesIO(raw), delimiter=",", dtype=np.int64)
    images = table[:, :-1].reshape(-1, 28, 28).astype(np.uint8)
    labels = table[:, -1]

    rng = np.random.default_rng(20180101)
    train_idx, test_idx = [], []
    for digit in range(10):
        idx = rng.permutation(np.flatnonzero(labels == digit))
        train_idx.append(idx[:400])
        test_idx.append(idx[400:])
    train_idx = rng.permutation(np.concatenate(train_idx))
    test_idx = rng.permutation(np.concatenate(test_idx))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for split, idx in (("train", train_idx), ("t10k", test_idx)):
        write_idx_images(out / f"{split}-images-idx3-ubyte.gz", images[idx] / 255.0)
        write_idx_labels(out / f"{split}-labels-idx1-ubyte.gz", labels[idx])


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
