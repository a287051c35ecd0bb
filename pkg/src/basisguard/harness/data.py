"""Dataset loading: IDX directories (MNIST layout) and ``.npz`` archives."""

from pathlib import Path

import numpy as np

from ..errors import EmptyDataset
from ..formats import read_idx_images, read_idx_labels


def _find(root, stem):
    for suffix in ("", ".gz"):
        p = root / f"{stem}{suffix}"
        if p.exists():
            return p
    raise FileNotFoundError(f"no {stem}[.gz] under {root}")


def load_split(path, split="t10k", fmt="idx"):
    """Return ``(images, labels)`` for one split.

    ``idx``: ``path`` is a directory holding ``{split}-images-idx3-ubyte[.gz]``
    and ``{split}-labels-idx1-ubyte[.gz]``.  ``npz``: ``path`` is a file with
    ``{split}_images`` (``N x H x W x C`` floats in [0, 1]) and
    ``{split}_labels`` arrays.
    """
    path = Path(path)
    if fmt == "idx":
        images = read_idx_images(_find(path, f"{split}-images-idx3-ubyte"))
        labels = read_idx_labels(_find(path, f"{split}-labels-idx1-ubyte"))
    else:
        with np.load(path) as archive:
            images = np.asarray(archive[f"{split}_images"], dtype=np.float64)
            labels = np.asarray(archive[f"{split}_labels"], dtype=np.int64)
        if images.ndim == 3:
            images = images[..., None]
    if len(images) == 0:
        raise EmptyDataset(f"split {split!r} at {path} is empty")
    if len(images) != len(labels):
        raise EmptyDataset(f"split {split!r}: {len(images)} images but {len(labels)} labels")
    return images, labels


def eval_batch(dataset_cfg):
    images, labels = load_split(dataset_cfg.path, dataset_cfg.split, dataset_cfg.format)
    sl = slice(dataset_cfg.offset, dataset_cfg.offset + dataset_cfg.n_eval)
    if len(images[sl]) == 0:
        raise EmptyDataset("evaluation window selects no images")
    return images[sl], labels[sl]
