"""Per-image PCA denoising on image rows or on non-overlapping patches."""

from dataclasses import dataclass

import numpy as np

from .errors import RankOutOfRange
from .imagecore import as_image, clip


@dataclass(frozen=True)
class PcaBasis:
    mean_row: np.ndarray  # (d,)
    components: np.ndarray  # (d, k), orthonormal columns
    eigenvalues: np.ndarray  # (k,), descending

    @property
    def retained(self):
        return self.components.shape[1]

    def project(self, data):
        """Centre, project onto the components, un-centre."""
        centred = data - self.mean_row
        return self.mean_row + centred @ self.components @ self.components.T


def pca_fit(data, k):
    """Top-``k`` eigenvectors of the biased (1/n) covariance of ``data`` rows.

    Each component's largest-magnitude entry is made positive so the result
    does not depend on the eigensolver's sign choice.
    """
    data = np.asarray(data, dtype=np.float64)
    n, d = data.shape
    if not 1 <= k <= min(n, d):
        raise RankOutOfRange(f"k={k} outside [1, {min(n, d)}] for a {n}x{d} matrix")
    mean_row = data.mean(axis=0)
    centred = data - mean_row
    cov = centred.T @ centred / n
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals, kind="stable")[::-1][:k]
    comps = evecs[:, order]
    pivot = np.argmax(np.abs(comps), axis=0)
    signs = np.sign(comps[pivot, np.arange(k)])
    signs[signs == 0] = 1.0
    return PcaBasis(mean_row=mean_row, components=comps * signs, eigenvalues=evals[order])


def pca_denoise_matrix(data, k):
    return pca_fit(data, k).project(data)


def pca_denoise_rows(img, k):
    """Treat each channel as an ``H x W`` data matrix with rows as samples."""
    img = as_image(img)
    out = np.stack([pca_denoise_matrix(img[:, :, c], k) for c in range(img.shape[2])], axis=2)
    return clip(out)


def patches_to_matrix(channel, patch):
    """Tile a channel into ``patch x patch`` blocks, one flattened block per row.

    The bottom/right border is padded by edge replication up to a multiple of
    ``patch``.
    """
    h, w = channel.shape
    ph = -(-h // patch) * patch
    pw = -(-w // patch) * patch
    padded = np.pad(channel, ((0, ph - h), (0, pw - w)), mode="edge")
    blocks = padded.reshape(ph // patch, patch, pw // patch, patch).transpose(0, 2, 1, 3)
    return blocks.reshape(-1, patch * patch), (ph, pw)


def matrix_to_patches(rows, patch, padded_shape, shape):
    ph, pw = padded_shape
    blocks = rows.reshape(ph // patch, pw // patch, patch, patch).transpose(0, 2, 1, 3)
    return blocks.reshape(ph, pw)[: shape[0], : shape[1]]


def pca_denoise_patches(img, patch, k):
    img = as_image(img)
    h, w, nc = img.shape
    if patch < 1 or patch > min(h, w):
        raise ValueError(f"patch size {patch} does not fit a {h}x{w} image")
    if k > patch * patch:
        raise RankOutOfRange(f"k={k} exceeds patch dimension {patch * patch}")
    channels = []
    for c in range(nc):
        rows, padded_shape = patches_to_matrix(img[:, :, c], patch)
        channels.append(matrix_to_patches(pca_denoise_matrix(rows, k), patch, padded_shape, (h, w)))
    return clip(np.stack(channels, axis=2))
