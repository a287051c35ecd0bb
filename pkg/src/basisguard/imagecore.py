"""Image arrays, color conversion, clipping and bicubic resizing.

Images are float64 numpy arrays of shape ``(H, W, C)`` with ``C`` in
``{1, 3}`` and intensities in ``[0, 1]``.  Batches add a leading axis.
"""

import numpy as np

from .errors import ChannelMismatch, NonFiniteInput, ShapeMismatch

# BT.601 full range, chroma offset +0.5 in the [0, 1] domain.
_RGB_TO_YCBCR = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.168736, -0.331264, 0.5],
        [0.5, -0.418688, -0.081312],
    ]
)
_YCBCR_TO_RGB = np.linalg.inv(_RGB_TO_YCBCR)
_CHROMA_OFFSET = np.array([0.0, 0.5, 0.5])


def as_image(data, channels=None):
    """Validate and return ``data`` as a float64 ``(H, W, C)`` array.

    A 2-D array is promoted to a single channel image.
    """
    img = np.asarray(data, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3 or img.shape[2] not in (1, 3) or img.shape[0] < 1 or img.shape[1] < 1:
        raise ShapeMismatch(f"expected an (H, W, C) image with C in {{1, 3}}, got {img.shape}")
    if channels is not None and img.shape[2] != channels:
        raise ChannelMismatch(f"expected {channels} channels, got {img.shape[2]}")
    return img


def clip(img):
    """Clamp every element to ``[0, 1]``."""
    arr = np.asarray(img, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput("image contains NaN or infinite values")
    return np.clip(arr, 0.0, 1.0)


def rgb_to_ycbcr(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ChannelMismatch(f"rgb_to_ycbcr needs 3 channels, got shape {img.shape}")
    return img @ _RGB_TO_YCBCR.T + _CHROMA_OFFSET


def ycbcr_to_rgb(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ChannelMismatch(f"ycbcr_to_rgb needs 3 channels, got shape {img.shape}")
    return (img - _CHROMA_OFFSET) @ _YCBCR_TO_RGB.T


def _cubic(t, a=-0.5):
    t = np.abs(t)
    t2 = t * t
    t3 = t2 * t
    near = (a + 2) * t3 - (a + 3) * t2 + 1
    far = a * t3 - 5 * a * t2 + 8 * a * t - 4 * a
    return np.where(t <= 1, near, np.where(t < 2, far, 0.0))


def bicubic_weights(n_in, n_out):
    """Dense ``(n_out, n_in)`` interpolation matrix.

    Half-pixel centres, Keys kernel with ``a = -0.5``, indices clamped at the
    borders.  Every row sums to one.
    """
    centres = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    base = np.floor(centres).astype(int)
    weights = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    for offset in (-1, 0, 1, 2):
        idx = base + offset
        w = _cubic(centres - idx)
        np.add.at(weights, (rows, np.clip(idx, 0, n_in - 1)), w)
    return weights


def resize_bicubic(img, new_h, new_w):
    """Resize an image with separable bicubic interpolation, then clip."""
    if int(new_h) < 1 or int(new_w) < 1:
        raise ValueError("target size must be at least 1x1")
    img = as_image(img)
    h, w, _ = img.shape
    if (h, w) == (new_h, new_w):
        return clip(img)
    wy = bicubic_weights(h, int(new_h))
    wx = bicubic_weights(w, int(new_w))
    out = np.einsum("ph,hwc,qw->pqc", wy, img, wx)
    return clip(out)


def psnr(a, b, peak=1.0):
    mse = float(np.mean((np.asarray(a) - np.asarray(b)) ** 2))
    if mse == 0:
        return float("inf")
    return 10.0 * np.log10(peak * peak / mse)
