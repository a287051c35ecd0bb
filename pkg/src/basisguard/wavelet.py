"""Biorthogonal 3.1 wavelet transform and the two wavelet defenses.

The 1-D transform is non-expansive: a length-``N`` signal yields
``ceil(N/2)`` approximation and ``ceil(N/2)`` detail coefficients.  Signals
are extended half-sample symmetrically (period ``2N``), filtered by circular
convolution and downsampled on even indices.  For symmetric/antisymmetric
filters of length ``L = 0 (mod 4)`` the subbands inherit a symmetry that makes
only ``N/2`` samples per band independent, which is what gets stored.  Odd
lengths are padded with one replicated sample and cropped on reconstruction.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import EmptyBand, TooManyLevels
from .imagecore import as_image, clip, resize_bicubic

MAD_SCALE = 0.6745


@dataclass(frozen=True)
class FilterBank:
    name: str
    dec_lo: tuple
    dec_hi: tuple
    rec_lo: tuple
    rec_hi: tuple

    def __post_init__(self):
        n = len(self.dec_lo)
        if any(len(f) != n for f in (self.dec_hi, self.rec_lo, self.rec_hi)) or n % 4:
            raise ValueError("filters must share one length that is a multiple of 4")

    @property
    def length(self):
        return len(self.dec_lo)


_S2 = np.sqrt(2.0)
BIOR31 = FilterBank(
    name="bior3.1",
    dec_lo=tuple(_S2 * np.array([-1.0, 3.0, 3.0, -1.0]) / 4),
    dec_hi=tuple(_S2 * np.array([-1.0, 3.0, -3.0, 1.0]) / 8),
    rec_lo=tuple(_S2 * np.array([1.0, 3.0, 3.0, 1.0]) / 8),
    rec_hi=tuple(_S2 * np.array([-1.0, -3.0, 3.0, 1.0]) / 4),
)


@dataclass
class WaveletPyramid:
    """Multi-level 2-D decomposition.

    ``details[0]`` is the finest level; each entry is an ``(LH, HL, HH)``
    triple.  ``shapes[i]`` is the shape of the signal that level ``i + 1``
    decomposed, needed to undo odd-size padding.
    """

    approx: np.ndarray
    details: list
    shapes: list = field(default_factory=list)

    @property
    def levels(self):
        return len(self.details)


def _cconv(x, taps, axis):
    out = np.zeros_like(x)
    for k, tap in enumerate(taps):
        out += tap * np.roll(x, k, axis=axis)
    return out


@lru_cache(maxsize=None)
def _fold_indices(n, length):
    """Map a full period of ``n`` subband samples onto the stored half.

    Returns ``(src, sign)`` arrays so that ``full = stored[src]`` for the
    lowpass band and ``full = sign * stored[src]`` for the highpass band.
    """
    centre = (length - 2) // 2  # symmetry point of filter * extended signal
    start = length // 4
    half = n // 2
    src = np.empty(n, dtype=int)
    sign = np.empty(n)
    for j in range(n):
        if start <= j < start + half:
            src[j], sign[j] = j - start, 1.0
        else:
            mirror = (centre - j) % n
            src[j], sign[j] = mirror - start, -1.0
    return src, sign


def _analysis_1d(x, bank, axis):
    n_orig = x.shape[axis]
    if n_orig % 2:
        last = np.take(x, [n_orig - 1], axis=axis)
        x = np.concatenate([x, last], axis=axis)
    n = x.shape[axis]
    ext = np.concatenate([x, np.flip(x, axis=axis)], axis=axis)
    start = bank.length // 4
    keep = np.arange(start, start + n // 2) * 2
    lo = np.take(_cconv(ext, bank.dec_lo, axis), keep, axis=axis)
    hi = np.take(_cconv(ext, bank.dec_hi, axis), keep, axis=axis)
    return lo, hi


def _synthesis_1d(lo, hi, n_out, bank, axis):
    half = lo.shape[axis]
    n = 2 * half
    src, sign = _fold_indices(n, bank.length)
    lo_full = np.take(lo, src, axis=axis)
    shape = [1] * lo.ndim
    shape[axis] = n
    hi_full = np.take(hi, src, axis=axis) * sign.reshape(shape)

    up_shape = list(lo.shape)
    up_shape[axis] = 2 * n
    up_lo = np.zeros(up_shape)
    up_hi = np.zeros(up_shape)
    sl = [slice(None)] * lo.ndim
    sl[axis] = slice(0, None, 2)
    up_lo[tuple(sl)] = lo_full
    up_hi[tuple(sl)] = hi_full
    rec = _cconv(up_lo, bank.rec_lo, axis) + _cconv(up_hi, bank.rec_hi, axis)
    rec = np.roll(rec, -(bank.length - 1), axis=axis)
    return np.take(rec, np.arange(n_out), axis=axis)


def dwt2_single(channel, bank=BIOR31):
    """One level: returns ``(LL, (LH, HL, HH))``."""
    lo, hi = _analysis_1d(channel, bank, axis=1)
    ll, lh = _analysis_1d(lo, bank, axis=0)
    hl, hh = _analysis_1d(hi, bank, axis=0)
    return ll, (lh, hl, hh)


def idwt2_single(ll, bands, shape, bank=BIOR31):
    lh, hl, hh = bands
    h, w = shape
    lo = _synthesis_1d(ll, lh, h, bank, axis=0)
    hi = _synthesis_1d(hl, hh, h, bank, axis=0)
    return _synthesis_1d(lo, hi, w, bank, axis=1)


def max_levels(h, w):
    return int(np.floor(np.log2(min(h, w))))


def dwt2(channel, levels, bank=BIOR31):
    channel = np.asarray(channel, dtype=np.float64)
    if channel.ndim != 2:
        raise ValueError("dwt2 expects a 2-D channel")
    if levels < 1 or min(channel.shape) / 2**levels < 1:
        raise TooManyLevels(f"{levels} levels do not fit a {channel.shape} channel")
    approx = channel
    details, shapes = [], []
    for _ in range(levels):
        shapes.append(approx.shape)
        approx, bands = dwt2_single(approx, bank)
        details.append(bands)
    return WaveletPyramid(approx=approx, details=details, shapes=shapes)


def idwt2(pyramid, bank=BIOR31):
    approx = pyramid.approx
    for bands, shape in zip(reversed(pyramid.details), reversed(pyramid.shapes)):
        approx = idwt2_single(approx, bands, shape, bank)
    return approx


def soft_threshold(c, t):
    """Shrink toward zero by ``t``: ``sgn(c) * max(0, |c| - t)``."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("threshold must be non-negative")
    c = np.asarray(c, dtype=np.float64)
    out = np.sign(c) * np.maximum(0.0, np.abs(c) - t)
    return out if out.ndim else float(out)


def estimate_sigma(pyramid):
    """Median absolute deviation noise estimate on the finest HH band."""
    if not pyramid.details:
        raise EmptyBand("pyramid has no detail bands")
    hh = np.asarray(pyramid.details[0][2])
    if hh.size == 0:
        raise EmptyBand("finest diagonal band is empty")
    return float(np.median(np.abs(hh)) / MAD_SCALE)


def universal_threshold(sigma, n):
    return sigma * np.sqrt(2.0 * np.log(n))


def wavelet_approx_defense(img, levels=1, bank=BIOR31):
    """Keep the level-``levels`` approximation band and resize it back."""
    img = as_image(img)
    h, w, nc = img.shape
    gain = 2.0 ** (-levels)
    approx = np.stack(
        [dwt2(img[:, :, c], levels, bank).approx * gain for c in range(nc)], axis=2
    )
    return resize_bicubic(approx, h, w)


def soft_threshold_channel(channel, levels, bank=BIOR31):
    pyr = dwt2(channel, levels, bank)
    t = universal_threshold(estimate_sigma(pyr), channel.size)
    pyr.details = [tuple(soft_threshold(band, t) for band in bands) for bands in pyr.details]
    return idwt2(pyr, bank)


def soft_threshold_defense(img, levels=2, bank=BIOR31):
    """Wavelet shrinkage with one universal threshold per channel."""
    img = as_image(img)
    out = np.stack(
        [soft_threshold_channel(img[:, :, c], levels, bank) for c in range(img.shape[2])], axis=2
    )
    return clip(out)
