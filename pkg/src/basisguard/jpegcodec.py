"""In-memory lossy JPEG round trip used as a defense.

Colour conversion, 4:2:0 chroma subsampling, 8x8 block DCT and quantisation
with IJG-scaled tables.  Entropy coding is lossless and therefore skipped.
"""

from dataclasses import dataclass

import numpy as np

from .errors import BadQuality
from .imagecore import as_image, clip, rgb_to_ycbcr, ycbcr_to_rgb
from .spectral import dct8_forward, dct8_inverse

# ITU T.81 Annex K, tables K.1 and K.2
BASE_LUMA = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.int64,
)
BASE_CHROMA = np.array(
    [
        [17, 18, 24, 47, 99, 99, 99, 99],
        [18, 21, 26, 66, 99, 99, 99, 99],
        [24, 26, 56, 99, 99, 99, 99, 99],
        [47, 66, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
    ],
    dtype=np.int64,
)


@dataclass(frozen=True)
class QuantTables:
    luma: np.ndarray
    chroma: np.ndarray
    quality: int


def quality_scale(quality):
    return 5000 // quality if quality < 50 else 200 - 2 * quality


def scale_quant_tables(quality):
    if isinstance(quality, bool) or int(quality) != quality or not 1 <= quality <= 100:
        raise BadQuality(f"quality must be an integer in [1, 100], got {quality!r}")
    quality = int(quality)
    scale = quality_scale(quality)

    def scaled(base):
        return np.clip((base * scale + 50) // 100, 1, 255)

    return QuantTables(luma=scaled(BASE_LUMA), chroma=scaled(BASE_CHROMA), quality=quality)


def round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def _blocks(channel):
    """Split an ``(H, W)`` array (multiples of 8) into ``(bh, bw, 8, 8)`` blocks."""
    h, w = channel.shape
    return channel.reshape(h // 8, 8, w // 8, 8).transpose(0, 2, 1, 3)


def _unblocks(blocks):
    bh, bw = blocks.shape[:2]
    return blocks.transpose(0, 2, 1, 3).reshape(bh * 8, bw * 8)


def quantize_channel(channel, table):
    """Level-shift, blockwise DCT, quantise/dequantise, inverse DCT.

    ``channel`` is on the 0..255 scale; the result is too, unclipped.
    """
    h, w = channel.shape
    ph, pw = -(-h // 8) * 8, -(-w // 8) * 8
    padded = np.pad(channel, ((0, ph - h), (0, pw - w)), mode="edge") - 128.0
    coeffs = dct8_forward(_blocks(padded))
    coeffs = round_half_away(coeffs / table) * table
    return _unblocks(dct8_inverse(coeffs))[:h, :w] + 128.0


def subsample_420(channel):
    """2x2 box average; odd borders are edge-replicated first."""
    h, w = channel.shape
    padded = np.pad(channel, ((0, h % 2), (0, w % 2)), mode="edge")
    ph, pw = padded.shape
    return padded.reshape(ph // 2, 2, pw // 2, 2).mean(axis=(1, 3))


def upsample_420(channel, shape):
    up = np.repeat(np.repeat(channel, 2, axis=0), 2, axis=1)
    return up[: shape[0], : shape[1]]


def jpeg_defense(img, quality=23):
    img = as_image(img)
    tables = scale_quant_tables(quality)
    h, w, nc = img.shape
    if nc == 1:
        out = quantize_channel(img[:, :, 0] * 255.0, tables.luma) / 255.0
        return clip(out[:, :, None])

    ycc = rgb_to_ycbcr(img)
    y = quantize_channel(ycc[:, :, 0] * 255.0, tables.luma) / 255.0
    chroma = []
    for c in (1, 2):
        # 8-bit chroma is centred on 128 so neutral gray sits on the level shift
        c8 = (ycc[:, :, c] - 0.5) * 255.0 + 128.0
        small = quantize_channel(subsample_420(c8), tables.chroma)
        chroma.append((upsample_420(small, (h, w)) - 128.0) / 255.0 + 0.5)
    return clip(ycbcr_to_rgb(np.stack([y, *chroma], axis=2)))
