"""Readers and writers for 8-bit PNG, binary PPM (P6) and MNIST IDX files.

Pixel values are scaled by 1/255 on load and rounded back to 8 bits on save.
IDX files may be gzip-compressed; the ``.gz`` suffix selects compression.
"""

import gzip
import struct
from contextlib import contextmanager
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ShapeMismatch

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


def _open(path, mode):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, mode)
    return open(path, mode)


def to_uint8(img):
    return np.clip(np.rint(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)


def read_png(path):
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.uint8)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr.astype(np.float64) / 255.0


def write_png(path, img):
    arr = to_uint8(img)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    Image.fromarray(arr).save(path, format="PNG")


def _ppm_tokens(buf):
    """Yield header tokens of a netpbm file, skipping comments."""
    pos = 0
    tokens = []
    while len(tokens) < 4:
        while pos < len(buf) and buf[pos : pos + 1].isspace():
            pos += 1
        if buf[pos : pos + 1] == b"#":
            while pos < len(buf) and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PPM header")
        tokens.append(buf[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def read_ppm(path):
    buf = Path(path).read_bytes()
    (magic, width, height, maxval), offset = _ppm_tokens(buf)
    if magic != b"P6":
        raise ValueError(f"not a binary PPM file: magic {magic!r}")
    width, height, maxval = int(width), int(height), int(maxval)
    if maxval != 255:
        raise ValueError("only 8-bit PPM files are supported")
    raster = np.frombuffer(buf, dtype=np.uint8, count=width * height * 3, offset=offset)
    return raster.reshape(height, width, 3).astype(np.float64) / 255.0


def write_ppm(path, img):
    arr = to_uint8(img)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ShapeMismatch("PPM output needs an RGB image")
    h, w, _ = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(arr.tobytes())


def read_image(path):
    suffix = Path(path).suffix.lower()
    if suffix in (".ppm", ".pnm"):
        return read_ppm(path)
    return read_png(path)


def write_image(path, img):
    suffix = Path(path).suffix.lower()
    if suffix in (".ppm", ".pnm"):
        write_ppm(path, img)
    else:
        write_png(path, img)


def read_idx_images(path):
    """Return an ``(N, H, W, 1)`` float array from an IDX3 image file."""
    with _open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 16:
        raise ValueError("truncated IDX image file")
    magic, n, h, w = struct.unpack(">IIII", data[:16])
    if magic != IDX_IMAGES_MAGIC:
        raise ValueError(f"bad IDX image magic 0x{magic:08x}")
    if len(data) != 16 + n * h * w:
        raise ValueError("IDX image payload size does not match header")
    pixels = np.frombuffer(data, dtype=np.uint8, offset=16).reshape(n, h, w, 1)
    return pixels.astype(np.float64) / 255.0


def read_idx_labels(path):
    with _open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 8:
        raise ValueError("truncated IDX label file")
    magic, n = struct.unpack(">II", data[:8])
    if magic != IDX_LABELS_MAGIC:
        raise ValueError(f"bad IDX label magic 0x{magic:08x}")
    if len(data) != 8 + n:
        raise ValueError("IDX label payload size does not match header")
    return np.frombuffer(data, dtype=np.uint8, offset=8).astype(np.int64)


@contextmanager
def _create(path):
    """Binary writer; ``.gz`` output omits name and mtime so bytes are stable."""
    with open(path, "wb") as raw:
        if Path(path).suffix == ".gz":
            with gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0) as fh:
                yield fh
        else:
            yield raw


def write_idx_images(path, images):
    arr = to_uint8(images)
    if arr.ndim == 4:
        if arr.shape[3] != 1:
            raise ShapeMismatch("IDX images must be single channel")
        arr = arr[..., 0]
    n, h, w = arr.shape
    with _create(path) as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, h, w))
        fh.write(arr.tobytes())


def write_idx_labels(path, labels):
    arr = np.asarray(labels).astype(np.uint8)
    with _create(path) as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, arr.shape[0]))
        fh.write(arr.tobytes())
