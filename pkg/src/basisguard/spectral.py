"""2-D Fourier transform, 8x8 DCT-II and the circular low-pass defense."""

import numpy as np

from .imagecore import as_image, clip

REFERENCE_SIDE = 299
REFERENCE_RADIUS = 65.0


def dft2(channel):
    """Unnormalised forward DFT: ``X[k] = sum_n x[n] exp(-2 pi i <k, n/N>)``."""
    return np.fft.fft2(np.asarray(channel, dtype=np.float64))


def idft2(spectrum):
    return np.fft.ifft2(spectrum)


def frequency_radius(h, w):
    """Distance of every DFT bin from the zero frequency, in bin units.

    Equivalent to measuring on the fftshift-ed spectrum, but kept in the
    natural bin order.
    """
    ky = np.fft.fftfreq(h) * h
    kx = np.fft.fftfreq(w) * w
    return np.hypot(ky[:, None], kx[None, :])


def disk_mask(h, w, radius):
    return frequency_radius(h, w) <= radius


def default_radius(h, w):
    """Scale the radius tuned for 299x299 inputs to an ``h x w`` image."""
    return REFERENCE_RADIUS * min(h, w) / REFERENCE_SIDE


def lowpass_channel(channel, radius):
    channel = np.asarray(channel, dtype=np.float64)
    mask = disk_mask(*channel.shape, radius)
    out = idft2(dft2(channel) * mask)
    # the disk is symmetric under k -> -k, so the result is real up to rounding
    residue = float(np.max(np.abs(out.imag))) if out.size else 0.0
    if residue > 1e-9:
        raise ArithmeticError(f"low-pass output has imaginary residue {residue:.3g}")
    return out.real


def lowpass_filter(img, radius):
    """Keep Fourier coefficients inside a disk of ``radius`` bins, per channel."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    img = as_image(img)
    out = np.stack([lowpass_channel(img[:, :, c], radius) for c in range(img.shape[2])], axis=2)
    return clip(out)


def dct_matrix(n=8):
    """Orthonormal DCT-II matrix ``C`` with ``coeffs = C @ x``."""
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    mat = np.cos(np.pi * (2 * i + 1) * k / (2 * n)) * np.sqrt(2.0 / n)
    mat[0, :] = np.sqrt(1.0 / n)
    return mat


DCT8 = dct_matrix(8)


def dct8_forward(block):
    """2-D orthonormal DCT-II of one or more 8x8 blocks (trailing axes)."""
    block = np.asarray(block, dtype=np.float64)
    if block.shape[-2:] != (8, 8):
        raise ValueError(f"expected 8x8 blocks, got {block.shape}")
    return DCT8 @ block @ DCT8.T


def dct8_inverse(coeffs):
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape[-2:] != (8, 8):
        raise ValueError(f"expected 8x8 blocks, got {coeffs.shape}")
    return DCT8.T @ coeffs @ DCT8
