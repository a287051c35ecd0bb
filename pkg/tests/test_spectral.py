import numpy as np
import pytest

from basisguard.spectral import (
    dct8_forward, dct8_inverse, default_radius, dft2, disk_mask, frequency_radius, idft2, lowpass_channel,
    lowpass_filter,
)

from oracles import brute_dct8, brute_dft2


@pytest.mark.parametrize("shape", [(8, 8), (5, 7), (9, 4)])
def test_dft2_matches_direct_sum(shape):
    x = np.random.default_rng(sum(shape)).random(shape)
    np.testing.assert_allclose(dft2(x), brute_dft2(x), atol=1e-9)


def test_dft2_constant_is_dc_only():
    X = dft2(np.full((6, 10), 0.25))
    assert abs(X[0, 0] - 0.25 * 60) < 1e-9
    X[0, 0] = 0
    assert np.max(np.abs(X)) < 1e-9


def test_dft2_row_cosine_energy_at_plus_minus_k():
    k1 = 2
    n = np.arange(8)
    x = np.cos(2 * np.pi * k1 * n / 8)[:, None] * np.ones((1, 8))
    X = brute_dft2(x)
    support = {tuple(i) for i in np.argwhere(np.abs(X) > 1e-9)}
    assert support == {(k1, 0), (8 - k1, 0)}
    np.testing.assert_allclose(dft2(x), X, atol=1e-9)


def test_parseval():
    x = np.random.default_rng(3).random((11, 6))
    X = dft2(x)
    assert abs(np.sum(x**2) - np.sum(np.abs(X) ** 2) / x.size) < 1e-9


def test_idft2_round_trip_odd_sizes():
    x = np.random.default_rng(4).random((13, 17))
    assert np.max(np.abs(idft2(dft2(x)).real - x)) < 1e-9


def test_lowpass_all_pass():
    x = np.random.default_rng(5).random((12, 10, 3))
    big = frequency_radius(12, 10).max()
    assert np.max(np.abs(lowpass_filter(x, big) - x)) < 1e-6


def test_lowpass_keeps_constants():
    x = np.full((9, 9, 1), 0.6)
    np.testing.assert_allclose(lowpass_filter(x, 0.5), x, atol=1e-12)


def test_lowpass_nyquist_checkerboard_goes_to_mean():
    i, j = np.indices((8, 8))
    board = ((i + j) % 2).astype(float)
    X = brute_dft2(board)
    nonzero = {tuple(k) for k in np.argwhere(np.abs(X) > 1e-9)}
    assert nonzero == {(0, 0), (4, 4)}
    nyquist = np.hypot(4, 4)
    out = lowpass_filter(board[:, :, None], nyquist - 0.1)
    np.testing.assert_allclose(out, 0.5, atol=1e-12)


def test_lowpass_idempotent_and_real():
    x = 0.25 + 0.5 * np.random.default_rng(6).random((16, 14))
    once = lowpass_channel(x, 4.0)
    twice = lowpass_channel(once, 4.0)
    assert np.max(np.abs(once - twice)) < 1e-6
    assert np.max(np.abs(np.fft.ifft2(np.fft.fft2(x) * disk_mask(16, 14, 4.0)).imag)) < 1e-9


def test_lowpass_energy_monotone_in_radius():
    x = np.random.default_rng(7).random((15, 15))
    X = dft2(x)
    energies = [np.sum(np.abs(X * disk_mask(15, 15, r)) ** 2) for r in (0.5, 1, 2, 3.5, 6, 11)]
    assert all(a <= b for a, b in zip(energies, energies[1:]))


def test_default_radius_scales_from_299():
    assert default_radius(299, 299) == 65
    assert abs(default_radius(28, 40) - 65 * 28 / 299) < 1e-12


def test_dct8_matches_double_sum():
    block = np.random.default_rng(8).random((8, 8))
    np.testing.assert_allclose(dct8_forward(block), brute_dct8(block), atol=1e-12)


def test_dct8_constant_block():
    c = dct8_forward(np.full((8, 8), 0.7))
    assert abs(c[0, 0] - 5.6) < 1e-12
    c[0, 0] = 0
    assert np.max(np.abs(c)) < 1e-12


def test_dct8_round_trip_and_energy():
    rng = np.random.default_rng(9)
    for _ in range(20):
        b = rng.normal(size=(8, 8)) * 100
        c = dct8_forward(b)
        assert np.max(np.abs(dct8_inverse(c) - b)) < 1e-10
        assert abs(np.sum(b**2) - np.sum(c**2)) < 1e-8 * np.sum(b**2)
