"""Pure numpy versions of the convolution/pooling kernels.

Accumulation order matches the compiled module term for term, so both
backends produce bitwise-identical results.
"""

import numpy as np


def im2col3x3(x):
    """``(N, H, W, C)`` -> ``(N*H*W, 9*C)`` patches with zero 'same' padding."""
    n, h, w, c = x.shape
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    cols = np.empty((n, h, w, 9, c))
    for k in range(9):
        dy, dx = divmod(k, 3)
        cols[:, :, :, k, :] = xp[:, dy : dy + h, dx : dx + w, :]
    return cols.reshape(n * h * w, 9 * c)


def col2im3x3(dcols, n, h, w, c):
    dcols = dcols.reshape(n, h, w, 9, c)
    dxp = np.zeros((n, h + 2, w + 2, c))
    for k in range(9):
        dy, dx = divmod(k, 3)
        dxp[:, dy : dy + h, dx : dx + w, :] += dcols[:, :, :, k, :]
    return dxp[:, 1 : h + 1, 1 : w + 1, :].copy()


def maxpool2_forward(x):
    """2x2/stride-2 max pooling; returns the output and the winning offsets (0..3)."""
    n, h, w, c = x.shape
    ho, wo = h // 2, w // 2
    win = x[:, : 2 * ho, : 2 * wo, :].reshape(n, ho, 2, wo, 2, c)
    win = win.transpose(0, 1, 3, 5, 2, 4).reshape(n, ho, wo, c, 4)
    arg = np.argmax(win, axis=-1)
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
    return out, arg.astype(np.int8)


def maxpool2_backward(dout, arg, h, w):
    n, ho, wo, c = dout.shape
    dwin = np.zeros((n, ho, wo, c, 4))
    np.put_along_axis(dwin, arg[..., None].astype(np.intp), dout[..., None], axis=-1)
    dwin = dwin.reshape(n, ho, wo, c, 2, 2).transpose(0, 1, 4, 2, 5, 3)
    dx = np.zeros((n, h, w, c))
    dx[:, : 2 * ho, : 2 * wo, :] = dwin.reshape(n, 2 * ho, 2 * wo, c)
    return dx
