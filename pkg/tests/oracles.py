"""Slow reference implementations used only by the tests."""

import numpy as np


def brute_dft2(x):
    """Direct evaluation of sum_n x[n] exp(-2 pi i <k, n/N>)."""
    h, w = x.shape
    n1 = np.arange(h)
    n2 = np.arange(w)
    out = np.zeros((h, w), dtype=complex)
    for k1 in range(h):
        for k2 in range(w):
            phase = np.exp(-2j * np.pi * (k1 * n1[:, None] / h + k2 * n2[None, :] / w))
            out[k1, k2] = np.sum(x * phase)
    return out


def brute_dct8(block):
    """Orthonormal 2-D DCT-II written as the explicit double sum."""
    out = np.zeros((8, 8))
    for u in range(8):
        for v in range(8):
            cu = np.sqrt(1 / 8) if u == 0 else np.sqrt(2 / 8)
            cv = np.sqrt(1 / 8) if v == 0 else np.sqrt(2 / 8)
            s = 0.0
            for i in range(8):
                for j in range(8):
                    s += block[i, j] * np.cos((2 * i + 1) * u * np.pi / 16) * np.cos((2 * j + 1) * v * np.pi / 16)
            out[u, v] = cu * cv * s
    return out


def central_difference(f, x, coords, h=1e-3):
    """Central-difference partial derivatives of scalar ``f`` at flat ``coords``."""
    flat = x.ravel()
    out = []
    for idx in coords:
        plus = flat.copy()
        minus = flat.copy()
        plus[idx] += h
        minus[idx] -= h
        out.append((f(plus.reshape(x.shape)) - f(minus.reshape(x.shape))) / (2 * h))
    return np.array(out)


def relative_error(a, b, floor=1e-6):
    a, b = np.asarray(a), np.asarray(b)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def activation_pattern(model, x):
    """ReLU masks and pooling argmaxes of one forward pass, flattened."""
    from basisguard.model import GradientTape, MaxPool2, ReLU

    tape = GradientTape()
    model.forward(x, tape)
    parts = []
    for layer, cache in tape.take():
        if isinstance(layer, ReLU):
            parts.append(cache.ravel().astype(np.int8))
        elif isinstance(layer, MaxPool2):
            parts.append(cache[0].ravel().astype(np.int8))
    return np.concatenate(parts)


def smooth_coordinates(model, x, n, seed, h=1e-3):
    """Draw ``n`` flat coordinates whose +-h probes stay in x's linear region.

    A central difference straddling a ReLU kink or a pooling switch measures
    a different piece of the function, so such coordinates are not valid
    probes of the derivative at ``x``.
    """
    base = activation_pattern(model, x)
    flat = x.ravel()
    chosen = []
    for idx in np.random.default_rng(seed).permutation(x.size):
        ok = True
        for sign in (1, -1):
            probe = flat.copy()
            probe[idx] += sign * h
            if not np.array_equal(activation_pattern(model, probe.reshape(x.shape)), base):
                ok = False
                break
        if ok:
            chosen.append(idx)
            if len(chosen) == n:
                break
    return np.array(chosen)


def layer_gradient_errors(layer, params, x, n=200, seed=0, h=1e-3, floor=1e-4):
    """Relative errors of one layer's backward pass against central differences.

    The probe is ``<w, layer(x)>`` for a fixed random ``w``.  Returns the
    errors for the input gradient and for each parameter gradient, measured on
    up to ``n`` coordinates whose probes do not move a ReLU or pooling switch.
    """
    out, cache = layer.forward(params, x)
    w = np.random.default_rng(seed).normal(size=out.shape)
    dx, grads = layer.backward(params, w, cache)

    def switches(v):
        c = layer.forward(params, v)[1]
        return c[0] if isinstance(c, tuple) and c[0].dtype == np.int8 else c

    piecewise = type(layer).__name__ in ("ReLU", "MaxPool2")
    base = switches(x) if piecewise else None
    flat = x.ravel()
    coords = []
    for idx in np.random.default_rng(seed + 1).permutation(x.size):
        if piecewise:
            stable = True
            for sign in (1, -1):
                probe = flat.copy()
                probe[idx] += sign * h
                if not np.array_equal(switches(probe.reshape(x.shape)), base):
                    stable = False
            if not stable:
                continue
        coords.append(idx)
        if len(coords) == n:
            break
    f = lambda v: float(np.sum(layer.forward(params, v)[0] * w))
    errors = {"input": relative_error(dx.ravel()[coords], central_difference(f, x, coords, h), floor)}
    for name, g in grads.items():
        p = params[name]
        pc = np.random.default_rng(seed + 2).choice(p.size, size=min(n, p.size), replace=False)

        def fp(v, name=name):
            return float(np.sum(layer.forward({**params, name: v}, x)[0] * w))

        errors[name] = relative_error(g.ravel()[pc], central_difference(fp, p, pc, h), floor)
    return errors
