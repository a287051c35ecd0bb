import os
import subprocess
import sys

import numpy as np
import pytest

from basisguard import _kernels_py, kernels

compiled = pytest.importorskip("basisguard._kernels")


@pytest.fixture
def x():
    return np.random.default_rng(0).normal(size=(3, 10, 12, 4))


def test_compiled_backend_selected():
    assert kernels.BACKEND == "compiled"


def test_im2col_bitwise(x):
    np.testing.assert_array_equal(compiled.im2col3x3(x), _kernels_py.im2col3x3(x))


def test_col2im_bitwise(x):
    d = np.random.default_rng(1).normal(size=(3 * 10 * 12, 9 * 4))
    np.testing.assert_array_equal(compiled.col2im3x3(d, 3, 10, 12, 4), _kernels_py.col2im3x3(d, 3, 10, 12, 4))


def test_col2im_is_adjoint_of_im2col(x):
    d = np.random.default_rng(2).normal(size=(3 * 10 * 12, 36))
    lhs = np.sum(_kernels_py.im2col3x3(x) * d)
    rhs = np.sum(x * _kernels_py.col2im3x3(d, 3, 10, 12, 4))
    assert abs(lhs - rhs) < 1e-9


def test_im2col_centre_column_is_input(x):
    cols = _kernels_py.im2col3x3(x).reshape(3, 10, 12, 9, 4)
    np.testing.assert_array_equal(cols[:, :, :, 4], x)


def test_maxpool_bitwise(x):
    out_c, arg_c = compiled.maxpool2_forward(x)
    out_p, arg_p = _kernels_py.maxpool2_forward(x)
    np.testing.assert_array_equal(out_c, out_p)
    np.testing.assert_array_equal(arg_c, arg_p)
    d = np.random.default_rng(3).normal(size=out_p.shape)
    np.testing.assert_array_equal(compiled.maxpool2_backward(d, arg_c, 10, 12), _kernels_py.maxpool2_backward(d, arg_p, 10, 12))


def test_maxpool_ties_pick_first():
    x = np.zeros((1, 2, 2, 1))
    out, arg = _kernels_py.maxpool2_forward(x)
    g = _kernels_py.maxpool2_backward(np.ones_like(out), arg, 2, 2)
    assert g[0, 0, 0, 0] == 1 and g.sum() == 1


def test_maxpool_odd_size_drops_border():
    x = np.random.default_rng(4).normal(size=(1, 5, 7, 2))
    out, _ = _kernels_py.maxpool2_forward(x)
    assert out.shape == (1, 2, 3, 2)
    np.testing.assert_array_equal(out[0, 1, 2], x[0, 2:4, 4:6].max(axis=(0, 1)))


def test_pure_python_switch():
    env = dict(os.environ, BASISGUARD_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from basisguard import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_benchmark_smoke(capsys):
    import runpy
    from pathlib import Path

    bench = runpy.run_path(str(Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"))
    assert bench["main"](["--batch", "2", "--repeat", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()[1:]
    assert len(lines) == 4 and all(line.endswith("True") for line in lines)
