"""Compiled and pure-Python pair scans agree."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from freeboundary import _kernels, _kernels_py

needs_compiled = pytest.mark.skipif(not _kernels.HAVE_COMPILED, reason="extension not built")


def _loop(D, pts, s):
    n = D.shape[1]
    best = 0.0
    for i in range(n):
        for j in range(n):
            d = np.hypot(*(pts[:, i] - pts[:, j]))
            if d > 0:
                best = max(best, np.abs(D[:, i] - D[:, j]).sum() / d ** s)
    return best


values = arrays(float, (2, 9), elements=st.floats(-10, 10, allow_nan=False))
points = arrays(float, (2, 9), elements=st.floats(-1, 1, allow_nan=False))


@given(values, points, st.floats(0.05, 0.95))
@settings(max_examples=40, deadline=None)
def test_python_matches_loop(D, pts, s):
    assert _kernels_py.pair_scan(D, pts, s, chunk=4) == pytest.approx(_loop(D, pts, s), rel=1e-12, abs=1e-300)


@needs_compiled
@given(values, points, st.floats(0.05, 0.95))
@settings(max_examples=40, deadline=None)
def test_compiled_matches_python(D, pts, s):
    a = _kernels.pair_scan(D, pts, s, backend="compiled")
    b = _kernels.pair_scan(D, pts, s, backend="python")
    assert a == pytest.approx(b, rel=1e-13, abs=1e-300)


def test_duplicate_points_ignored():
    pts = np.zeros((2, 3))
    assert _kernels_py.pair_scan(np.ones((1, 3)), pts, 0.5) == 0.0


def test_backend_names():
    assert _kernels.BACKEND in ("compiled", "python")
    if not _kernels.HAVE_COMPILED:
        with pytest.raises(RuntimeError):
            _kernels.pair_scan(np.ones((1, 2)), np.eye(2), 0.5, backend="compiled")
