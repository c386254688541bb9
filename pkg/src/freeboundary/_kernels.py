"""Hot kernels: compiled extension when available, numpy otherwise."""
import numpy as np

from . import _kernels_py

try:
    from . import _pair_scan as _compiled
    HAVE_COMPILED = True
except ImportError:  # pragma: no cover - depends on build
    _compiled = None
    HAVE_COMPILED = False

BACKEND = "compiled" if HAVE_COMPILED else "python"


def pair_scan(D, pts, s, backend=None):
    backend = backend or BACKEND
    if backend == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError("compiled kernels are not built")
        return _compiled.pair_scan(np.ascontiguousarray(D, dtype=float),
                                   np.ascontiguousarray(pts, dtype=float), float(s))
    return _kernels_py.pair_scan(D, pts, s)
