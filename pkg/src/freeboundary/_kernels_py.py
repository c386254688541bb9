"""Pure numpy fallbacks for the compiled kernels."""
import numpy as np


def pair_scan(D: np.ndarray, pts: np.ndarray, s: float, chunk: int = 512) -> float:
    """max_{i != j} sum_m |D[m,i] - D[m,j]| / |p_i - p_j|^s."""
    D = np.ascontiguousarray(D, dtype=float)
    pts = np.ascontiguousarray(pts, dtype=float)
    n = D.shape[1]
    best = 0.0
    for i0 in range(0, n, chunk):
        i1 = min(n, i0 + chunk)
        dx = pts[0, i0:i1, None] - pts[0, None, :]
        dy = pts[1, i0:i1, None] - pts[1, None, :]
        dist = np.hypot(dx, dy)
        num = np.zeros_like(dist)
        for m in range(D.shape[0]):
            num += np.abs(D[m, i0:i1, None] - D[m, None, :])
        ok = dist > 0
        q = np.zeros_like(dist)
        q[ok] = num[ok] / dist[ok] ** s
        best = max(best, float(q.max()))
    return best
