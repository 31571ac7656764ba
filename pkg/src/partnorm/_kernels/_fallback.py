"""Pure numpy implementation of the hot kernels."""
import math

import numpy as np

_MIN_SEGMENT = 1e-12


def _ray_extent(s, c, sn, half_x, half_y):
    # t-interval where s*(c, sn) + t*(-sn, c) lies inside the image box
    t_lo, t_hi = -math.inf, math.inf
    x0, y0 = s * c, s * sn
    if abs(sn) > 1e-15:
        a = (x0 - half_x) / sn
        b = (x0 + half_x) / sn
        t_lo, t_hi = max(t_lo, min(a, b)), min(t_hi, max(a, b))
    elif not (-half_x <= x0 <= half_x):
        return None
    if abs(c) > 1e-15:
        a = (-half_y - y0) / c
        b = (half_y - y0) / c
        t_lo, t_hi = max(t_lo, min(a, b)), min(t_hi, max(a, b))
    elif not (-half_y <= y0 <= half_y):
        return None
    if t_hi - t_lo <= _MIN_SEGMENT:
        return None
    return t_lo, t_hi


def siddon_system(ny, nx, angles, det_count, det_spacing=1.0):
    """Exact line-length weights of a 2D parallel-beam geometry.

    Returns COO triplets ``(rows, cols, vals)``; row ``a * det_count + b`` is
    the ray at angle index ``a`` and detector bin ``b``, column ``i * nx + j``
    is pixel ``[i, j]``.
    """
    angles = np.ascontiguousarray(angles, dtype=np.float64)
    half_x, half_y = 0.5 * nx, 0.5 * ny
    xs = np.arange(nx + 1, dtype=np.float64) - half_x
    ys = np.arange(ny + 1, dtype=np.float64) - half_y
    rows, cols, vals = [], [], []
    for a, theta in enumerate(angles):
        c, sn = math.cos(theta), math.sin(theta)
        for b in range(det_count):
            s = (b - 0.5 * (det_count - 1)) * det_spacing
            ext = _ray_extent(s, c, sn, half_x, half_y)
            if ext is None:
                continue
            t_lo, t_hi = ext
            x0, y0 = s * c, s * sn
            parts = [np.array([t_lo, t_hi])]
            if abs(sn) > 1e-15:
                parts.append((x0 - xs) / sn)
            if abs(c) > 1e-15:
                parts.append((ys - y0) / c)
            t = np.concatenate(parts)
            t = np.sort(t[(t >= t_lo) & (t <= t_hi)])
            seg = np.diff(t)
            keep = seg > _MIN_SEGMENT
            mid = 0.5 * (t[:-1] + t[1:])[keep]
            seg = seg[keep]
            j = np.floor(x0 - mid * sn + half_x).astype(np.int64)
            i = np.floor(y0 + mid * c + half_y).astype(np.int64)
            np.clip(j, 0, nx - 1, out=j)
            np.clip(i, 0, ny - 1, out=i)
            rows.append(np.full(seg.shape, a * det_count + b, dtype=np.int64))
            cols.append(i * nx + j)
            vals.append(seg)
    if not rows:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty.copy(), np.zeros(0)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
