"""Pure numpy versions of the compiled kernels (same arithmetic order)."""
import numpy as np


def warp(frame, flow):
    C, H, W = frame.shape
    sx = np.clip(np.arange(W, dtype=np.float64)[None, :] + flow[0], 0.0, W - 1)
    sy = np.clip(np.arange(H, dtype=np.float64)[:, None] + flow[1], 0.0, H - 1)
    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    wx = sx - x0
    wy = sy - y0
    top = (1.0 - wx) * frame[:, y0, x0] + wx * frame[:, y0, x1]
    bot = (1.0 - wx) * frame[:, y1, x0] + wx * frame[:, y1, x1]
    return (1.0 - wy) * top + wy * bot


def sq_error_map(a, b):
    return np.sum((a - b) ** 2, axis=0)


def masked_sq_error(a, b, mask):
    # running sums in row-major order, matching the compiled loop bit for bit
    if mask.size == 0:
        return 0.0, 0.0
    err = sq_error_map(a, b)
    return float(np.cumsum((mask * err).ravel())[-1]), float(np.cumsum(mask.ravel())[-1])
