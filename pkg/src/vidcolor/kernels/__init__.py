"""Numpy-side hot kernels with a compiled backend and a pure-numpy fallback.

The compiled extension is used when it imports; set ``VIDCOLOR_PURE_PYTHON=1``
to force the fallback. Arrays are coerced to C-contiguous float64.

warp(frame[C,H,W], flow[2,H,W])
    Backward bilinear warp with clamp-to-edge borders: out(p) = frame(p + flow(p)).
sq_error_map(a, b)
    Per-pixel squared error summed over channels, shape [H, W].
masked_sq_error(a, b, mask)
    (sum of mask * per-pixel squared error, sum of mask).
"""
import os

import numpy as np

from . import _fallback

BACKEND = "python"
_impl = _fallback
if not os.environ.get("VIDCOLOR_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        _impl = _fallback


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def warp(frame, flow, impl=None):
    frame, flow = _f64(frame), _f64(flow)
    if frame.ndim != 3 or flow.ndim != 3 or flow.shape[0] != 2:
        raise ValueError(f"expected frame [C,H,W] and flow [2,H,W], got {frame.shape}, {flow.shape}")
    if frame.shape[1:] != flow.shape[1:]:
        raise ValueError(f"frame {frame.shape} and flow {flow.shape} differ in H, W")
    if not np.all(np.isfinite(flow)):
        raise ValueError("flow contains non-finite values")
    return (impl or _impl).warp(frame, flow)


def sq_error_map(a, b, impl=None):
    a, b = _f64(a), _f64(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return (impl or _impl).sq_error_map(a, b)


def masked_sq_error(a, b, mask, impl=None):
    a, b, mask = _f64(a), _f64(b), _f64(mask)
    if a.shape != b.shape or mask.shape != a.shape[1:]:
        raise ValueError(f"shape mismatch: {a.shape}, {b.shape}, mask {mask.shape}")
    num, den = (impl or _impl).masked_sq_error(a, b, mask)
    return float(num), float(den)
