"""Middlebury ``.flo`` reader/writer.

Layout (little-endian): float32 magic 202021.25, int32 width, int32 height,
then row-major interleaved float32 (u, v) pairs. In memory flows are
``[2, H, W]`` arrays.
"""
import numpy as np

FLO_MAGIC = 202021.25


def write_flo(path, flow):
    flow = np.asarray(flow)
    if flow.ndim != 3 or flow.shape[0] != 2:
        raise ValueError(f"flow must be [2, H, W], got {flow.shape}")
    _, h, w = flow.shape
    with open(path, "wb") as f:
        np.array([FLO_MAGIC], dtype="<f4").tofile(f)
        np.array([w, h], dtype="<i4").tofile(f)
        np.ascontiguousarray(flow.transpose(1, 2, 0), dtype="<f4").tofile(f)


def read_flo(path):
    with open(path, "rb") as f:
        magic = np.fromfile(f, dtype="<f4", count=1)
        if magic.size != 1 or magic[0] != np.float32(FLO_MAGIC):
            raise ValueError(f"{path}: bad .flo magic number")
        dims = np.fromfile(f, dtype="<i4", count=2)
        if dims.size != 2 or dims.min() <= 0:
            raise ValueError(f"{path}: bad .flo header")
        w, h = int(dims[0]), int(dims[1])
        data = np.fromfile(f, dtype="<f4", count=2 * w * h)
    if data.size != 2 * w * h:
        raise ValueError(f"{path}: truncated .flo payload")
    return data.reshape(h, w, 2).transpose(2, 0, 1).copy()
