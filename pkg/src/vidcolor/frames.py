"""Frame conventions, normalization and grayscale conversion.

Frames are tensors (or arrays) shaped ``[..., C, H, W]`` with values in
``[-1, 1]``; ``C == 1`` is grayscale and ``C == 3`` is RGB. A clip is a stack
``[T, ..., C, H, W]``. Flow fields are ``[..., 2, H, W]`` in pixels, channel 0
horizontal, channel 1 vertical, in backward-sampling convention: ``flow(p)``
points from target pixel ``p`` to its source location in the earlier frame.
"""
import numpy as np
import torch

# BT.601 luma weights
LUMA_R = 0.299
LUMA_G = 0.587
LUMA_B = 0.114


def _channels(frame):
    if frame.ndim < 3:
        raise ValueError(f"expected a frame shaped [..., C, H, W], got {tuple(frame.shape)}")
    return frame.shape[-3]


def to_grayscale(frame):
    """RGB -> single-channel luma, linear and exact on gray inputs.

    Written as ``G + wr (R - G) + wb (B - G)`` so that equal channels map
    back to the same value bit-for-bit. Because the weights sum to one the
    [-1, 1] rescale commutes with the transform.
    """
    if _channels(frame) != 3:
        raise ValueError(f"to_grayscale needs a 3-channel frame, got {_channels(frame)} channels")
    r, g, b = frame[..., 0:1, :, :], frame[..., 1:2, :, :], frame[..., 2:3, :, :]
    gray = g + LUMA_R * (r - g) + LUMA_B * (b - g)
    if isinstance(gray, torch.Tensor):
        return gray.clamp(-1.0, 1.0)
    return np.clip(gray, -1.0, 1.0)


def replicate_channels(frame):
    if _channels(frame) != 1:
        raise ValueError(f"replicate_channels needs a 1-channel frame, got {_channels(frame)} channels")
    if isinstance(frame, torch.Tensor):
        return frame.expand(*frame.shape[:-3], 3, *frame.shape[-2:])
    return np.repeat(frame, 3, axis=-3)


def normalize(raw):
    """8-bit pixel values -> float frame in [-1, 1]."""
    arr = np.asarray(raw)
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise ValueError(f"pixel values outside [0, 255]: [{arr.min()}, {arr.max()}]")
    return arr.astype(np.float64) / 127.5 - 1.0


def denormalize(frame):
    """Float frame in [-1, 1] -> uint8, rounding to nearest."""
    arr = np.asarray(frame, dtype=np.float64)
    return np.clip(np.rint((arr + 1.0) * 127.5), 0, 255).astype(np.uint8)


def to_unit(frame):
    """[-1, 1] -> [0, 1], the scale metrics are computed in."""
    return (frame + 1.0) / 2.0


def check_frames(frames, channels=None):
    """Validate a frame or stack: finite, in [-1, 1], and with the given channel count."""
    if channels is not None and _channels(frames) != channels:
        raise ValueError(f"expected {channels} channels, got {_channels(frames)}")
    t = torch.as_tensor(frames)
    if not torch.isfinite(t).all():
        raise ValueError("frame contains non-finite values")
    if t.numel() and (t.min() < -1.0 or t.max() > 1.0):
        raise ValueError("frame values outside [-1, 1]")
    return frames
