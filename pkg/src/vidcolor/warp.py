"""Differentiable backward warping and occlusion masks (torch)."""
import torch

DEFAULT_ALPHA = 50.0


def warp(frame, flow):
    """Bilinearly sample ``frame`` at ``p + flow(p)`` for every target pixel ``p``.

    ``frame`` is [C, H, W] or [B, C, H, W]; ``flow`` is [2, H, W] or
    [B, 2, H, W]. Sample coordinates are clamped to the grid (edge pixels
    repeat). Integer flows reduce to exact copies.
    """
    unbatched = frame.dim() == 3
    if unbatched:
        frame = frame.unsqueeze(0)
    if flow.dim() == 3:
        flow = flow.unsqueeze(0)
    if frame.dim() != 4 or flow.dim() != 4 or flow.shape[1] != 2:
        raise ValueError(f"bad shapes: frame {tuple(frame.shape)}, flow {tuple(flow.shape)}")
    B, C, H, W = frame.shape
    if flow.shape[-2:] != (H, W):
        raise ValueError(f"frame {tuple(frame.shape)} and flow {tuple(flow.shape)} differ in H, W")
    if flow.shape[0] not in (1, B):
        raise ValueError(f"flow batch {flow.shape[0]} incompatible with frame batch {B}")
    if not torch.isfinite(flow).all():
        raise ValueError("flow contains non-finite values")
    flow = flow.to(frame.dtype).expand(B, 2, H, W)

    xs = torch.arange(W, dtype=frame.dtype, device=frame.device).view(1, 1, W)
    ys = torch.arange(H, dtype=frame.dtype, device=frame.device).view(1, H, 1)
    sx = (xs + flow[:, 0]).clamp(0, W - 1)
    sy = (ys + flow[:, 1]).clamp(0, H - 1)
    x0 = sx.detach().floor().long()
    y0 = sy.detach().floor().long()
    x1 = (x0 + 1).clamp(max=W - 1)
    y1 = (y0 + 1).clamp(max=H - 1)
    wx = (sx - x0.to(frame.dtype)).unsqueeze(1)
    wy = (sy - y0.to(frame.dtype)).unsqueeze(1)

    flat = frame.reshape(B, C, H * W)

    def gather(yi, xi):
        idx = (yi * W + xi).view(B, 1, H * W).expand(B, C, H * W)
        return flat.gather(2, idx).view(B, C, H, W)

    top = (1 - wx) * gather(y0, x0) + wx * gather(y0, x1)
    bot = (1 - wx) * gather(y1, x0) + wx * gather(y1, x1)
    out = (1 - wy) * top + wy * bot
    return out[0] if unbatched else out


def photometric_error(current, warped_prev):
    """Per-pixel squared error summed over channels, keeping a singleton channel dim."""
    if current.shape != warped_prev.shape:
        raise ValueError(f"shape mismatch: {tuple(current.shape)} vs {tuple(warped_prev.shape)}")
    return ((current - warped_prev) ** 2).sum(dim=-3, keepdim=True)


def nonocclusion_mask(current, warped_prev, alpha=DEFAULT_ALPHA):
    """Soft mask exp(-alpha * ||current - warped_prev||^2); 1 where the warp is exact."""
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    return torch.exp(-alpha * photometric_error(current, warped_prev))


def binary_mask(current, warped_prev, threshold):
    """1 where the channel-mean squared error is below ``threshold``, else 0."""
    if threshold <= 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    err = photometric_error(current, warped_prev) / current.shape[-3]
    return (err < threshold).to(current.dtype)
