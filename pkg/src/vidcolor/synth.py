"""Synthetic RGB clips with analytically exact flow and occlusion.

A textured background translates by integer steps (uniform or piecewise);
opaque textured square sprites move on top with their own integer
velocities. Flows are in backward-sampling convention: ``frame_t(p) ==
frame_m(p + flow_{m->t}(p))`` wherever ``mask_{m->t}(p)`` is 1.
"""
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from . import io as fio


@dataclass
class Sprite:
    y: int
    x: int
    vy: int
    vx: int
    size: int


@dataclass
class SynthSpec:
    height: int = 32
    width: int = 32
    length: int = 8
    # background displacement per transition; one (dx, dy) for uniform motion,
    # or length-1 entries for piecewise translation
    motion: list = field(default_factory=lambda: [(1, 0)])
    sprites: list = field(default_factory=list)
    texture_seed: int = 0
    palette_seed: int = 0
    smoothness: float = 1.5

    def __post_init__(self):
        if self.height < 2 or self.width < 2 or self.length < 1:
            raise ValueError("need height, width >= 2 and length >= 1")
        motion = [tuple(m) for m in self.motion]
        if len(motion) == 1:
            motion = motion * max(self.length - 1, 0)
        if len(motion) != self.length - 1:
            raise ValueError(f"motion needs 1 or {self.length - 1} entries, got {len(self.motion)}")
        limit_x, limit_y = self.width / 4, self.height / 4
        for dx, dy in motion:
            if dx != int(dx) or dy != int(dy):
                raise ValueError(f"displacements must be integers, got {(dx, dy)}")
            if abs(dx) > limit_x or abs(dy) > limit_y:
                raise ValueError(f"displacement {(dx, dy)} exceeds a quarter of the frame")
        self.motion = [(int(dx), int(dy)) for dx, dy in motion]
        self.sprites = [s if isinstance(s, Sprite) else Sprite(*s) for s in self.sprites]
        for s in self.sprites:
            if s.size < 1 or any(v != int(v) for v in (s.y, s.x, s.vy, s.vx)):
                raise ValueError(f"invalid sprite {s}")


@dataclass
class SynthClip:
    frames: np.ndarray  # [T, 3, H, W] in [-1, 1]
    flows: dict  # (m, t) -> [2, H, W] for every m < t
    masks: dict  # (m, t) -> [H, W] float {0, 1}
    labels: np.ndarray  # [T, H, W]; 0 background, k sprite k

    @property
    def length(self):
        return len(self.frames)

    def adjacent_flows(self):
        return [self.flows[(t - 1, t)] for t in range(1, self.length)]

    def adjacent_masks(self):
        return [self.masks[(t - 1, t)] for t in range(1, self.length)]


def _texture(rng, h, w, sigma):
    """Band-limited RGB texture in [-1, 1] whose colour is tied to its luminance."""
    base = gaussian_filter(rng.standard_normal((h, w)), sigma, mode="wrap")
    hue = gaussian_filter(rng.standard_normal((h, w)), sigma * 2, mode="wrap")
    base = np.tanh(base / (base.std() + 1e-12))
    hue = np.tanh(hue / (hue.std() + 1e-12))
    return base, hue


def _colorize(base, hue, palette):
    c0, c1, c2 = palette
    lum = (base[None] + 1) / 2
    rgb = (1 - lum) * c0[:, None, None] + lum * c1[:, None, None] + 0.25 * hue[None] * c2[:, None, None]
    return np.clip(rgb, -1.0, 1.0)


def make_clip(spec, seed=0):
    """Render a clip and its exact flows/masks for every frame pair."""
    if not isinstance(spec, SynthSpec):
        raise TypeError("spec must be a SynthSpec")
    H, W, T = spec.height, spec.width, spec.length
    tex_rng = np.random.default_rng([spec.texture_seed, seed])
    pal_rng = np.random.default_rng([spec.palette_seed, seed, 1])

    offsets = np.zeros((T, 2), dtype=np.int64)  # background (x, y) offset per frame
    for t, (dx, dy) in enumerate(spec.motion, start=1):
        offsets[t] = offsets[t - 1] + (dx, dy)
    lo = offsets.min(axis=0)
    hi = offsets.max(axis=0)
    canvas_h, canvas_w = H + hi[1] - lo[1], W + hi[0] - lo[0]
    base, hue = _texture(tex_rng, canvas_h, canvas_w, spec.smoothness)
    canvas = _colorize(base, hue, pal_rng.uniform(-0.9, 0.9, size=(3, 3)))

    sprite_tex = []
    for s in spec.sprites:
        b, hh = _texture(tex_rng, s.size, s.size, max(spec.smoothness / 2, 0.5))
        sprite_tex.append(_colorize(0.5 * b, hh, pal_rng.uniform(-0.9, 0.9, size=(3, 3))))

    frames = np.empty((T, 3, H, W))
    labels = np.zeros((T, H, W), dtype=np.int64)
    for t in range(T):
        ox, oy = offsets[t] - lo
        frames[t] = canvas[:, oy:oy + H, ox:ox + W]
        for k, (s, tex) in enumerate(zip(spec.sprites, sprite_tex), start=1):
            y0, x0 = s.y + t * s.vy, s.x + t * s.vx
            ys, xs = max(y0, 0), max(x0, 0)
            ye, xe = min(y0 + s.size, H), min(x0 + s.size, W)
            if ys >= ye or xs >= xe:
                continue
            frames[t, :, ys:ye, xs:xe] = tex[:, ys - y0:ye - y0, xs - x0:xe - x0]
            labels[t, ys:ye, xs:xe] = k

    vel = np.array([[0, 0]] + [[s.vx, s.vy] for s in spec.sprites], dtype=np.int64)
    yy, xx = np.mgrid[0:H, 0:W]
    flows, masks = {}, {}
    for t in range(T):
        lab = labels[t]
        for m in range(t):
            bg = offsets[t] - offsets[m]
            fx = np.where(lab == 0, bg[0], -(t - m) * vel[lab, 0])
            fy = np.where(lab == 0, bg[1], -(t - m) * vel[lab, 1])
            flows[(m, t)] = np.stack([fx, fy]).astype(np.float64)
            sx, sy = xx + fx, yy + fy
            inside = (sx >= 0) & (sx < W) & (sy >= 0) & (sy < H)
            src_lab = labels[m][np.clip(sy, 0, H - 1), np.clip(sx, 0, W - 1)]
            masks[(m, t)] = (inside & (src_lab == lab)).astype(np.float64)
    return SynthClip(frames, flows, masks, labels)


def random_spec(rng, height=32, width=32, length=8, n_sprites=1, max_step=2):
    """Draw a spec with uniform background motion and moving sprites."""
    step = lambda: int(rng.integers(-max_step, max_step + 1))
    sprites = []
    for _ in range(n_sprites):
        size = int(rng.integers(max(2, height // 6), max(3, height // 3)))
        sprites.append(Sprite(int(rng.integers(0, height - size)), int(rng.integers(0, width - size)),
                              step(), step(), size))
    return SynthSpec(height, width, length, motion=[(step(), step())], sprites=sprites,
                     texture_seed=int(rng.integers(2 ** 31)), palette_seed=int(rng.integers(2 ** 31)))


def make_dataset(n_videos, seed=0, **spec_kwargs):
    rng = np.random.default_rng(seed)
    return [make_clip(random_spec(rng, **spec_kwargs), seed=i) for i in range(n_videos)]


def export_clip(clip, out_dir):
    """Write ``frames/00000.png ...`` and ``flows/<a>_<b>.flo`` for adjacent pairs."""
    out_dir = Path(out_dir)
    try:
        stems = fio.write_video(out_dir / "frames", clip.frames)
        fio.write_adjacent_flows(out_dir / "flows", clip.adjacent_flows(), stems)
    except OSError as exc:
        raise OSError(f"cannot write clip to {out_dir}: {exc}") from exc
    return stems
