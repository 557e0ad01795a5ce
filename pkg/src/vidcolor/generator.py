"""Recurrent hybrid colorization generator.

A U-Net "mainstream" colorizes the grayscale frame. Two residual feature
extractors of identical architecture feed its bottleneck: the global one
sees the current frame, the placeholder one sees either the current frame
(image mode / first frame) or the warped grayscale of the previous output
(video mode), which makes the generator recurrent.
"""
from dataclasses import asdict, dataclass, field

import torch
from torch import nn

from .frames import replicate_channels, to_grayscale
from .layers import NonLocalBlock, conv_block
from .warp import warp


@dataclass
class GeneratorConfig:
    base_channels: int = 16
    depth: int = 3
    max_channels: int = 256
    extractor_base: int = 16
    extractor_channels: int = 32
    extractor_blocks: int = 1
    # decoder blocks (0 = the one right after the bottleneck) followed by a non-local block
    nonlocal_positions: tuple = (0,)
    input_resolution: tuple = (64, 64)
    use_global_extractor: bool = True
    use_placeholder_extractor: bool = True

    def __post_init__(self):
        self.nonlocal_positions = tuple(int(p) for p in self.nonlocal_positions)
        self.input_resolution = tuple(int(r) for r in self.input_resolution)
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        bad = [p for p in self.nonlocal_positions if not 0 <= p < self.depth]
        if bad:
            raise ValueError(f"nonlocal positions {bad} outside decoder blocks 0..{self.depth - 1}")
        self.check_resolution(*self.input_resolution)

    def check_resolution(self, h, w):
        step = 2 ** self.depth
        if h % step or w % step:
            raise ValueError(f"resolution {h}x{w} not divisible by 2^depth = {step}")

    def level_channels(self, level):
        return min(self.base_channels * 2 ** level, self.max_channels)

    @classmethod
    def full_scale(cls):
        """Full-size shape: 5 stride-2 stages, 2048-d extractor features reduced to 512."""
        return cls(base_channels=64, depth=5, max_channels=512, extractor_base=64,
                   extractor_channels=512, extractor_blocks=2, nonlocal_positions=(0, 1),
                   input_resolution=(256, 256))

    def to_dict(self):
        return asdict(self)


class ResidualBlock(nn.Module):
    def __init__(self, channels):
        super().__init__()
        self.body = nn.Sequential(
            conv_block(channels, channels),
            conv_block(channels, channels, act=False),
        )
        self.act = nn.LeakyReLU(0.2)

    def forward(self, x):
        return self.act(x + self.body(x))


class FeatureExtractor(nn.Module):
    """Fully convolutional residual encoder: stride-2 convs instead of pooling,
    then a 1x1 reduction to ``extractor_channels``. Output is at bottleneck size."""

    def __init__(self, cfg):
        super().__init__()
        ch = cfg.extractor_base
        layers = [conv_block(3, ch, norm=False)]
        for _ in range(cfg.depth):
            layers.append(conv_block(ch, ch * 2, kernel=3, stride=2))
            ch *= 2
            layers.extend(ResidualBlock(ch) for _ in range(cfg.extractor_blocks))
        self.body = nn.Sequential(*layers)
        self.hidden_channels = ch
        self.reduce = nn.Conv2d(ch, cfg.extractor_channels, 1)

    def forward(self, x):
        return self.reduce(self.body(x))


class Generator(nn.Module):
    def __init__(self, cfg=None):
        super().__init__()
        self.cfg = cfg = cfg or GeneratorConfig()
        c = cfg.level_channels
        self.inc = conv_block(1, c(0), norm=False)
        self.down = nn.ModuleList(
            nn.Sequential(conv_block(c(i - 1), c(i), stride=2), conv_block(c(i), c(i)))
            for i in range(1, cfg.depth + 1)
        )
        self.global_extractor = FeatureExtractor(cfg) if cfg.use_global_extractor else None
        self.placeholder_extractor = FeatureExtractor(cfg) if cfg.use_placeholder_extractor else None
        n_ext = int(cfg.use_global_extractor) + int(cfg.use_placeholder_extractor)
        fused_in = c(cfg.depth) + n_ext * cfg.extractor_channels
        self.fuse = conv_block(fused_in, c(cfg.depth), kernel=1) if n_ext else None

        self.up = nn.ModuleList()
        self.merge = nn.ModuleList()
        self.nonlocal_blocks = nn.ModuleDict()
        for j, level in enumerate(range(cfg.depth - 1, -1, -1)):
            self.up.append(nn.Sequential(nn.Upsample(scale_factor=2, mode="bilinear", align_corners=False),
                                         conv_block(c(level + 1), c(level))))
            self.merge.append(conv_block(2 * c(level), c(level)))
            if j in cfg.nonlocal_positions:
                self.nonlocal_blocks[str(j)] = NonLocalBlock(c(level))
        self.out = nn.Sequential(nn.Conv2d(c(0), 3, 3, 1, 1), nn.Tanh())
        self._init_weights()

    def _init_weights(self):
        extractors = {id(m) for e in (self.global_extractor, self.placeholder_extractor)
                      if e is not None for m in e.modules()}
        for m in self.modules():
            if isinstance(m, nn.Conv2d) and id(m) not in extractors:
                nn.init.xavier_uniform_(m.weight)
                nn.init.zeros_(m.bias)

    def encode(self, x):
        feats = [self.inc(x)]
        for down in self.down:
            feats.append(down(feats[-1]))
        return feats

    def forward(self, x, placeholder=None):
        """Colorize grayscale ``x`` [B,1,H,W]; ``placeholder`` feeds the placeholder extractor."""
        if placeholder is None:
            placeholder = x
        squeeze = x.dim() == 3
        if squeeze:
            x, placeholder = x.unsqueeze(0), placeholder.unsqueeze(0)
        if x.dim() != 4 or x.shape[1] != 1:
            raise ValueError(f"expected grayscale [B,1,H,W], got {tuple(x.shape)}")
        if placeholder.shape != x.shape:
            raise ValueError(f"placeholder {tuple(placeholder.shape)} does not match input {tuple(x.shape)}")
        self.cfg.check_resolution(*x.shape[-2:])

        feats = self.encode(x)
        bottleneck = feats[-1]
        extra = []
        if self.global_extractor is not None:
            extra.append(self.global_extractor(replicate_channels(x)))
        if self.placeholder_extractor is not None:
            extra.append(self.placeholder_extractor(replicate_channels(placeholder)))
        if extra:
            bottleneck = self.fuse(torch.cat([bottleneck] + extra, dim=1))

        h = bottleneck
        for j, (up, merge) in enumerate(zip(self.up, self.merge)):
            skip = feats[-2 - j]
            h = merge(torch.cat([up(h), skip], dim=1))
            if str(j) in self.nonlocal_blocks:
                h = self.nonlocal_blocks[str(j)](h)
        out = self.out(h)
        return out[0] if squeeze else out

    def forward_first(self, x):
        """Image mode: every branch sees ``x``."""
        return self.forward(x, x)

    def forward_step(self, x, placeholder):
        return self.forward(x, placeholder)

    def level_shapes(self, h, w):
        """Spatial sizes of encoder levels and of decoder outputs (bottleneck first)."""
        with torch.no_grad():
            x = torch.zeros(1, 1, h, w, dtype=next(self.parameters()).dtype)
            feats = self.encode(x)
            enc = [tuple(f.shape[-2:]) for f in feats]
            dec = []
            hcur = feats[-1]
            for j, (up, merge) in enumerate(zip(self.up, self.merge)):
                hcur = merge(torch.cat([up(hcur), feats[-2 - j]], dim=1))
                dec.append(tuple(hcur.shape[-2:]))
        return enc, dec


def colorize_clip(gen, gray_frames, flows):
    """Run the recurrence over a clip.

    ``gray_frames`` is [T, B, 1, H, W] (or a list of [B, 1, H, W]) and
    ``flows`` holds T-1 adjacent flows ([B, 2, H, W] or [2, H, W]), flow
    ``t-1`` mapping frame t-1 onto frame t. Returns outputs stacked [T, B, 3, H, W].
    """
    T = len(gray_frames)
    if T < 1:
        raise ValueError("empty clip")
    if len(flows) != T - 1:
        raise ValueError(f"a clip of {T} frames needs {T - 1} flows, got {len(flows)}")
    outputs = [gen.forward_first(gray_frames[0])]
    for t in range(1, T):
        if gen.placeholder_extractor is not None:
            placeholder = warp(to_grayscale(outputs[-1]), flows[t - 1])
        else:
            placeholder = gray_frames[t]
        outputs.append(gen.forward_step(gray_frames[t], placeholder))
    return torch.stack(outputs)
