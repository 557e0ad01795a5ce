"""Unconditional patch critic with spectrally normalized convolutions."""
from dataclasses import asdict, dataclass

from torch import nn

from .layers import LEAKY_SLOPE, InstanceNorm, SNConv2d


@dataclass
class DiscriminatorConfig:
    base_channels: int = 32
    num_downsamples: int = 3
    power_iterations: int = 1
    max_channels: int = 256

    def __post_init__(self):
        if self.num_downsamples < 1:
            raise ValueError("num_downsamples must be >= 1")
        if self.power_iterations < 1:
            raise ValueError("power_iterations must be >= 1")

    def to_dict(self):
        return asdict(self)


class Discriminator(nn.Module):
    """Maps an RGB frame [B,3,H,W] to a raw score map [B,1,H/2^n,W/2^n]."""

    def __init__(self, cfg=None):
        super().__init__()
        self.cfg = cfg = cfg or DiscriminatorConfig()
        pi = cfg.power_iterations
        ch = cfg.base_channels
        layers = [SNConv2d(3, ch, 4, 2, 1, pi), nn.LeakyReLU(LEAKY_SLOPE)]
        for _ in range(cfg.num_downsamples - 1):
            nxt = min(ch * 2, cfg.max_channels)
            layers += [SNConv2d(ch, nxt, 4, 2, 1, pi), InstanceNorm(nxt), nn.LeakyReLU(LEAKY_SLOPE)]
            ch = nxt
        layers.append(SNConv2d(ch, 1, 3, 1, 1, pi))
        self.body = nn.Sequential(*layers)

    def sn_convs(self):
        return [m for m in self.modules() if isinstance(m, SNConv2d)]

    def forward(self, x):
        if x.dim() != 4 or x.shape[1] != 3:
            raise ValueError(f"expected RGB [B,3,H,W], got {tuple(x.shape)}")
        step = 2 ** self.cfg.num_downsamples
        if x.shape[-2] % step or x.shape[-1] % step:
            raise ValueError(f"resolution {tuple(x.shape[-2:])} not divisible by {step}")
        return self.body(x)

    criticize = forward
