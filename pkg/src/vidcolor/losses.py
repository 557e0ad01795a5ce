"""Training objectives.

Frames are batched tensors [B, C, H, W]; clips are [T, B, C, H, W] or lists
of frames. Pair indices are 0-based: ``(m, t)`` compares output ``t`` with
output ``m`` warped onto ``t``'s grid. Every mask-weighted term is a mean
over elements, summed (not averaged) over frame pairs unless
``normalize_pairs`` is set.
"""
import math
import warnings
from dataclasses import asdict, dataclass, fields

import torch
from torch import nn

from .warp import warp

TERM_ORDER = ("l1", "perceptual", "adversarial", "short_term", "dense_long_term", "long_term")


@dataclass
class LossWeights:
    l1: float = 10.0
    perceptual: float = 5.0
    adversarial: float = 1.0
    short_term: float = 3.0
    dense_long_term: float = 5.0
    # first-anchor long-term loss, only used by ablations
    long_term: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            value = float(getattr(self, f.name))
            if value < 0 or not math.isfinite(value):
                raise ValueError(f"loss weight {f.name} must be a finite non-negative number, got {value}")
            setattr(self, f.name, value)

    def to_dict(self):
        return asdict(self)

    def active_terms(self):
        return [name for name in TERM_ORDER if getattr(self, name) > 0]


@dataclass
class LossBreakdown:
    total: torch.Tensor
    terms: dict

    def as_floats(self):
        out = {name: float(value.detach()) for name, value in self.terms.items()}
        out["total"] = float(self.total.detach())
        return out


class PerceptualNet(nn.Module):
    """Frozen feature network; ``forward`` returns the activations of the chosen layer.

    The desk-scale default is a small conv stack with a fixed random seed.
    Any pre-trained ``nn.Sequential`` can be wrapped instead.
    """

    def __init__(self, features, layer=None):
        super().__init__()
        layer = len(features) - 1 if layer is None else layer
        self.features = features[: layer + 1]
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    @classmethod
    def random(cls, seed=0, channels=(16, 32)):
        gen = torch.Generator().manual_seed(seed)
        layers = []
        in_ch = 3
        for i, ch in enumerate(channels):
            conv = nn.Conv2d(in_ch, ch, 3, 1, 1)
            with torch.no_grad():
                bound = math.sqrt(6.0 / (in_ch * 9 + ch * 9))
                conv.weight.uniform_(-bound, bound, generator=gen)
                conv.bias.zero_()
            layers += [conv, nn.ReLU()]
            if i < len(channels) - 1:
                layers.append(nn.AvgPool2d(2))
            in_ch = ch
        return cls(nn.Sequential(*layers))

    def train(self, mode=True):
        # stays in eval mode
        return super().train(False)

    def forward(self, x):
        return self.features(x)


def _check_same(a, b):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")


def l1_loss(s, z):
    _check_same(s, z)
    return (s - z).abs().mean()


def perceptual_loss(s, z, net):
    _check_same(s, z)
    return (net(s) - net(z)).abs().mean()


def _check_scores(scores):
    if not torch.isfinite(scores).all():
        raise ValueError("critic scores contain non-finite values")


def wgan_g_loss(fake_scores):
    _check_scores(fake_scores)
    return -fake_scores.mean()


def wgan_d_loss(fake_scores, real_scores):
    _check_scores(fake_scores)
    _check_scores(real_scores)
    return fake_scores.mean() - real_scores.mean()


def adjacent_pairs(T):
    return [(t - 1, t) for t in range(1, T)]


def dense_pairs(T):
    """All (m, t) with t - m >= 2, ordered by t then m."""
    return [(m, t) for t in range(2, T) for m in range(0, t - 1)]


def anchor_pairs(T):
    return [(0, t) for t in range(2, T)]


def masked_warp_l1(s_t, s_m, flow, mask):
    """mean over elements of mask * |s_t - warp(s_m, flow)|, mask broadcast over channels."""
    warped = warp(s_m, flow)
    _check_same(s_t, warped)
    diff = (s_t - warped).abs()
    return (mask * diff).expand_as(diff).mean()


def _pair_sum(outputs, pairs, flows, masks, normalize_pairs):
    total = outputs[0].new_zeros(())
    for m, t in pairs:
        total = total + masked_warp_l1(outputs[t], outputs[m], flows[(m, t)], masks[(m, t)])
    if normalize_pairs and pairs:
        total = total / len(pairs)
    return total


def _lookup(pairs, flows, masks, name):
    missing = [p for p in pairs if p not in flows or p not in masks]
    if missing:
        raise ValueError(f"{name}: missing flow or mask for pairs {missing}")


def short_term_loss(outputs, flows, masks, normalize_pairs=False):
    """Sum over t of masked L1 between output t and output t-1 warped onto it.

    ``flows`` and ``masks`` are sequences of length T-1 (entry t-1 maps t-1 -> t)
    or dicts keyed by (t-1, t).
    """
    T = len(outputs)
    if T < 2:
        warnings.warn("short_term_loss on a clip shorter than 2 frames is 0", stacklevel=2)
        return outputs[0].new_zeros(()) if T else torch.zeros(())
    pairs = adjacent_pairs(T)
    if not isinstance(flows, dict):
        if len(flows) != T - 1 or len(masks) != T - 1:
            raise ValueError(f"need {T - 1} flows and masks, got {len(flows)} and {len(masks)}")
        flows = dict(zip(pairs, flows))
        masks = dict(zip(pairs, masks))
    _lookup(pairs, flows, masks, "short_term_loss")
    return _pair_sum(outputs, pairs, flows, masks, normalize_pairs)


def dense_long_term_loss(outputs, flows, masks, normalize_pairs=False):
    """Sum over every remote pair (m, t), t - m >= 2: (T-1)(T-2)/2 terms."""
    T = len(outputs)
    if T < 3:
        warnings.warn("dense_long_term_loss on a clip shorter than 3 frames is 0", stacklevel=2)
        return outputs[0].new_zeros(()) if T else torch.zeros(())
    pairs = dense_pairs(T)
    _lookup(pairs, flows, masks, "dense_long_term_loss")
    return _pair_sum(outputs, pairs, flows, masks, normalize_pairs)


def long_term_first_anchor_loss(outputs, flows, masks, normalize_pairs=False):
    """Ablation baseline: only pairs (0, t), t >= 2."""
    T = len(outputs)
    if T < 3:
        warnings.warn("long_term_first_anchor_loss on a clip shorter than 3 frames is 0", stacklevel=2)
        return outputs[0].new_zeros(()) if T else torch.zeros(())
    pairs = anchor_pairs(T)
    _lookup(pairs, flows, masks, "long_term_first_anchor_loss")
    return _pair_sum(outputs, pairs, flows, masks, normalize_pairs)


def combine(terms, weights):
    """Weighted sum in TERM_ORDER; terms missing from ``terms`` must have zero weight."""
    if not isinstance(weights, LossWeights):
        weights = LossWeights(**weights)
    total = None
    used = {}
    for name in TERM_ORDER:
        w = getattr(weights, name)
        if name not in terms:
            if w != 0:
                raise ValueError(f"term {name} has weight {w} but no value")
            continue
        value = torch.as_tensor(terms[name])
        used[name] = value
        total = w * value if total is None else total + w * value
    if total is None:
        total = torch.zeros(())
    return LossBreakdown(total, used)


def stage1_objective(l1, perceptual, weights):
    return combine({"l1": l1, "perceptual": perceptual},
                   LossWeights(**{**_as_dict(weights), "adversarial": 0, "short_term": 0,
                                  "dense_long_term": 0, "long_term": 0})).total


def stage2_objective(terms, weights):
    return combine(terms, weights)


def _as_dict(weights):
    return weights.to_dict() if isinstance(weights, LossWeights) else dict(weights)
