"""Training data: videos with flows, window sampling, and batching."""
from dataclasses import dataclass
from math import comb

import numpy as np
import torch

from . import io as fio
from .losses import adjacent_pairs, dense_pairs
from .warp import DEFAULT_ALPHA, nonocclusion_mask, warp


class VideoData:
    """A colour video [L, 3, H, W] in [-1, 1] with flows for any frame pair.

    Adjacent flows are required. Non-adjacent flows come from ``pair_flows``
    when supplied, otherwise from composing adjacent flows:
    ``flow_{m->t} = flow_{t-1->t} + warp(flow_{m->t-1}, flow_{t-1->t})``.
    """

    def __init__(self, frames, adjacent_flows, pair_flows=None, name=""):
        self.frames = torch.as_tensor(np.asarray(frames), dtype=torch.float32)
        if self.frames.dim() != 4 or self.frames.shape[1] != 3:
            raise ValueError(f"expected RGB frames [L,3,H,W], got {tuple(self.frames.shape)}")
        if len(adjacent_flows) != len(self.frames) - 1:
            raise ValueError(f"{name}: {len(self.frames)} frames need {len(self.frames) - 1} "
                             f"adjacent flows, got {len(adjacent_flows)}")
        self.name = name
        self._flows = {(t, t + 1): torch.as_tensor(np.asarray(f), dtype=torch.float32)
                       for t, f in enumerate(adjacent_flows)}
        for key, f in (pair_flows or {}).items():
            self._flows[tuple(key)] = torch.as_tensor(np.asarray(f), dtype=torch.float32)

    def __len__(self):
        return len(self.frames)

    def flow(self, m, t):
        if not 0 <= m < t < len(self):
            raise KeyError(f"no flow for pair ({m}, {t}) in a {len(self)}-frame video")
        key = (m, t)
        if key not in self._flows:
            adj = self.flow(t - 1, t)
            self._flows[key] = adj + warp(self.flow(m, t - 1), adj)
        return self._flows[key]

    @classmethod
    def from_synth(cls, clip, name=""):
        return cls(clip.frames, clip.adjacent_flows(),
                   {k: v for k, v in clip.flows.items() if k[1] - k[0] >= 2}, name=name)

    @classmethod
    def from_dir(cls, video_dir, flow_dir=None):
        stems, frames = fio.read_video(video_dir)
        if frames.shape[1] != 3:
            raise fio.DataError(f"{video_dir}: training needs RGB ground-truth frames")
        flow_dir = flow_dir or fio.default_flow_dir(video_dir)
        adjacent = fio.read_adjacent_flows(flow_dir, stems)
        return cls(frames, adjacent, fio.read_pair_flows(flow_dir, stems), name=str(video_dir))


@dataclass
class ClipSample:
    """A window of T frames (local indices 0..T-1) with everything the temporal losses need."""
    frames: torch.Tensor  # [T, 3, H, W]
    flows: dict  # (m, t) -> [2, H, W], adjacent and dense pairs
    masks: dict  # (m, t) -> [1, H, W]
    start: int

    @property
    def length(self):
        return len(self.frames)

    def adjacent_flows(self):
        return [self.flows[p] for p in adjacent_pairs(self.length)]

    def dense_flows(self):
        return {p: self.flows[p] for p in dense_pairs(self.length)}


def soft_masks(frames, flows, pairs, alpha=DEFAULT_ALPHA):
    """Non-occlusion masks from ground-truth frames; constants (no autograd history)."""
    with torch.no_grad():
        return {(m, t): nonocclusion_mask(frames[t], warp(frames[m], flows[(m, t)]), alpha)
                for m, t in pairs}


def sample_window(video, T, rng, alpha=DEFAULT_ALPHA):
    L = len(video)
    if L < T:
        raise ValueError(f"video of {L} frames is shorter than the window T={T}")
    start = int(rng.integers(0, L - T + 1))
    frames = video.frames[start:start + T]
    pairs = adjacent_pairs(T) + dense_pairs(T)
    flows = {(m, t): video.flow(start + m, start + t) for m, t in pairs}
    return ClipSample(frames, flows, soft_masks(frames, flows, pairs, alpha), start)


def n_dense_pairs(T):
    return comb(T - 1, 2)


@dataclass
class ClipBatch:
    frames: torch.Tensor  # [T, B, 3, H, W]
    flows: dict  # (m, t) -> [B, 2, H, W]
    masks: dict  # (m, t) -> [B, 1, H, W]

    @property
    def length(self):
        return self.frames.shape[0]

    def adjacent_flows(self):
        return [self.flows[p] for p in adjacent_pairs(self.length)]

    def to(self, dtype):
        return ClipBatch(self.frames.to(dtype), {k: v.to(dtype) for k, v in self.flows.items()},
                         {k: v.to(dtype) for k, v in self.masks.items()})


def collate(samples):
    keys = samples[0].flows.keys()
    return ClipBatch(torch.stack([s.frames for s in samples], dim=1),
                     {k: torch.stack([s.flows[k] for s in samples]) for k in keys},
                     {k: torch.stack([s.masks[k] for s in samples]) for k in keys})
