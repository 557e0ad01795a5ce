"""Frame directories (8-bit PNG, filename order = frame order) and flow directories.

A video directory holds PNG frames either directly or under ``frames/``;
its adjacent flows live under ``flows/`` (or a separate directory) as
``<stem_a>_<stem_b>.flo``. A dataset root is a directory of video directories.
"""
from pathlib import Path

import numpy as np
from PIL import Image

from .flo import read_flo, write_flo
from .frames import denormalize, normalize


class DataError(ValueError):
    """Malformed or inconsistent input data on disk."""


def frame_dir(video_dir):
    video_dir = Path(video_dir)
    sub = video_dir / "frames"
    return sub if sub.is_dir() else video_dir


def list_frames(video_dir):
    paths = sorted(frame_dir(video_dir).glob("*.png"))
    if not paths:
        raise DataError(f"no PNG frames in {video_dir}")
    return paths


def is_video_dir(path):
    path = Path(path)
    return path.is_dir() and (any(path.glob("*.png")) or (path / "frames").is_dir())


def find_videos(root):
    """Video directories under ``root``; ``root`` itself if it is one."""
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"not a directory: {root}")
    if is_video_dir(root):
        return [root]
    videos = sorted(p for p in root.iterdir() if is_video_dir(p))
    if not videos:
        raise DataError(f"no video directories under {root}")
    return videos


def read_frame(path):
    """PNG -> float64 [C, H, W] in [-1, 1]; L images give C=1, everything else RGB."""
    with Image.open(path) as img:
        if img.mode in ("L", "I;16", "I"):
            if img.mode != "L":
                raise DataError(f"{path}: only 8-bit images are supported")
            arr = np.asarray(img)[None]
        else:
            arr = np.asarray(img.convert("RGB")).transpose(2, 0, 1)
    return normalize(arr)


def write_frame(path, frame):
    arr = denormalize(frame)
    if arr.shape[0] == 1:
        Image.fromarray(arr[0], mode="L").save(path)
    elif arr.shape[0] == 3:
        Image.fromarray(np.ascontiguousarray(arr.transpose(1, 2, 0)), mode="RGB").save(path)
    else:
        raise ValueError(f"cannot write a {arr.shape[0]}-channel frame")


def read_video(video_dir):
    """Return (stems, frames[T, C, H, W])."""
    paths = list_frames(video_dir)
    frames = [read_frame(p) for p in paths]
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise DataError(f"{video_dir}: frames have differing shapes {sorted(shapes)}")
    return [p.stem for p in paths], np.stack(frames)


def write_video(out_dir, frames, stems=None):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stems = stems or [f"{i:05d}" for i in range(len(frames))]
    for stem, frame in zip(stems, frames):
        write_frame(out_dir / f"{stem}.png", frame)
    return stems


def flow_name(stem_a, stem_b):
    return f"{stem_a}_{stem_b}.flo"


def default_flow_dir(video_dir):
    return Path(video_dir) / "flows"


def read_adjacent_flows(flow_dir, stems):
    flow_dir = Path(flow_dir)
    missing = [flow_name(a, b) for a, b in zip(stems, stems[1:])
               if not (flow_dir / flow_name(a, b)).is_file()]
    if missing:
        raise DataError(f"missing flow files in {flow_dir}: {missing}")
    return [read_flo(flow_dir / flow_name(a, b)) for a, b in zip(stems, stems[1:])]


def read_pair_flows(flow_dir, stems):
    """Any non-adjacent ``<a>_<b>.flo`` files present, keyed by frame index pair."""
    index = {s: i for i, s in enumerate(stems)}
    pairs = {}
    for path in sorted(Path(flow_dir).glob("*_*.flo")):
        a, _, b = path.stem.rpartition("_")
        if a in index and b in index and index[b] - index[a] >= 2:
            pairs[(index[a], index[b])] = read_flo(path)
    return pairs


def write_adjacent_flows(flow_dir, flows, stems):
    flow_dir = Path(flow_dir)
    flow_dir.mkdir(parents=True, exist_ok=True)
    for flow, a, b in zip(flows, stems, stems[1:]):
        write_flo(flow_dir / flow_name(a, b), flow)
