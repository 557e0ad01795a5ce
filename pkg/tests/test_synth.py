import numpy as np
import pytest
import torch

from vidcolor import io as fio
from vidcolor import kernels, synth
from vidcolor.data import VideoData
from vidcolor.metrics import warp_error


def test_uniform_translation_exact():
    spec = synth.SynthSpec(16, 16, 6, motion=[(2, -1)], texture_seed=3)
    clip = synth.make_clip(spec, seed=0)
    for t in range(1, 6):
        assert np.all(clip.flows[(t - 1, t)] == np.array([2, -1])[:, None, None])
    for (m, t), flow in clip.flows.items():
        assert np.all(flow == np.array([2 * (t - m), -(t - m)])[:, None, None])
        warped = kernels.warp(clip.frames[m], flow)
        ok = clip.masks[(m, t)] > 0
        assert np.max(np.abs(warped - clip.frames[t])[:, ok]) < 1e-5


def test_sprites_exact_and_occluding():
    spec = synth.SynthSpec(24, 24, 6, motion=[(1, 0)], sprites=[synth.Sprite(5, 5, 1, 2, 6)])
    clip = synth.make_clip(spec, seed=1)
    assert clip.labels.max() == 1
    for (m, t), flow in clip.flows.items():
        warped = kernels.warp(clip.frames[m], flow)
        ok = clip.masks[(m, t)] > 0
        assert np.max(np.abs(warped - clip.frames[t])[:, ok]) < 1e-5
        assert ok.mean() < 1.0  # sprite reveals background; frame edges leave the view


def test_static_clip():
    clip = synth.make_clip(synth.SynthSpec(8, 8, 4, motion=[(0, 0)]), seed=0)
    assert all(np.all(f == 0) for f in clip.flows.values())
    assert all(np.all(m == 1) for m in clip.masks.values())
    assert np.array_equal(clip.frames[0], clip.frames[3])


def test_self_warp_error_vanishes():
    clip = synth.make_dataset(1, seed=5, height=16, width=16, length=6)[0]
    assert warp_error(clip.frames, clip.adjacent_flows(), clip.adjacent_masks()) < 1e-6


def test_values_in_range_and_deterministic():
    a = synth.make_dataset(2, seed=9, height=16, width=16, length=4)
    b = synth.make_dataset(2, seed=9, height=16, width=16, length=4)
    for x, y in zip(a, b):
        assert np.array_equal(x.frames, y.frames)
        assert np.abs(x.frames).max() <= 1


def test_piecewise_composition_law():
    spec = synth.SynthSpec(16, 16, 5, motion=[(1, 0), (2, 1), (-1, 2), (0, -3)])
    clip = synth.make_clip(spec, seed=0)
    video = VideoData(clip.frames, clip.adjacent_flows())  # dense flows by composition
    for (m, t), exact in clip.flows.items():
        composed = video.flow(m, t).numpy()
        ok = clip.masks[(m, t)] > 0
        assert np.max(np.abs(composed - exact)[:, ok]) < 1e-5


def test_invalid_specs():
    with pytest.raises(ValueError):
        synth.SynthSpec(16, 16, 4, motion=[(5, 0)])  # more than a quarter frame
    with pytest.raises(ValueError):
        synth.SynthSpec(16, 16, 4, motion=[(0.5, 0)])
    with pytest.raises(ValueError):
        synth.SynthSpec(16, 16, 4, motion=[(1, 0), (1, 0)])
    with pytest.raises(TypeError):
        synth.make_clip({"height": 4})


def test_export_roundtrip(tmp_path):
    clip = synth.make_dataset(1, seed=2, height=16, width=16, length=5)[0]
    synth.export_clip(clip, tmp_path / "v")
    assert len(list((tmp_path / "v").rglob("*.png"))) + len(list((tmp_path / "v").rglob("*.flo"))) == 5 + 4
    stems, frames = fio.read_video(tmp_path / "v")
    assert np.max(np.abs(frames - clip.frames)) <= 1 / 255 + 1e-12
    flows = fio.read_adjacent_flows(tmp_path / "v" / "flows", stems)
    assert all(np.array_equal(a, b.astype(np.float32)) for a, b in zip(flows, clip.adjacent_flows()))
    # exported datasets are deterministic
    synth.export_clip(clip, tmp_path / "w")
    for p in sorted((tmp_path / "v").rglob("*.*")):
        assert p.read_bytes() == (tmp_path / "w" / p.relative_to(tmp_path / "v")).read_bytes()


def test_export_unwritable(tmp_path):
    (tmp_path / "file").write_text("x")
    with pytest.raises(OSError):
        synth.export_clip(synth.make_dataset(1, height=8, width=8, length=2)[0], tmp_path / "file" / "v")
