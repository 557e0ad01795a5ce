import struct

import numpy as np
import pytest

from vidcolor import io as fio
from vidcolor.flo import FLO_MAGIC, read_flo, write_flo


def test_flo_roundtrip_bit_exact(tmp_path, rng):
    flow = rng.standard_normal((2, 5, 7)).astype(np.float32)
    write_flo(tmp_path / "a.flo", flow)
    back = read_flo(tmp_path / "a.flo")
    assert back.dtype == np.float32 and np.array_equal(back, flow)


def test_flo_layout(tmp_path):
    flow = np.zeros((2, 2, 3), dtype=np.float32)
    flow[0, 0, 1] = 1.5  # u at row 0, col 1
    flow[1, 1, 2] = -2.0  # v at row 1, col 2
    write_flo(tmp_path / "a.flo", flow)
    raw = (tmp_path / "a.flo").read_bytes()
    assert len(raw) == 12 + 2 * 2 * 3 * 4
    magic, w, h = struct.unpack("<fii", raw[:12])
    assert magic == FLO_MAGIC and (w, h) == (3, 2)
    vals = struct.unpack("<12f", raw[12:])
    # row-major, interleaved (u, v)
    assert vals[2] == 1.5 and vals[(1 * 3 + 2) * 2 + 1] == -2.0


def test_flo_rejects_garbage(tmp_path):
    (tmp_path / "bad.flo").write_bytes(b"\x00" * 20)
    with pytest.raises(ValueError):
        read_flo(tmp_path / "bad.flo")
    write_flo(tmp_path / "t.flo", np.zeros((2, 3, 3), np.float32))
    (tmp_path / "t.flo").write_bytes((tmp_path / "t.flo").read_bytes()[:-4])
    with pytest.raises(ValueError):
        read_flo(tmp_path / "t.flo")


def test_png_roundtrip_and_order(tmp_path, rng):
    frames = rng.uniform(-1, 1, (3, 3, 4, 5))
    fio.write_video(tmp_path / "v", frames, ["b", "a", "c"])
    stems, back = fio.read_video(tmp_path / "v")
    assert stems == ["a", "b", "c"]  # lexicographic order
    assert np.max(np.abs(back[1] - frames[0])) <= 1 / 255 + 1e-12


def test_gray_png(tmp_path):
    fio.write_frame(tmp_path / "g.png", np.zeros((1, 4, 4)))
    assert fio.read_frame(tmp_path / "g.png").shape == (1, 4, 4)


def test_missing_flows_listed(tmp_path):
    with pytest.raises(fio.DataError, match="a_b.flo"):
        fio.read_adjacent_flows(tmp_path, ["a", "b"])


def test_find_videos(tmp_path):
    with pytest.raises(fio.DataError):
        fio.find_videos(tmp_path)
    fio.write_video(tmp_path / "v1" / "frames", np.zeros((1, 3, 2, 2)))
    fio.write_video(tmp_path / "v0", np.zeros((1, 3, 2, 2)))
    assert [p.name for p in fio.find_videos(tmp_path)] == ["v0", "v1"]
    assert fio.find_videos(tmp_path / "v1") == [tmp_path / "v1"]
