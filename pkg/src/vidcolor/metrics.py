"""Evaluation metrics on [0, 1]-scaled numpy frames [C, H, W] and clips [T, C, H, W]."""
import csv
import io as _io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import correlate1d

from . import io as fio
from . import kernels
from .frames import to_unit

log = logging.getLogger(__name__)

PSNR_CAP = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
DEFAULT_MASK_THRESHOLD = 0.01


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b):
    a, b = _pair(a, b)
    # correctly rounded sum: order-independent, so a known MSE gives its exact dB value
    sq = (a - b) ** 2
    mse = math.fsum(sq.ravel()) / sq.size
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(1.0 / mse))


def _gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2
    g = np.exp(-(r ** 2) / (2 * sigma ** 2))
    return g / g.sum()


def _filter_valid(img, g):
    out = correlate1d(correlate1d(img, g, axis=0, mode="reflect"), g, axis=1, mode="reflect")
    pad = (len(g) - 1) // 2
    return out[pad:-pad, pad:-pad]


def _ssim_2d(a, b, c1, c2, g):
    mu_a, mu_b = _filter_valid(a, g), _filter_valid(b, g)
    saa = _filter_valid(a * a, g) - mu_a ** 2
    sbb = _filter_valid(b * b, g) - mu_b ** 2
    sab = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * sab + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (saa + sbb + c2)
    return float(np.mean(num / den))


def ssim(a, b, data_range=1.0):
    """Gaussian-window SSIM (11x11, sigma 1.5), averaged over channels.

    Accepts [H, W] or [C, H, W]; the mean is taken over the interior where
    the window fits entirely.
    """
    a, b = _pair(a, b)
    if a.ndim == 2:
        a, b = a[None], b[None]
    if min(a.shape[-2:]) < SSIM_WINDOW:
        raise ValueError(f"frame {a.shape[-2:]} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    g = _gaussian_window()
    return float(np.mean([_ssim_2d(x, y, c1, c2, g) for x, y in zip(a, b)]))


def binary_masks(frames, flows, threshold=DEFAULT_MASK_THRESHOLD):
    """Metric-side masks: 1 where the channel-mean squared error of the warped
    previous ground-truth frame is below ``threshold``."""
    masks = []
    for t in range(1, len(frames)):
        warped = kernels.warp(frames[t - 1], flows[t - 1])
        err = kernels.sq_error_map(frames[t], warped) / frames.shape[1]
        masks.append((err < threshold).astype(np.float64))
    return masks


def pair_warp_errors(video, pairs, flows, masks):
    """Masked mean squared disparity per pair; NaN where the mask is empty.

    ``flows``/``masks`` are dicts keyed by (m, t) or sequences aligned with ``pairs``.
    """
    video = np.asarray(video, dtype=np.float64)
    out = []
    for k, (m, t) in enumerate(pairs):
        flow = flows[(m, t)] if isinstance(flows, dict) else flows[k]
        mask = masks[(m, t)] if isinstance(masks, dict) else masks[k]
        mask = np.asarray(mask, dtype=np.float64).reshape(video.shape[-2:])
        warped = kernels.warp(video[m], flow)
        num, den = kernels.masked_sq_error(video[t], warped, mask)
        out.append(num / den if den > 0 else float("nan"))
    return np.array(out)


def warp_error(video, flows, masks, return_skipped=False):
    """Average over transitions of the masked mean squared disparity between
    frame t and frame t-1 warped onto it. Transitions whose mask is empty are
    skipped (and logged); the average runs over the evaluated ones.
    """
    T = len(video)
    if T < 2:
        raise ValueError("warp error needs at least 2 frames")
    if len(flows) != T - 1 or len(masks) != T - 1:
        raise ValueError(f"need {T - 1} flows and masks, got {len(flows)} and {len(masks)}")
    errs = pair_warp_errors(video, [(t - 1, t) for t in range(1, T)], list(flows), list(masks))
    skipped = [t for t, e in enumerate(errs, start=1) if np.isnan(e)]
    if skipped:
        log.warning("warp error: empty mask at transitions %s, skipped", skipped)
    value = float(np.nanmean(errs)) if len(skipped) < len(errs) else float("nan")
    return (value, skipped) if return_skipped else value


@dataclass
class VideoMetrics:
    name: str
    frame_names: list
    psnr: list
    ssim: list
    warp_error: float
    skipped_transitions: list = field(default_factory=list)


@dataclass
class MetricReport:
    videos: list

    @property
    def mean_psnr(self):
        return float(np.mean([p for v in self.videos for p in v.psnr]))

    @property
    def mean_ssim(self):
        return float(np.mean([s for v in self.videos for s in v.ssim]))

    @property
    def mean_warp_error(self):
        return float(np.mean([v.warp_error for v in self.videos]))

    def to_csv(self):
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["video", "frame", "psnr", "ssim", "warp_error"])
        for v in self.videos:
            for name, p, s in zip(v.frame_names, v.psnr, v.ssim):
                w.writerow([v.name, name, f"{p:.6f}", f"{s:.6f}", ""])
            w.writerow([v.name, "*", f"{np.mean(v.psnr):.6f}", f"{np.mean(v.ssim):.6f}", f"{v.warp_error:.8f}"])
        w.writerow(["*", "*", f"{self.mean_psnr:.6f}", f"{self.mean_ssim:.6f}", f"{self.mean_warp_error:.8f}"])
        return buf.getvalue()

    def to_table(self):
        lines = [f"{'video':<24}{'PSNR':>10}{'SSIM':>10}{'WarpErr':>14}"]
        for v in self.videos:
            lines.append(f"{v.name:<24}{np.mean(v.psnr):>10.4f}{np.mean(v.ssim):>10.4f}{v.warp_error:>14.6f}")
        lines.append(f"{'mean':<24}{self.mean_psnr:>10.4f}{self.mean_ssim:>10.4f}{self.mean_warp_error:>14.6f}")
        return "\n".join(lines)


def _resize_to(frame, shape):
    """Bicubic resize of a [C,H,W] frame in [0,1] to ``shape`` (H, W)."""
    if frame.shape[-2:] == tuple(shape):
        return frame
    chans = [np.asarray(Image.fromarray(c.astype(np.float32), mode="F").resize(shape[::-1], Image.BICUBIC))
             for c in frame]
    return np.clip(np.stack(chans).astype(np.float64), 0.0, 1.0)


def _frame_ssim(a, b):
    try:
        return ssim(a, b)
    except ValueError:
        return float("nan")


def evaluate_video(name, result_frames, gt_frames, flows, frame_names, threshold=DEFAULT_MASK_THRESHOLD):
    """Frames in [0,1]; the result is resized to the ground-truth resolution first."""
    result = np.stack([_resize_to(f, gt_frames.shape[-2:]) for f in result_frames])
    if result.shape[1] != gt_frames.shape[1]:
        raise ValueError(f"{name}: channel count {result.shape[1]} vs ground truth {gt_frames.shape[1]}")
    p = [psnr(r, g) for r, g in zip(result, gt_frames)]
    s = [_frame_ssim(r, g) for r, g in zip(result, gt_frames)]
    if len(gt_frames) >= 2:
        masks = binary_masks(gt_frames, flows, threshold)
        we, skipped = warp_error(result, flows, masks, return_skipped=True)
    else:
        we, skipped = float("nan"), []
    return VideoMetrics(name, list(frame_names), p, s, we, skipped)


def evaluate_dirs(result_dir, gt_dir, flow_dir=None, threshold=DEFAULT_MASK_THRESHOLD):
    """Compare a directory of results with ground truth, video by video.

    Both roots are either single video directories or directories of video
    directories with matching names and frame filenames. Flows default to
    ``<gt video>/flows``; a ``flow_dir`` applies to a single video, or holds
    one sub-directory per video.
    """
    gt_videos = fio.find_videos(gt_dir)
    res_videos = fio.find_videos(result_dir)
    single = len(gt_videos) == 1 and Path(gt_videos[0]) == Path(gt_dir)
    if single:
        pairs = [(Path(gt_dir).name, res_videos[0], gt_videos[0])]
        if len(res_videos) != 1:
            raise fio.DataError(f"{result_dir} holds {len(res_videos)} videos, ground truth holds one")
    else:
        gt_names = {p.name for p in gt_videos}
        res_names = {p.name for p in res_videos}
        if gt_names != res_names:
            raise fio.DataError(f"video sets differ: only in results {sorted(res_names - gt_names)}, "
                                f"only in ground truth {sorted(gt_names - res_names)}")
        by_name = {p.name: p for p in res_videos}
        pairs = [(g.name, by_name[g.name], g) for g in gt_videos]

    reports = []
    for name, res_path, gt_path in pairs:
        gt_stems, gt = fio.read_video(gt_path)
        res_stems, res = fio.read_video(res_path)
        if gt_stems != res_stems:
            raise fio.DataError(f"{name}: frame sets differ: only in results "
                                f"{sorted(set(res_stems) - set(gt_stems))}, only in ground truth "
                                f"{sorted(set(gt_stems) - set(res_stems))}")
        if flow_dir is None:
            fdir = fio.default_flow_dir(gt_path)
        else:
            fdir = Path(flow_dir) if single else Path(flow_dir) / name
        flows = fio.read_adjacent_flows(fdir, gt_stems) if len(gt_stems) > 1 else []
        reports.append(evaluate_video(name, to_unit(res), to_unit(gt), flows, gt_stems, threshold))
    return MetricReport(reports)
