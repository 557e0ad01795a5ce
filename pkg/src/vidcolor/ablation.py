"""Desk-scale ablation harness over the ablation-table settings.

Every setting is a set of stage-2 loss weights plus architecture and
training-stage toggles. ``run_ablation`` trains each setting with the same
seed and step budget and scores it on held-out synthetic clips.
"""
import csv
import io as _io
import logging
from dataclasses import dataclass, replace

import numpy as np
import torch

from .data import VideoData
from .frames import to_grayscale, to_unit
from .generator import colorize_clip
from .losses import LossWeights
from .metrics import pair_warp_errors, psnr, ssim
from .training import Stage2Trainer, TrainConfig, build_models, train_stage1, train_stage2

log = logging.getLogger(__name__)

FULL = LossWeights()
_NO_TEMPORAL = dict(short_term=0.0, dense_long_term=0.0)


def _w(**terms):
    """Weights with only the named terms active, at their default coefficients;
    the first-anchor term borrows the dense long-term coefficient."""
    defaults = FULL.to_dict()
    defaults["long_term"] = FULL.dense_long_term
    return LossWeights(**{k: (defaults[k] if k in terms else 0.0) for k in defaults})


@dataclass(frozen=True)
class AblationSetting:
    name: str
    target: str
    weights: LossWeights = FULL
    use_global_extractor: bool = True
    use_placeholder_extractor: bool = True
    # "stage1": stage-1 checkpoint only; "stage2": full budget;
    # "stage2_partial": stage-2 checkpoint at half the budget
    stage: str = "stage2"


SETTINGS = {s.name: s for s in [
    AblationSetting("l(1)", "baseline: L1 only", _w(l1=1)),
    AblationSetting("l(2)", "baseline: L1 + short-term", _w(l1=1, short_term=1)),
    AblationSetting("l(3.1)", "colorization quality: without L1",
                    _w(perceptual=1, adversarial=1, short_term=1, dense_long_term=1)),
    AblationSetting("l(3.2)", "colorization quality: without perceptual",
                    _w(l1=1, adversarial=1, short_term=1, dense_long_term=1)),
    AblationSetting("l(3.3)", "colorization quality: without adversarial",
                    _w(l1=1, perceptual=1, short_term=1, dense_long_term=1)),
    AblationSetting("l(3.4)", "colorization quality: without perceptual, adversarial",
                    _w(l1=1, short_term=1, dense_long_term=1)),
    AblationSetting("l(3.5)", "colorization quality: without L1, adversarial",
                    _w(perceptual=1, short_term=1, dense_long_term=1)),
    AblationSetting("l(3.6)", "colorization quality: without L1, perceptual",
                    _w(adversarial=1, short_term=1, dense_long_term=1)),
    AblationSetting("l(3.7)", "colorization quality: temporal terms only",
                    _w(short_term=1, dense_long_term=1)),
    AblationSetting("l(4.1)", "smoothing: without short-term",
                    _w(l1=1, perceptual=1, adversarial=1, dense_long_term=1)),
    AblationSetting("l(4.2)", "smoothing: without dense long-term",
                    _w(l1=1, perceptual=1, adversarial=1, short_term=1)),
    AblationSetting("l(4.3)", "smoothing: without temporal terms",
                    _w(l1=1, perceptual=1, adversarial=1)),
    AblationSetting("l(4.4)", "smoothing: first-anchor long-term only",
                    _w(l1=1, perceptual=1, adversarial=1, long_term=1)),
    AblationSetting("l(4.5)", "smoothing: short-term + first-anchor long-term",
                    _w(l1=1, perceptual=1, adversarial=1, short_term=1, long_term=1)),
    AblationSetting("f(1)", "feature extractors: without global extractor", use_global_extractor=False),
    AblationSetting("f(2)", "feature extractors: without placeholder extractor and recurrence",
                    use_placeholder_extractor=False),
    AblationSetting("f(3)", "feature extractors: mainstream only",
                    use_global_extractor=False, use_placeholder_extractor=False),
    AblationSetting("t(1)", "training scheme: stage-1 checkpoint", stage="stage1"),
    AblationSetting("t(2)", "training scheme: partially trained stage-2 checkpoint", stage="stage2_partial"),
    AblationSetting("full", "all terms, both stages"),
]}

# rows of the ablation table, in table order; "full" is the complete model
TABLE_ROWS = ["l(1)", "l(2)", "l(3.1)", "l(3.2)", "l(3.3)", "l(3.4)", "l(3.5)", "l(3.6)", "l(3.7)",
              "l(4.1)", "l(4.2)", "l(4.3)", "l(4.4)", "l(4.5)", "f(1)", "f(2)", "f(3)", "t(1)", "t(2)",
              "full"]
# settings with no runnable desk-scale counterpart, with the reason
EXCLUDED = {}

# coefficient-sensitivity settings (l1, perceptual, adversarial, short-term, dense long-term)
COEFFICIENT_SETTINGS = {
    name: AblationSetting(name, target, LossWeights(*coeffs))
    for name, coeffs, target in [
        ("s(1)", (1, 1, 1, 1, 1), "all coefficients 1"),
        ("s(2)", (20, 5, 1, 3, 5), "double L1"),
        ("s(3)", (10, 10, 1, 3, 5), "double perceptual"),
        ("s(4)", (10, 5, 2, 3, 5), "double adversarial"),
        ("s(5)", (10, 5, 1, 6, 5), "double short-term"),
        ("s(6)", (10, 5, 1, 3, 10), "double dense long-term"),
        ("s(7)", (20, 10, 2, 3, 5), "double L1, perceptual, adversarial"),
        ("s(8)", (10, 5, 1, 6, 10), "double short-term and dense long-term"),
    ]
}


def get_setting(name):
    if name in SETTINGS:
        return SETTINGS[name]
    if name in COEFFICIENT_SETTINGS:
        return COEFFICIENT_SETTINGS[name]
    raise KeyError(f"unknown ablation setting {name!r}")


@dataclass
class AblationBudget:
    stage1_steps: int = 300
    stage2_steps: int = 200
    stage1_batch: int = 8
    stage2_batch: int = 4
    window_T: int = 5
    remote_gap: int = 5
    # None keeps the base config's rates
    stage1_lr: float = None
    stage2_lr: float = None


def colorize_synth(gen, clip):
    """Colorize a synthetic clip from its grayscale frames and exact adjacent flows; [T,3,H,W] in [-1,1]."""
    dtype = next(gen.parameters()).dtype
    frames = torch.as_tensor(clip.frames, dtype=dtype)
    flows = [torch.as_tensor(f, dtype=dtype) for f in clip.adjacent_flows()]
    gen.eval()
    with torch.no_grad():
        out = colorize_clip(gen, to_grayscale(frames).unsqueeze(1), flows)
    return out[:, 0].double().numpy()


def score_clips(gen, clips, remote_gap=5):
    """PSNR/SSIM against ground truth, adjacent warp error, and warp error over
    pairs at least ``remote_gap`` frames apart, using exact flows and occlusion."""
    psnrs, ssims, adj, remote = [], [], [], []
    for clip in clips:
        out = to_unit(colorize_synth(gen, clip))
        gt = to_unit(clip.frames)
        psnrs += [psnr(o, g) for o, g in zip(out, gt)]
        if min(gt.shape[-2:]) >= 11:
            ssims += [ssim(o, g) for o, g in zip(out, gt)]
        T = len(out)
        pairs = [(t - 1, t) for t in range(1, T)]
        adj.append(np.nanmean(pair_warp_errors(out, pairs, clip.flows, clip.masks)))
        far = [(m, t) for t in range(T) for m in range(t - remote_gap + 1) if t - m >= remote_gap]
        if far:
            remote.append(np.nanmean(pair_warp_errors(out, far, clip.flows, clip.masks)))
    return {
        "psnr": float(np.mean(psnrs)),
        "ssim": float(np.mean(ssims)) if ssims else float("nan"),
        "warp_error": float(np.mean(adj)),
        "remote_warp_error": float(np.mean(remote)) if remote else float("nan"),
    }


def _configs(setting, base, budget):
    gcfg = replace(base.generator, use_global_extractor=setting.use_global_extractor,
                   use_placeholder_extractor=setting.use_placeholder_extractor)
    c1 = replace(base, stage=1, generator=gcfg, max_steps=budget.stage1_steps, epochs=10 ** 9,
                 batch_size=budget.stage1_batch, checkpoint_every=0)
    if budget.stage1_lr is not None:
        c1 = replace(c1, lr_g=budget.stage1_lr)
    steps2 = budget.stage2_steps // 2 if setting.stage == "stage2_partial" else budget.stage2_steps
    c2 = replace(base, stage=2, generator=gcfg, max_steps=steps2, epochs=10 ** 9,
                 batch_size=budget.stage2_batch, window_T=budget.window_T, weights=setting.weights,
                 checkpoint_every=0)
    if budget.stage2_lr is not None:
        c2 = replace(c2, lr_g=budget.stage2_lr, lr_d=budget.stage2_lr)
    return c1, c2


def run_setting(setting, train_clips, heldout_clips, budget, base, stage1_cache=None):
    """Train one setting; returns (metrics row, generator)."""
    stage1_cache = {} if stage1_cache is None else stage1_cache
    c1, c2 = _configs(setting, base, budget)
    key = (setting.use_global_extractor, setting.use_placeholder_extractor)
    if key not in stage1_cache:
        gen, _ = build_models(c1)
        images = np.concatenate([c.frames for c in train_clips])
        stage1_cache[key] = train_stage1(gen, images, c1)
    init = stage1_cache[key]
    gen, disc = build_models(c2)
    if setting.stage == "stage1":
        gen.load_state_dict(init["generator"])
    else:
        videos = [VideoData.from_synth(c, name=f"train{i}") for i, c in enumerate(train_clips)]
        train_stage2(gen, disc, videos, c2, init)
    row = {"setting": setting.name, "target": setting.target,
           "parameters": sum(p.numel() for p in gen.parameters()),
           **score_clips(gen, heldout_clips, budget.remote_gap)}
    log.info("ablation %s: %s", setting.name, row)
    return row, gen


def run_ablation(names, train_clips, heldout_clips, budget=None, base=None):
    """Run the named settings with a shared seed and budget; returns a list of rows."""
    budget = budget or AblationBudget()
    base = base or TrainConfig()
    settings = [get_setting(n) for n in names]
    cache = {}
    return [run_setting(s, train_clips, heldout_clips, budget, base, cache)[0] for s in settings]


ABLATION_COLUMNS = ["setting", "target", "parameters", "psnr", "ssim", "warp_error", "remote_warp_error"]


def rows_to_csv(rows):
    buf = _io.StringIO()
    w = csv.DictWriter(buf, ABLATION_COLUMNS, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: (f"{v:.8g}" if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()
