"""Two-stage training: image-mode pre-training, then recurrent adversarial video training."""
import csv
import json
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import torch

from .checkpoint import generator_payload, load_checkpoint, save_checkpoint
from .data import collate, sample_window
from .discriminator import Discriminator, DiscriminatorConfig
from .frames import to_grayscale
from .generator import Generator, GeneratorConfig, colorize_clip
from .losses import (TERM_ORDER, LossWeights, PerceptualNet, combine, dense_long_term_loss, l1_loss,
                     long_term_first_anchor_loss, perceptual_loss, short_term_loss, wgan_d_loss,
                     wgan_g_loss)

log = logging.getLogger(__name__)

LR_SCHEDULES = ("halve_after", "halve_every", "constant")


class NumericalError(RuntimeError):
    """A loss became NaN or infinite."""


@dataclass
class TrainConfig:
    stage: int = 1
    epochs: int = 20
    max_steps: int = 0  # 0: run the full epoch budget
    batch_size: int = 4
    window_T: int = 5
    lr_g: float = 2e-4
    lr_d: float = 5e-5
    lr_schedule: str = "halve_after"
    lr_step_epochs: int = 10
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    alpha: float = 50.0
    normalize_pairs: bool = False
    seed: int = 0
    checkpoint_every: int = 0
    perceptual_seed: int = 0
    perceptual_channels: tuple = (16, 32)
    weights: LossWeights = field(default_factory=LossWeights)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    discriminator: DiscriminatorConfig = field(default_factory=DiscriminatorConfig)

    def __post_init__(self):
        if self.stage not in (1, 2):
            raise ValueError(f"stage must be 1 or 2, got {self.stage}")
        if self.lr_schedule not in LR_SCHEDULES:
            raise ValueError(f"lr_schedule must be one of {LR_SCHEDULES}, got {self.lr_schedule!r}")
        if self.batch_size < 1 or self.epochs < 0 or self.max_steps < 0:
            raise ValueError("batch_size must be >= 1; epochs and max_steps >= 0")
        if self.stage == 2 and self.window_T < 3:
            raise ValueError("stage 2 needs window_T >= 3 for the dense long-term loss")
        self.perceptual_channels = tuple(int(c) for c in self.perceptual_channels)
        if isinstance(self.weights, dict):
            self.weights = LossWeights(**self.weights)
        if isinstance(self.generator, dict):
            self.generator = GeneratorConfig(**self.generator)
        if isinstance(self.discriminator, dict):
            self.discriminator = DiscriminatorConfig(**self.discriminator)

    @classmethod
    def for_stage(cls, stage, **overrides):
        if stage == 1:
            base = dict(stage=1, epochs=20, lr_g=2e-4, lr_schedule="halve_after", lr_step_epochs=10,
                        batch_size=16)
        else:
            base = dict(stage=2, epochs=20, lr_g=5e-5, lr_d=5e-5, lr_schedule="halve_every",
                        lr_step_epochs=100, batch_size=4, window_T=5)
        return cls(**{**base, **overrides})

    def to_dict(self):
        return asdict(self)

    def lr_at(self, base_lr, epoch):
        return scheduled_lr(base_lr, epoch, self.lr_schedule, self.lr_step_epochs)


def scheduled_lr(base_lr, epoch, schedule, step_epochs):
    """Learning rate at a 0-based epoch index."""
    if schedule == "constant":
        return base_lr
    if schedule == "halve_after":
        return base_lr * (0.5 if epoch >= step_epochs else 1.0)
    if schedule == "halve_every":
        return base_lr * 0.5 ** (epoch // step_epochs)
    raise ValueError(f"unknown schedule {schedule!r}")


def build_models(config, dtype=torch.float32):
    """Seeded construction of generator and critic (fixed creation order)."""
    torch.manual_seed(config.seed)
    gen = Generator(config.generator).to(dtype)
    disc = Discriminator(config.discriminator).to(dtype)
    return gen, disc


def _rng_state(rng):
    return json.dumps(rng.bit_generator.state)


def _set_rng_state(rng, state):
    rng.bit_generator.state = json.loads(state)


def _check_finite(values, step):
    bad = [k for k, v in values.items() if not math.isfinite(v)]
    if bad:
        raise NumericalError(f"non-finite loss at step {step}: {bad}")


class _LogWriter:
    def __init__(self, path, columns):
        self.path = Path(path) if path else None
        self.columns = columns
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            if not self.path.exists():
                with open(self.path, "w", newline="") as f:
                    csv.writer(f).writerow(columns)

    def write(self, row):
        if self.path:
            with open(self.path, "a", newline="") as f:
                csv.writer(f).writerow([row.get(c, "") for c in self.columns])


class Stage1Trainer:
    """Image-mode training of the generator on (grayscale, colour) pairs with L1 + perceptual."""

    def __init__(self, gen, images, config, perceptual=None):
        if len(images) == 0:
            raise ValueError("empty image dataset")
        self.gen = gen
        self.config = config
        self.dtype = next(gen.parameters()).dtype
        self.images = torch.as_tensor(np.asarray(images) if not torch.is_tensor(images) else images).to(self.dtype)
        self.perceptual = (perceptual or PerceptualNet.random(config.perceptual_seed,
                                                              config.perceptual_channels)).to(self.dtype)
        self.opt = torch.optim.Adam(gen.parameters(), lr=config.lr_g,
                                    betas=(config.adam_beta1, config.adam_beta2))
        self.rng = np.random.default_rng(config.seed)
        self.step_count = 0
        self._order = []
        self.steps_per_epoch = math.ceil(len(self.images) / config.batch_size)

    @property
    def epoch(self):
        return self.step_count // self.steps_per_epoch

    def total_steps(self):
        budget = self.config.epochs * self.steps_per_epoch
        return min(budget, self.config.max_steps) if self.config.max_steps else budget

    def _next_batch(self):
        if self.step_count % self.steps_per_epoch == 0:
            self._order = self.rng.permutation(len(self.images)).tolist()
        i = self.step_count % self.steps_per_epoch
        idx = self._order[i * self.config.batch_size:(i + 1) * self.config.batch_size]
        return self.images[idx]

    def step(self):
        lr = self.config.lr_at(self.config.lr_g, self.epoch)
        for group in self.opt.param_groups:
            group["lr"] = lr
        self.gen.train()
        rgb = self._next_batch()
        out = self.gen.forward_first(to_grayscale(rgb))
        terms = {"l1": l1_loss(out, rgb), "perceptual": perceptual_loss(out, rgb, self.perceptual)}
        w = self.config.weights
        breakdown = combine(terms, LossWeights(l1=w.l1, perceptual=w.perceptual, adversarial=0,
                                               short_term=0, dense_long_term=0, long_term=0))
        values = breakdown.as_floats()
        _check_finite(values, self.step_count)
        self.opt.zero_grad()
        breakdown.total.backward()
        self.opt.step()
        row = {"step": self.step_count, "epoch": self.epoch, "lr_g": lr, **values}
        self.step_count += 1
        return row

    def checkpoint(self):
        return {"stage": 1, **generator_payload(self.gen), "optimizer_g": self.opt.state_dict(),
                "step": self.step_count, "rng": _rng_state(self.rng), "order": list(self._order),
                "train_config": self.config.to_dict()}

    def load_state(self, payload):
        self.gen.load_state_dict(payload["generator"])
        if payload.get("stage") == 1 and "optimizer_g" in payload:
            self.opt.load_state_dict(payload["optimizer_g"])
            self.step_count = payload["step"]
            _set_rng_state(self.rng, payload["rng"])
            self._order = list(payload["order"])


class Stage2Trainer:
    """Recurrent video training: one critic update, then one generator update, per step."""

    def __init__(self, gen, disc, videos, config, perceptual=None):
        T = config.window_T
        self.videos = []
        for v in videos:
            if len(v) < T:
                warnings.warn(f"video {v.name or '?'} has {len(v)} frames < T={T}; skipped", stacklevel=2)
            else:
                self.videos.append(v)
        if not self.videos:
            raise ValueError(f"no video with at least T={T} frames")
        self.gen, self.disc, self.config = gen, disc, config
        self.dtype = next(gen.parameters()).dtype
        self.perceptual = (perceptual or PerceptualNet.random(config.perceptual_seed,
                                                              config.perceptual_channels)).to(self.dtype)
        betas = (config.adam_beta1, config.adam_beta2)
        self.opt_g = torch.optim.Adam(gen.parameters(), lr=config.lr_g, betas=betas)
        self.opt_d = torch.optim.Adam(disc.parameters(), lr=config.lr_d, betas=betas)
        self.rng = np.random.default_rng(config.seed)
        self.step_count = 0
        self.steps_per_epoch = max(1, math.ceil(len(self.videos) / config.batch_size))

    @property
    def epoch(self):
        return self.step_count // self.steps_per_epoch

    def total_steps(self):
        budget = self.config.epochs * self.steps_per_epoch
        return min(budget, self.config.max_steps) if self.config.max_steps else budget

    def next_batch(self):
        # each video equally likely, then a uniform window inside it
        picks = self.rng.integers(0, len(self.videos), size=self.config.batch_size)
        samples = [sample_window(self.videos[i], self.config.window_T, self.rng, self.config.alpha)
                   for i in picks]
        return collate(samples).to(self.dtype)

    def generator_terms(self, batch, outputs):
        """All stage-2 loss terms for generated ``outputs`` [T,B,3,H,W]."""
        frames = batch.frames
        flat_out, flat_gt = outputs.flatten(0, 1), frames.flatten(0, 1)
        npairs = self.config.normalize_pairs
        return {
            "l1": l1_loss(flat_out, flat_gt),
            "perceptual": perceptual_loss(flat_out, flat_gt, self.perceptual),
            "adversarial": wgan_g_loss(self.disc(flat_out)),
            "short_term": short_term_loss(outputs, batch.flows, batch.masks, npairs),
            "dense_long_term": dense_long_term_loss(outputs, batch.flows, batch.masks, npairs),
            "long_term": long_term_first_anchor_loss(outputs, batch.flows, batch.masks, npairs),
        }

    def step(self):
        cfg = self.config
        lr_g = cfg.lr_at(cfg.lr_g, self.epoch)
        lr_d = cfg.lr_at(cfg.lr_d, self.epoch)
        for group in self.opt_g.param_groups:
            group["lr"] = lr_g
        for group in self.opt_d.param_groups:
            group["lr"] = lr_d
        batch = self.next_batch()
        self.gen.train()
        outputs = colorize_clip(self.gen, to_grayscale(batch.frames), batch.adjacent_flows())

        self.disc.train()
        d_loss = wgan_d_loss(self.disc(outputs.detach().flatten(0, 1)), self.disc(batch.frames.flatten(0, 1)))
        self.opt_d.zero_grad()
        d_loss.backward()
        self.opt_d.step()

        # critic frozen in eval mode (no power-iteration step) for the generator pass
        self.disc.eval()
        breakdown = combine(self.generator_terms(batch, outputs), cfg.weights)
        values = breakdown.as_floats()
        values["critic"] = float(d_loss.detach())
        _check_finite(values, self.step_count)
        self.opt_g.zero_grad()
        breakdown.total.backward()
        self.opt_g.step()
        row = {"step": self.step_count, "epoch": self.epoch, "lr_g": lr_g, "lr_d": lr_d, **values}
        self.step_count += 1
        return row

    def checkpoint(self):
        return {"stage": 2, **generator_payload(self.gen),
                "discriminator_config": self.disc.cfg.to_dict(), "discriminator": self.disc.state_dict(),
                "optimizer_g": self.opt_g.state_dict(), "optimizer_d": self.opt_d.state_dict(),
                "step": self.step_count, "rng": _rng_state(self.rng), "train_config": self.config.to_dict()}

    def load_state(self, payload):
        """Stage-1 payloads initialize the generator; stage-2 payloads resume everything."""
        self.gen.load_state_dict(payload["generator"])
        if payload.get("stage") == 2:
            self.disc.load_state_dict(payload["discriminator"])
            self.opt_g.load_state_dict(payload["optimizer_g"])
            self.opt_d.load_state_dict(payload["optimizer_d"])
            self.step_count = payload["step"]
            _set_rng_state(self.rng, payload["rng"])


STAGE1_COLUMNS = ["step", "epoch", "lr_g", "l1", "perceptual", "total"]
STAGE2_COLUMNS = ["step", "epoch", "lr_g", "lr_d", *TERM_ORDER, "total", "critic"]


def _run(trainer, columns, out_dir, name):
    out_dir = Path(out_dir) if out_dir else None
    logw = _LogWriter(out_dir / f"{name}_log.csv" if out_dir else None, columns)
    every = trainer.config.checkpoint_every
    for _ in range(trainer.step_count, trainer.total_steps()):
        row = trainer.step()
        logw.write(row)
        if out_dir and every and trainer.step_count % every == 0:
            save_checkpoint(out_dir / f"{name}_step{trainer.step_count:06d}.pt", trainer.checkpoint())
    payload = trainer.checkpoint()
    if out_dir:
        save_checkpoint(out_dir / f"{name}_final.pt", payload)
    return payload


def train_stage1(gen, images, config, out_dir=None, perceptual=None):
    """Pre-train ``gen`` in image mode; returns the final checkpoint payload."""
    if config.stage != 1:
        raise ValueError("train_stage1 needs a stage-1 config")
    return _run(Stage1Trainer(gen, images, config, perceptual), STAGE1_COLUMNS, out_dir, "stage1")


def train_stage2(gen, disc, videos, config, init, out_dir=None, perceptual=None):
    """Recurrent adversarial training starting from a stage-1 (or stage-2) checkpoint."""
    if config.stage != 2:
        raise ValueError("train_stage2 needs a stage-2 config")
    if init is None:
        raise ValueError("stage 2 needs an initial checkpoint")
    payload = load_checkpoint(init) if isinstance(init, (str, Path)) else init
    trainer = Stage2Trainer(gen, disc, videos, config, perceptual)
    trainer.load_state(payload)
    return _run(trainer, STAGE2_COLUMNS, out_dir, "stage2")
