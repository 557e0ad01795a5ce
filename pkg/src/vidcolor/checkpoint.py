"""Single-file checkpoints: named parameter arrays, configs, optimizer and schedule state."""
from pathlib import Path

import torch

from .discriminator import Discriminator, DiscriminatorConfig
from .generator import Generator, GeneratorConfig

FORMAT_VERSION = 1


def save_checkpoint(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save({"format_version": FORMAT_VERSION, **payload}, path)
    return path


def load_checkpoint(path):
    payload = torch.load(path, map_location="cpu", weights_only=True)
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint format {version!r}")
    return payload


def generator_payload(gen):
    return {"generator_config": gen.cfg.to_dict(), "generator": gen.state_dict()}


def load_generator(source):
    """Build a generator from a checkpoint path or payload."""
    payload = load_checkpoint(source) if isinstance(source, (str, Path)) else source
    gen = Generator(GeneratorConfig(**payload["generator_config"]))
    gen.load_state_dict(payload["generator"])
    return gen


def load_discriminator(source):
    payload = load_checkpoint(source) if isinstance(source, (str, Path)) else source
    disc = Discriminator(DiscriminatorConfig(**payload["discriminator_config"]))
    disc.load_state_dict(payload["discriminator"])
    return disc
