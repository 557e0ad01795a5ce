"""Flat ``key = value`` configuration files for training runs.

Top-level keys name :class:`TrainConfig` fields; nested ones use a dotted
prefix (``weights.l1``, ``generator.base_channels``,
``discriminator.num_downsamples``). Tuples are comma-separated
(``generator.input_resolution = 32,32``). Unknown keys are rejected.
"""
from dataclasses import fields, is_dataclass

from .training import TrainConfig

NESTED = ("weights", "generator", "discriminator")


class ConfigError(ValueError):
    """Bad config file or override."""


def flatten(config):
    """TrainConfig -> ordered {dotted key: value}."""
    out = {}
    for f in fields(config):
        value = getattr(config, f.name)
        if is_dataclass(value):
            for g in fields(value):
                out[f"{f.name}.{g.name}"] = getattr(value, g.name)
        else:
            out[f.name] = value
    return out


def format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        return ",".join(str(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def parse_value(text, like, key):
    """Coerce ``text`` to the type of the current value ``like``."""
    text = text.strip()
    try:
        if isinstance(like, bool):
            low = text.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(text)
        if isinstance(like, int):
            return int(text)
        if isinstance(like, float):
            return float(text)
        if isinstance(like, tuple):
            return tuple(int(p) for p in text.split(",") if p.strip())
        return text
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {type(like).__name__}") from None


def parse_text(text, source="<config>"):
    """Read ``key = value`` lines; ``#`` starts a comment."""
    items = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{n}: expected key = value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        items[key] = value
    return items


def apply(config, items):
    """Return a new TrainConfig with string ``items`` applied."""
    flat = flatten(config)
    unknown = sorted(set(items) - set(flat))
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    for key, text in items.items():
        flat[key] = parse_value(text, flat[key], key)
    top = {k: v for k, v in flat.items() if "." not in k}
    for prefix in NESTED:
        top[prefix] = {k.split(".", 1)[1]: v for k, v in flat.items() if k.startswith(prefix + ".")}
    try:
        return TrainConfig(**top)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def dump(config):
    return "".join(f"{k} = {format_value(v)}\n" for k, v in flatten(config).items())


def resolve(stage, path=None, overrides=(), seed=None):
    """Stage defaults, then the config file, then ``key=value`` overrides, then the seed."""
    config = TrainConfig.for_stage(stage)
    if path is not None:
        try:
            text = open(path).read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        config = apply(config, parse_text(text, str(path)))
    items = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        items[key.strip()] = value
    if seed is not None:
        items["seed"] = str(seed)
    config = apply(config, items)
    if config.stage != stage:
        raise ConfigError(f"config says stage {config.stage} but the command trains stage {stage}")
    return config
