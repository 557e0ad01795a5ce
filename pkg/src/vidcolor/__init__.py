"""Recurrent hybrid video colorization with temporal-consistency training."""
from .discriminator import Discriminator, DiscriminatorConfig
from .frames import denormalize, normalize, replicate_channels, to_grayscale
from .generator import Generator, GeneratorConfig, colorize_clip
from .losses import LossWeights
from .training import TrainConfig, train_stage1, train_stage2
from .warp import binary_mask, nonocclusion_mask, warp

__version__ = "0.1.0"
