"""neuromark: learned visual markers.

A synthesizer network turns an n-bit payload into a small image; a
recognizer network reads the payload back from photos of that image. The
two are trained jointly through a differentiable simulation of printing
and capture distortions, so the marker family and its decoder co-adapt.
"""
from . import backend, ops
from .bits import format_bits, parse_bits, random_bits
from .bundle import load_bundle, save_bundle
from .model import MarkerModel
from .objectives import (
    FeatureNet,
    StylePrototype,
    batch_objective,
    gram,
    recognition_loss,
    style_loss,
    total_objective,
)
from .presets import PRESETS, make_config
from .recognizer import Recognizer, bit_accuracy, decode, probabilities
from .renderer import (
    BackgroundPool,
    NuisanceDistribution,
    RenderParams,
    phi_preset,
    render,
    render_batch,
    sample_nuisance,
)
from .synthesizer import make_synthesizer
from .tensor import Rng, Tensor, substream
from .trainer import Adam, TrainConfig, TrainStats, capacity, evaluate, train, train_step

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "BackgroundPool",
    "FeatureNet",
    "MarkerModel",
    "NuisanceDistribution",
    "PRESETS",
    "Recognizer",
    "RenderParams",
    "Rng",
    "StylePrototype",
    "Tensor",
    "TrainConfig",
    "TrainStats",
    "backend",
    "batch_objective",
    "bit_accuracy",
    "capacity",
    "decode",
    "evaluate",
    "format_bits",
    "gram",
    "load_bundle",
    "make_config",
    "make_synthesizer",
    "ops",
    "parse_bits",
    "phi_preset",
    "probabilities",
    "random_bits",
    "recognition_loss",
    "render",
    "render_batch",
    "sample_nuisance",
    "save_bundle",
    "style_loss",
    "substream",
    "total_objective",
    "train",
    "train_step",
]
