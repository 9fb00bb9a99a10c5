"""Shipped training configurations, one per reproduced marker-family regime.

Iteration budgets are sized for a 2-core desktop CPU; raise them for a
tighter converged accuracy.
"""
from __future__ import annotations

from dataclasses import asdict, fields

from .renderer import NuisanceDistribution, phi_preset
from .trainer import TrainConfig

PRESETS = {
    "default-64": dict(n=64, phi="default"),
    "low-affine-64": dict(n=64, phi="low-affine"),
    "low-affine-96": dict(n=96, phi="low-affine"),
    "high-blur-8": dict(n=8, phi="high-blur", iterations=3000),
    "grayscale-32": dict(n=32, channels=1, phi="grayscale"),
    "thin-64": dict(n=64, phi="default", recognizer="thin"),
    "tiny-16px-64": dict(n=64, marker_size=16, phi="default"),
    "textured-64": dict(
        n=64, marker_size=64, synthesizer="textured", recognizer="vgg",
        phi="low-affine", style_weight="auto", iterations=3000,
    ),
}

_CONFIG_FIELDS = {f.name for f in fields(TrainConfig)}


def preset_names():
    return sorted(PRESETS)


def make_config(preset=None, **overrides):
    """TrainConfig from a preset name plus field overrides."""
    base = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ValueError(f"unknown preset {preset!r}; available: {', '.join(preset_names())}")
        base.update(PRESETS[preset])
    base.update({k: v for k, v in overrides.items() if v is not None})
    phi = base.pop("phi", None)
    phi_overrides = base.pop("phi_overrides", None) or {}
    unknown = set(base) - _CONFIG_FIELDS
    if unknown:
        raise ValueError(f"unknown config fields: {', '.join(sorted(unknown))}")
    config = TrainConfig(**base)
    if isinstance(phi, str):
        config.phi = phi_preset(phi, **phi_overrides)
    elif isinstance(phi, NuisanceDistribution):
        config.phi = phi
    elif isinstance(phi, dict):
        config.phi = NuisanceDistribution(**{**phi, **phi_overrides})
    elif phi is not None:
        raise ValueError("config field 'phi' must be a preset name or a mapping of widths")
    elif phi_overrides:
        config.phi = NuisanceDistribution(**phi_overrides)
    config.phi.canvas = config.resolved_canvas()
    return config


def config_to_dict(config):
    d = asdict(config)
    d["phi"] = asdict(config.phi)
    return d
