"""The decoding ConvNet: distorted image in, one real score per bit out.

Score signs are the decoded bits; sigmoid of a score is the probability
that the bit is +1, which downstream error-correcting codes can consume.
"""
from __future__ import annotations

import numpy as np

from . import ops
from .layers import BatchNorm, Conv2D, Dense, Flatten, MaxPool2, ReLU, Sequential

RECOG_VARIANTS = ("base", "thin", "vgg")

# (conv maps, hidden units) for the two plain variants
_PLAIN_WIDTHS = {"base": (96, 192), "thin": (24, 48)}
# per-block widths for the vgg-style variant used in texture runs
_VGG_WIDTHS = (24, 48, 96)
_VGG_HIDDEN = 192


class Recognizer:
    def __init__(self, n, s, c, variant, rng):
        if variant not in RECOG_VARIANTS:
            raise ValueError(f"unknown recognizer variant {variant!r}; expected {RECOG_VARIANTS}")
        if s % 8 != 0:
            raise ValueError(f"input side {s} must be divisible by 8 (three 2x poolings)")
        self.n, self.s, self.c, self.variant = n, s, c, variant
        layers = []
        cin = c
        if variant in _PLAIN_WIDTHS:
            maps, hidden = _PLAIN_WIDTHS[variant]
            for _ in range(3):
                layers += [Conv2D(cin, maps, 5, rng), BatchNorm(maps), MaxPool2(), ReLU()]
                cin = maps
            flat = maps * (s // 8) ** 2
        else:
            hidden = _VGG_HIDDEN
            for maps in _VGG_WIDTHS:
                layers += [
                    Conv2D(cin, maps, 3, rng), BatchNorm(maps), ReLU(),
                    Conv2D(maps, maps, 3, rng), BatchNorm(maps), MaxPool2(), ReLU(),
                ]
                cin = maps
            flat = _VGG_WIDTHS[-1] * (s // 8) ** 2
        layers += [Flatten(), Dense(flat, hidden, rng), ReLU(),
                   Dense(hidden, n, rng, init="head")]
        self.net = Sequential(layers)

    def params(self):
        return self.net.params()

    def buffers(self):
        return self.net.buffers()

    def forward(self, images, train=False):
        """Scores (B,n) for a batch of (B,c,s,s) images in [0,1]."""
        if images.ndim != 4 or images.shape[1:] != (self.c, self.s, self.s):
            raise ValueError(
                f"expected images of shape (B,{self.c},{self.s},{self.s}), got {images.shape}"
            )
        return self.net.forward(images, train=train)

    def backward(self, gscores, caches):
        return self.net.backward(gscores, caches)


def decode(scores):
    """Threshold scores at zero; exact zeros decode to -1."""
    scores = np.asarray(scores)
    return np.where(scores > 0, 1.0, -1.0).astype(np.float32)


def probabilities(scores):
    """Per-bit probability that the bit is +1."""
    p, _ = ops.sigmoid(np.asarray(scores))
    return p


def bit_accuracy(bits, scores):
    """Fraction of score signs matching the payload bits."""
    bits = np.asarray(bits)
    scores = np.asarray(scores)
    if bits.shape != scores.shape:
        raise ValueError(f"length mismatch: bits {bits.shape} vs scores {scores.shape}")
    return float((decode(scores) == bits).mean())
