"""Bit-string to marker-image networks.

Two variants: a plain linear map (one dense layer into a sigmoid image) and
a textured generator (dense seed image refined by 3x3 convolutions with 2x
upsamplings in between). Both map a (B,n) batch of {-1,+1} payloads to
(B,c,m,m) images with every pixel strictly inside (0,1).
"""
from __future__ import annotations

from .layers import Conv2D, Dense, ReLU, Reshape, Sequential, Sigmoid, Upsample2

SYNTH_VARIANTS = ("linear", "textured")


class LinearSynthesizer:
    variant = "linear"

    def __init__(self, n, m, c, rng):
        self.n, self.m, self.c = n, m, c
        self.net = Sequential([
            Dense(n, c * m * m, rng, init="fan-in"),
            Reshape((c, m, m)),
            Sigmoid(),
        ])

    def params(self):
        return self.net.params()

    def buffers(self):
        return self.net.buffers()

    def forward(self, bits):
        if bits.ndim != 2 or bits.shape[1] != self.n:
            raise ValueError(f"expected payload shape (B,{self.n}), got {bits.shape}")
        return self.net.forward(bits)

    def backward(self, gmarkers, caches):
        return self.net.backward(gmarkers, caches)


class TexturedSynthesizer:
    variant = "textured"

    def __init__(self, n, m, c, rng, channels=32, stages=2):
        if m % (1 << stages) != 0:
            raise ValueError(f"marker size {m} not divisible by 2^{stages}")
        self.n, self.m, self.c = n, m, c
        self.channels, self.stages = channels, stages
        base = m >> stages
        layers = [Dense(n, channels * base * base, rng, init="fan-in"),
                  Reshape((channels, base, base))]
        for _ in range(stages):
            layers += [Conv2D(channels, channels, 3, rng), ReLU(), Upsample2()]
        layers += [Conv2D(channels, c, 3, rng, init="fan-in"), Sigmoid()]
        self.net = Sequential(layers)

    def params(self):
        return self.net.params()

    def buffers(self):
        return self.net.buffers()

    def forward(self, bits):
        if bits.ndim != 2 or bits.shape[1] != self.n:
            raise ValueError(f"expected payload shape (B,{self.n}), got {bits.shape}")
        return self.net.forward(bits)

    def backward(self, gmarkers, caches):
        return self.net.backward(gmarkers, caches)


def make_synthesizer(variant, n, m, c, rng, channels=32, stages=2):
    if variant == "linear":
        return LinearSynthesizer(n, m, c, rng)
    if variant == "textured":
        return TexturedSynthesizer(n, m, c, rng, channels=channels, stages=stages)
    raise ValueError(f"unknown synthesizer variant {variant!r}; expected {SYNTH_VARIANTS}")
