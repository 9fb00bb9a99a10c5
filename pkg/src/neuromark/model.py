"""A trained synthesizer/recognizer pair with everything needed to use it."""
from __future__ import annotations

import numpy as np

from .bits import check_bits
from .recognizer import Recognizer
from .synthesizer import make_synthesizer
from .tensor import DTYPE, substream


class MarkerModel:
    """Synthesizer + recognizer pair plus the sampling setup they were
    trained under. Serialized and restored by neuromark.bundle."""

    def __init__(self, n, m, c, s, synth_variant, recog_variant, phi, seed,
                 synth_channels=32, synth_stages=2, metrics=None):
        self.n, self.m, self.c, self.s = n, m, c, s
        self.synth_variant = synth_variant
        self.recog_variant = recog_variant
        self.phi = phi
        self.seed = seed
        self.synth_channels = synth_channels
        self.synth_stages = synth_stages
        self.metrics = dict(metrics or {})
        self.synth = make_synthesizer(
            synth_variant, n, m, c, substream(seed, "init-synth"),
            channels=synth_channels, stages=synth_stages,
        )
        self.recog = Recognizer(n, s, c, recog_variant, substream(seed, "init-recog"))

    def params(self):
        synth = [(f"synth.{k}", p) for k, p in self.synth.params()]
        recog = [(f"recog.{k}", p) for k, p in self.recog.params()]
        return synth + recog

    def state_entries(self):
        """Ordered (name, array) pairs covering parameters and buffers."""
        out = [(name, p.data) for name, p in self.params()]
        out += [(f"synth.{k}", b) for k, b in self.synth.buffers()]
        out += [(f"recog.{k}", b) for k, b in self.recog.buffers()]
        return out

    def snapshot(self):
        return [arr.copy() for _, arr in self.state_entries()]

    def restore(self, snap):
        for (_, arr), saved in zip(self.state_entries(), snap):
            arr[...] = saved

    def encode(self, bits):
        """Markers for one payload (n,) or a batch (B,n); no gradients."""
        bits = check_bits(np.asarray(bits, DTYPE))
        single = bits.ndim == 1
        if single:
            bits = bits[None]
        markers, _ = self.synth.forward(bits)
        return markers[0] if single else markers

    def recognize(self, images, train=False):
        """Soft-bit scores for (c,s,s) or (B,c,s,s) images; no gradients."""
        single = images.ndim == 3
        if single:
            images = images[None]
        scores, _ = self.recog.forward(images.astype(DTYPE, copy=False), train=train)
        return scores[0] if single else scores
