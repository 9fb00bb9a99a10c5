"""Training objectives: the sign-recognition loss and the texture term.

The recognition loss averages an elementwise sigmoid of bit*score products,
so it lives in (-1, 0) with -1 meaning perfect recognition. The texture
term penalizes the squared Frobenius distance between Gram matrices of
feature maps computed by a fixed (never trained) convolutional filter bank.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .layers import glorot_uniform
from .tensor import DTYPE, substream

# fixed seed of the default random filter bank, so texture statistics are
# reproducible across installs without shipping trained weights
FEATURE_BANK_SEED = 0x7E8A31


def recognition_loss(bits, scores):
    """Mean sigmoid agreement loss for one payload; returns (loss, gscores).

    loss = -(1/n) sum_i sigmoid(bits_i * scores_i), in (-1, 0).
    """
    bits = np.asarray(bits)
    scores = np.asarray(scores)
    if bits.shape != scores.shape:
        raise ValueError(f"length mismatch: bits {bits.shape} vs scores {scores.shape}")
    s, _ = ops.sigmoid(bits * scores)
    loss = -float(s.mean())
    g = -(bits * s * (1 - s)) / s.size
    return loss, g


def batch_objective(bits, scores):
    """Mean per-sample recognition loss over a minibatch; (loss, gscores)."""
    bits = np.asarray(bits)
    scores = np.asarray(scores)
    if bits.ndim != 2 or bits.shape != scores.shape:
        raise ValueError(f"batch mismatch: bits {bits.shape} vs scores {scores.shape}")
    if bits.shape[0] == 0:
        raise ValueError("empty batch")
    s, _ = ops.sigmoid(bits * scores)
    loss = -float(s.mean())
    g = -(bits * s * (1 - s)) / s.size
    return loss, g


def gram(features, normalize=True):
    """Gram matrix of (k,h,w) feature maps: G_ij = <F_i, F_j> over space.

    By default the inner product is divided by h*w; the normalization is
    applied identically to both operands of the style distance, so it only
    rescales the objective (never its minimizer) and keeps style weights
    comparable across resolutions. Pass normalize=False for the raw sum.
    """
    k, h, w = features.shape
    flat = features.reshape(k, h * w)
    g = flat @ flat.T
    if normalize:
        g = g / features.dtype.type(h * w)
    return g


def gram_backward(ggram, features, normalize=True):
    k, h, w = features.shape
    flat = features.reshape(k, h * w)
    g = (ggram + ggram.T) @ flat
    if normalize:
        g = g / features.dtype.type(h * w)
    return g.reshape(k, h, w)


class FeatureNet:
    """Fixed convolutional filter bank whose activations define texture.

    Three 5x5 conv layers (16/32/64 maps) with ReLU and 2x average pooling
    between them. Weights come either from a seeded random draw or from a
    weights file; they are never part of training.
    """

    def __init__(self, channels_in, weights=None, seed=FEATURE_BANK_SEED, widths=(16, 32, 64)):
        self.channels_in = channels_in
        self.widths = tuple(widths)
        if weights is not None:
            self.filters = [(np.asarray(w, DTYPE), np.asarray(b, DTYPE)) for w, b in weights]
            self.source = "weights-file"
        else:
            rng = substream(seed, "feature-bank")
            self.filters = []
            cin = channels_in
            for cout in self.widths:
                fan_in = cin * 25
                fan_out = cout * 25
                w = glorot_uniform(rng, (cout, cin, 5, 5), fan_in, fan_out)
                self.filters.append((w, np.zeros(cout, DTYPE)))
                cin = cout
            self.source = f"seeded-random-bank:{seed}"

    @classmethod
    def from_file(cls, path, channels_in):
        """Load conv kernels from a model-bundle style weights file."""
        from .bundle import read_raw_bundle

        header, tensors = read_raw_bundle(path)
        weights = []
        i = 0
        while f"conv{i}.w" in tensors:
            weights.append((tensors[f"conv{i}.w"], tensors[f"conv{i}.b"]))
            i += 1
        if not weights:
            raise ValueError(f"{path}: no conv{{i}}.w tensors found")
        if weights[0][0].shape[1] != channels_in:
            raise ValueError(
                f"{path}: first layer expects {weights[0][0].shape[1]} channels, marker has {channels_in}"
            )
        return cls(channels_in, weights=weights)

    @property
    def taps(self):
        return len(self.filters)

    def features(self, x, tap):
        """Feature maps of layer `tap` (0-based) for a batch (B,C,H,W)."""
        if not 0 <= tap < len(self.filters):
            raise ValueError(f"tap {tap} out of range, bank has {len(self.filters)} layers")
        caches = []
        for i, (w, b) in enumerate(self.filters[: tap + 1]):
            x, c_conv = ops.conv2d(x, w.astype(x.dtype), b.astype(x.dtype))
            x, c_relu = ops.relu(x)
            pooled = i < tap
            if pooled:
                x, _ = ops.avgpool2(x)
            caches.append((c_conv, c_relu, pooled))
        return x, caches

    def features_backward(self, gf, caches):
        """Gradient w.r.t. the input image; filters stay frozen."""
        g = gf
        for c_conv, c_relu, pooled in reversed(caches):
            if pooled:
                g = ops.avgpool2_backward(g, None)
            g = ops.relu_backward(g, c_relu)
            g, _, _ = ops.conv2d_backward(g, c_conv, with_kernel_grad=False)
        return g


@dataclass
class StylePrototype:
    """A texture image with its precomputed target Gram matrix."""

    image: np.ndarray
    target: np.ndarray
    tap: int

    @classmethod
    def build(cls, image, featnet, tap):
        image = np.asarray(image, DTYPE)
        f, _ = featnet.features(image[None], tap)
        return cls(image=image, target=gram(f[0]), tap=tap)


def style_loss_batch(markers, proto, featnet):
    """Mean squared Gram distance to the prototype; (loss, gmarkers)."""
    b = markers.shape[0]
    f, caches = featnet.features(markers, proto.tap)
    target = proto.target.astype(f.dtype)
    loss = 0.0
    gf = np.empty_like(f)
    for i in range(b):
        g = gram(f[i])
        diff = g - target
        loss += float((diff * diff).sum())
        gf[i] = gram_backward(2 * diff / f.dtype.type(b), f[i])
    loss /= b
    gm = featnet.features_backward(gf, caches)
    return loss, gm


def style_loss(marker, proto, featnet):
    """Squared Gram distance of one marker to the prototype; (loss, gmarker)."""
    loss, gm = style_loss_batch(marker[None], proto, featnet)
    return loss, gm[0]


def total_objective(recognition_term, style_term, style_weight):
    """Combined objective; style_weight >= 0, zero recovers pure recognition."""
    if style_weight < 0:
        raise ValueError("style_weight must be >= 0")
    return recognition_term + style_weight * style_term
