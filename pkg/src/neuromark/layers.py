"""Thin layer objects wrapping ops with their parameters.

Every layer exposes forward(x, train) -> (y, cache) and
backward(gy, cache) -> gx; backward accumulates parameter gradients as a
side effect. Layers keep no per-call state, so a frozen stack is safe to
evaluate concurrently.
"""
from __future__ import annotations

import numpy as np

from . import ops
from .tensor import DTYPE, Tensor


def glorot_uniform(rng, shape, fan_in, fan_out, dtype=DTYPE):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape).astype(dtype)


def fan_in_uniform(rng, shape, fan_in, dtype=DTYPE):
    # image-producing output layers scale by fan-in alone: with huge fan-out
    # the Glorot average collapses the initial marker contrast to near-gray,
    # which stalls the joint optimization under strong distortions
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, shape).astype(dtype)


class Dense:
    def __init__(self, in_features, out_features, rng, init="glorot"):
        shape = (out_features, in_features)
        if init == "glorot":
            w = glorot_uniform(rng, shape, in_features, out_features)
        elif init == "fan-in":
            w = fan_in_uniform(rng, shape, in_features)
        else:
            # score heads start two orders smaller: margins must stay in the
            # live region of the sigmoid loss until the pair actually agrees,
            # or early mis-wirings freeze behind saturated margins
            w = glorot_uniform(rng, shape, in_features, out_features) * DTYPE(0.01)
        self.w = Tensor(w)
        self.b = Tensor(np.zeros(out_features, DTYPE))

    def params(self):
        return [("w", self.w), ("b", self.b)]

    def buffers(self):
        return []

    def forward(self, x, train=False):
        return ops.dense(x, self.w.data, self.b.data)

    def backward(self, gy, cache):
        gx, gw, gb = ops.dense_backward(gy, cache)
        self.w.accumulate_grad(gw)
        self.b.accumulate_grad(gb)
        return gx


class Conv2D:
    def __init__(self, in_channels, out_channels, ksize, rng, padding="same-zero", init="glorot"):
        fan_in = in_channels * ksize * ksize
        shape = (out_channels, in_channels, ksize, ksize)
        if init == "glorot":
            w = glorot_uniform(rng, shape, fan_in, out_channels * ksize * ksize)
        else:
            w = fan_in_uniform(rng, shape, fan_in)
        self.w = Tensor(w)
        self.b = Tensor(np.zeros(out_channels, DTYPE))
        self.padding = padding

    def params(self):
        return [("w", self.w), ("b", self.b)]

    def buffers(self):
        return []

    def forward(self, x, train=False):
        return ops.conv2d(x, self.w.data, self.b.data, padding=self.padding)

    def backward(self, gy, cache):
        gx, gk, gb = ops.conv2d_backward(gy, cache)
        self.w.accumulate_grad(gk)
        self.b.accumulate_grad(gb)
        return gx


class BatchNorm:
    def __init__(self, channels, momentum=0.9, eps=1e-5):
        self.gamma = Tensor(np.ones(channels, DTYPE))
        self.beta = Tensor(np.zeros(channels, DTYPE))
        self.state = ops.BatchNormState(channels)
        self.momentum = momentum
        self.eps = eps

    def params(self):
        return [("gamma", self.gamma), ("beta", self.beta)]

    def buffers(self):
        return [("running_mean", self.state.running_mean), ("running_var", self.state.running_var)]

    def forward(self, x, train=False):
        return ops.batchnorm(
            x, self.gamma.data, self.beta.data, self.state,
            mode="train" if train else "eval",
            momentum=self.momentum, eps=self.eps,
        )

    def backward(self, gy, cache):
        gx, ggamma, gbeta = ops.batchnorm_backward(gy, cache)
        self.gamma.accumulate_grad(ggamma)
        self.beta.accumulate_grad(gbeta)
        return gx


class _Stateless:
    def params(self):
        return []

    def buffers(self):
        return []


class MaxPool2(_Stateless):
    def forward(self, x, train=False):
        return ops.maxpool2(x)

    def backward(self, gy, cache):
        return ops.maxpool2_backward(gy, cache)


class AvgPool2(_Stateless):
    def forward(self, x, train=False):
        return ops.avgpool2(x)

    def backward(self, gy, cache):
        return ops.avgpool2_backward(gy, cache)


class Upsample2(_Stateless):
    def forward(self, x, train=False):
        return ops.upsample2(x)

    def backward(self, gy, cache):
        return ops.upsample2_backward(gy, cache)


class ReLU(_Stateless):
    def forward(self, x, train=False):
        return ops.relu(x)

    def backward(self, gy, cache):
        return ops.relu_backward(gy, cache)


class Sigmoid(_Stateless):
    def forward(self, x, train=False):
        return ops.sigmoid(x)

    def backward(self, gy, cache):
        return ops.sigmoid_backward(gy, cache)


class Flatten(_Stateless):
    def forward(self, x, train=False):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, gy, cache):
        return gy.reshape(cache)


class Reshape(_Stateless):
    """Reshape trailing dims to a fixed tail, keeping the batch axis."""

    def __init__(self, tail):
        self.tail = tuple(tail)

    def forward(self, x, train=False):
        return x.reshape((x.shape[0],) + self.tail), x.shape

    def backward(self, gy, cache):
        return gy.reshape(cache)


class Sequential:
    def __init__(self, layers):
        self.layers = list(layers)

    def params(self):
        out = []
        for i, layer in enumerate(self.layers):
            out.extend((f"{i}.{name}", p) for name, p in layer.params())
        return out

    def buffers(self):
        out = []
        for i, layer in enumerate(self.layers):
            out.extend((f"{i}.{name}", b) for name, b in layer.buffers())
        return out

    def forward(self, x, train=False):
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x, train=train)
            caches.append(cache)
        return x, caches

    def backward(self, gy, caches):
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            gy = layer.backward(gy, cache)
        return gy
