"""Parameter tensors and reproducible random streams."""
from __future__ import annotations

import zlib

import numpy as np

DTYPE = np.float32

# Bit generator behind every stream in the package. PCG64 output is stable
# across platforms and numpy releases for a fixed seed.
RNG_ALGORITHM = "numpy-pcg64"


class Tensor:
    """An n-d float array plus an optional same-shape gradient buffer.

    Activations travel through the network code as bare numpy arrays;
    ``Tensor`` wraps learnable parameters so value and gradient live
    together and optimizers can walk them uniformly.
    """

    __slots__ = ("data", "grad")

    def __init__(self, data, grad=None):
        self.data = np.asarray(data)
        if grad is not None:
            grad = np.asarray(grad)
            if grad.shape != self.data.shape:
                raise ValueError(
                    f"grad shape {grad.shape} does not match data shape {self.data.shape}"
                )
        self.grad = grad

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def accumulate_grad(self, g):
        """Add ``g`` into the gradient buffer, allocating it on first use."""
        g = np.asarray(g)
        if g.shape != self.data.shape:
            raise ValueError(
                f"gradient shape {g.shape} does not match parameter shape {self.data.shape}"
            )
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self):
        if self.grad is not None:
            self.grad[...] = 0

    def __repr__(self):
        has_grad = "with grad" if self.grad is not None else "no grad"
        return f"Tensor(shape={tuple(self.shape)}, {has_grad})"


class Rng:
    """Seeded random source; an identical seed gives an identical stream."""

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.algorithm = RNG_ALGORITHM

    def stream(self, label: str = "main") -> np.random.Generator:
        return substream(self.seed, label)

    def __repr__(self):
        return f"Rng(seed={self.seed}, algorithm={self.algorithm!r})"


def substream(seed: int, label: str) -> np.random.Generator:
    """Independent generator derived from (seed, label), stable across runs.

    Labels are hashed with crc32 so the mapping does not depend on the
    process hash seed. Separate labels give statistically independent
    streams; the same pair always replays the same draws.
    """
    key = zlib.crc32(label.encode("utf-8"))
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, key])
    return np.random.Generator(np.random.PCG64(ss))
