"""Differentiable simulation of marker fabrication and capture.

A marker is composited over a background crop through an affine warp, then
pushed through color/gamma shift, contrast reduction, Gaussian blur and
additive pixel noise. Every stage is piecewise differentiable in the
marker; the sampled distortion parameters never receive gradients.

Stage order is fixed and documented here: composite/affine -> color ->
contrast -> blur -> noise. Color parameters are perturbations around the
identity (gain and gamma centered at 1, offset at 0).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import backend

log = logging.getLogger(__name__)

IDENTITY_AFFINE = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])

# gradient of x**gamma blows up at 0 for gamma < 1; the color stage clamps
# its base to this floor (forward change is invisible at 8-bit scale)
COLOR_BASE_FLOOR = 1e-4

# blur sigmas below this are rendered as a no-op
BLUR_SKIP_BELOW = 0.05


@dataclass
class NuisanceDistribution:
    """Widths of the distortion distribution the renderer samples from."""

    affine_sigma: float = 0.1
    color_delta: float = 0.15
    contrast_min: float = 0.6
    blur_max: float = 1.0
    blur_kernel: int = 5
    noise_max: float = 0.02
    canvas: int | None = None  # None: canvas matches the marker size
    backgrounds: str | None = None  # directory of background images

    def validate(self):
        if self.affine_sigma < 0:
            raise ValueError("affine_sigma must be >= 0")
        if not (0 < self.contrast_min <= 1):
            raise ValueError("contrast_min must be in (0, 1]")
        if not (0 <= self.color_delta < 1):
            raise ValueError("color_delta must be in [0, 1)")
        if self.blur_max < 0 or self.noise_max < 0:
            raise ValueError("blur_max and noise_max must be >= 0")
        if self.blur_kernel % 2 == 0:
            raise ValueError("blur_kernel must be odd")
        return self


# named width presets; the figure-reproduction presets keep the noise stage
# off (it is an addition on top of the affine/color/contrast/blur chain)
PHI_PRESETS = {
    "default": dict(affine_sigma=0.1, noise_max=0.0),
    "low-affine": dict(affine_sigma=0.05, noise_max=0.0),
    "high-blur": dict(affine_sigma=0.1, blur_max=2.5, blur_kernel=9, noise_max=0.0),
    "grayscale": dict(affine_sigma=0.1, noise_max=0.0),
    "identity": dict(
        affine_sigma=0.0, color_delta=0.0, contrast_min=1.0,
        blur_max=0.0, noise_max=0.0,
    ),
}


def phi_preset(name, **overrides):
    if name not in PHI_PRESETS:
        raise ValueError(f"unknown nuisance preset {name!r}; expected one of {sorted(PHI_PRESETS)}")
    kwargs = dict(PHI_PRESETS[name])
    kwargs.update(overrides)
    return NuisanceDistribution(**kwargs).validate()


@dataclass
class RenderParams:
    """One sampled distortion vector; fully determines a render."""

    affine: np.ndarray          # 6 coefficients, output coords -> source coords
    gain: np.ndarray            # per-channel multiplicative color shift
    gamma: float                # shared exponent
    offset: np.ndarray          # per-channel additive color shift
    contrast: float             # k in k*x + (1-k)*0.5
    blur_sigma: float
    blur_kernel: int
    noise_sigma: float
    noise_seed: int             # realizes the additive noise field
    background: tuple = (-1, 0, 0)  # (pool index, row offset, col offset)


class BackgroundPool:
    """Read-only pool of background images, each at least canvas-sized."""

    def __init__(self, images):
        self.images = list(images)

    @classmethod
    def from_dir(cls, directory, channels, min_size):
        from .imageio import load_image_dir

        images, skipped = load_image_dir(directory, channels, min_size)
        if skipped:
            log.warning("background pool: skipped %d images smaller than %dpx", skipped, min_size)
        return cls(images)

    def __len__(self):
        return len(self.images)

    def crop(self, index, row, col, size):
        img = self.images[index]
        return img[:, row:row + size, col:col + size]


def sample_nuisance(dist, rng, channels=3, pool=None, canvas=None):
    """Draw one RenderParams from the distribution.

    The draw order is fixed (affine, gain, gamma, offset, contrast, blur,
    noise sigma, noise seed, background) so a given generator state always
    produces the same parameters.
    """
    d = dist.color_delta
    affine = IDENTITY_AFFINE + dist.affine_sigma * rng.standard_normal(6)
    gain = 1.0 + rng.uniform(-d, d, channels)
    gamma = float(1.0 + rng.uniform(-d, d))
    offset = rng.uniform(-d, d, channels)
    contrast = float(rng.uniform(dist.contrast_min, 1.0))
    blur_sigma = float(rng.uniform(0.0, dist.blur_max))
    noise_sigma = float(rng.uniform(0.0, dist.noise_max))
    noise_seed = int(rng.integers(0, 2**63 - 1))
    if pool is not None and len(pool) > 0:
        size = canvas or dist.canvas
        if size is None:
            raise ValueError("background sampling needs a canvas size")
        idx = int(rng.integers(0, len(pool)))
        img = pool.images[idx]
        row = int(rng.integers(0, img.shape[1] - size + 1))
        col = int(rng.integers(0, img.shape[2] - size + 1))
        background = (idx, row, col)
    else:
        background = (-1, 0, 0)
    return RenderParams(
        affine=affine, gain=gain, gamma=gamma, offset=offset, contrast=contrast,
        blur_sigma=blur_sigma, blur_kernel=dist.blur_kernel,
        noise_sigma=noise_sigma, noise_seed=noise_seed, background=background,
    )


def _gaussian_kernel2d(size, sigma, dtype):
    r = np.arange(size, dtype=np.float64) - size // 2
    k1 = np.exp(-0.5 * (r / sigma) ** 2)
    k2 = np.outer(k1, k1)
    return (k2 / k2.sum()).astype(dtype)


def _backgrounds(params, pool, batch, channels, size, dtype):
    fill = np.empty((batch, channels, size, size), dtype)
    warned = False
    for i, p in enumerate(params):
        idx, row, col = p.background
        if pool is not None and len(pool) > 0 and idx >= 0:
            fill[i] = pool.crop(idx, row, col, size)
        else:
            if pool is not None and len(pool) == 0 and not warned:
                log.warning("empty background pool; falling back to constant 0.5")
                warned = True
            fill[i] = 0.5
    return fill


def render_batch(markers, params, pool=None, canvas=None):
    """Distort a batch of markers; returns (images (B,c,s,s), cache).

    Equivalent, sample for sample, to rendering each marker on its own.
    Deterministic given (markers, params, pool): the noise field is drawn
    from each sample's own noise_seed.
    """
    if len(markers) != len(params):
        raise ValueError(f"batch mismatch: {len(markers)} markers vs {len(params)} param sets")
    b, c, m, _ = markers.shape
    s = canvas or m
    if s < m:
        raise ValueError(f"canvas {s} smaller than marker {m}")
    if any(len(p.gain) != c or len(p.offset) != c for p in params):
        raise ValueError(f"per-channel color params do not match {c} marker channels")
    dt = markers.dtype

    # stage 1: composite over background through the affine warp
    fill = _backgrounds(params, pool, b, c, s, dt)
    aff = np.stack([p.affine for p in params]).astype(dt)
    x = backend.bilinear(np.ascontiguousarray(markers), aff, s, s, fill)
    affine_cache = (aff, markers.shape)

    # stage 2: color y = gain * x^gamma + offset, clamped to [0,1]
    gain = np.stack([p.gain for p in params]).astype(dt)[:, :, None, None]
    gamma = np.array([p.gamma for p in params], dt)[:, None, None, None]
    offset = np.stack([p.offset for p in params]).astype(dt)[:, :, None, None]
    if np.all(gain == 1) and np.all(gamma == 1) and np.all(offset == 0):
        y = np.clip(x, 0, 1)
        color_cache = ((0 < y) & (y < 1),)
    else:
        base = np.maximum(x, dt.type(COLOR_BASE_FLOOR))
        pre = gain * base ** gamma + offset
        y = np.clip(pre, 0, 1)
        inside = (0 < pre) & (pre < 1) & (x >= COLOR_BASE_FLOOR)
        color_cache = (inside, base, gain, gamma)
    x = y

    # stage 3: contrast reduction k*x + (1-k)*0.5
    k = np.array([p.contrast for p in params], dt)[:, None, None, None]
    x = k * x + (1 - k) * dt.type(0.5)

    # stage 4: Gaussian blur, replicate padding; skipped for tiny sigmas.
    # Samples group by kernel size so each group is one batched kernel call.
    blur_groups = []
    active = [i for i, p in enumerate(params) if p.blur_sigma >= BLUR_SKIP_BELOW]
    for size in sorted({params[i].blur_kernel for i in active}):
        idx = [i for i in active if params[i].blur_kernel == size]
        kernels = np.stack(
            [_gaussian_kernel2d(size, params[i].blur_sigma, dt) for i in idx]
        )
        x[idx] = backend.blur2d(np.ascontiguousarray(x[idx]), kernels)
        blur_groups.append((idx, kernels))

    # stage 5: additive Gaussian pixel noise, clamped to [0,1]
    noise_cache = None
    if any(p.noise_sigma > 0 for p in params):
        noise = np.empty_like(x)
        for i, p in enumerate(params):
            gen = np.random.Generator(np.random.PCG64(p.noise_seed))
            noise[i] = p.noise_sigma * gen.standard_normal(x[i].shape)
        pre = x + noise
        x = np.clip(pre, 0, 1)
        noise_cache = (0 < pre) & (pre < 1)

    return x, (affine_cache, color_cache, k, blur_groups, noise_cache)


def render_batch_backward(gout, cache):
    """Backward through the distortion chain into the markers only."""
    affine_cache, color_cache, k, blur_groups, noise_cache = cache
    g = gout * noise_cache if noise_cache is not None else gout.copy()
    for idx, kernels in blur_groups:
        g[idx] = backend.blur2d_grad(np.ascontiguousarray(g[idx]), kernels)
    g = g * k
    if len(color_cache) == 1:
        g = g * color_cache[0]
    else:
        inside, base, gain, gamma = color_cache
        g = g * inside * gain * gamma * base ** (gamma - 1)
    aff, marker_shape = affine_cache
    return backend.bilinear_grad_image(
        np.ascontiguousarray(g), aff, marker_shape[2], marker_shape[3]
    )


def render(marker, params, pool=None, canvas=None):
    """Render a single marker (c,m,m); see render_batch."""
    out, cache = render_batch(marker[None], [params], pool=pool, canvas=canvas)
    return out[0], cache


def render_backward(gout, cache):
    return render_batch_backward(gout[None], cache)[0]
