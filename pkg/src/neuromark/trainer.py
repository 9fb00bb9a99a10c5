"""Joint stochastic optimization of the synthesizer/recognizer pair.

Each step samples a minibatch of payloads and distortion parameter sets,
pushes them through synthesize -> distort -> recognize, and applies one
ADAM update to both networks from the recognition loss (optionally plus a
weighted texture term). The master seed fans out into independent
substreams for initialization, payload sampling, distortion sampling and
evaluation, so results replay exactly and changing the batch size does not
change initialization.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .bits import random_bits
from .model import MarkerModel
from .objectives import FeatureNet, StylePrototype, batch_objective, style_loss_batch
from .recognizer import decode
from .renderer import BackgroundPool, NuisanceDistribution, render_batch, render_batch_backward, sample_nuisance
from .tensor import substream


@dataclass
class TrainConfig:
    n: int = 64                      # payload bits
    marker_size: int = 32            # marker side in pixels
    channels: int = 3
    canvas: Optional[int] = None     # recognizer input side; None: marker size
    synthesizer: str = "linear"
    recognizer: str = "base"
    phi: NuisanceDistribution = field(default_factory=NuisanceDistribution)
    style_weight: Union[None, float, str] = None   # None, weight, or "auto"
    style_prototype: Optional[str] = None          # image path
    style_tap: int = 2
    batch: int = 32
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    iterations: int = 8000
    eval_interval: int = 500
    eval_samples: int = 2048
    seed: int = 0
    synth_channels: int = 32
    synth_stages: int = 2

    def resolved_canvas(self):
        return self.canvas if self.canvas is not None else self.marker_size

    def validate(self):
        checks = [
            (self.n >= 1, "n", "must be >= 1"),
            (self.marker_size >= 4, "marker_size", "must be >= 4"),
            (self.channels in (1, 3), "channels", "must be 1 or 3"),
            (self.resolved_canvas() >= self.marker_size, "canvas", "must be >= marker_size"),
            (self.resolved_canvas() % 8 == 0, "canvas", "must be divisible by 8"),
            (self.batch >= 2, "batch", "must be >= 2 (batch normalization)"),
            (self.lr > 0, "lr", "must be positive"),
            (0 < self.beta1 < 1 and 0 < self.beta2 < 1, "beta1/beta2", "must be in (0,1)"),
            (self.adam_eps > 0, "adam_eps", "must be positive"),
            (self.iterations >= 0, "iterations", "must be >= 0"),
            (self.eval_interval >= 1, "eval_interval", "must be >= 1"),
            (self.eval_samples >= 1, "eval_samples", "must be >= 1"),
        ]
        for ok, fieldname, msg in checks:
            if not ok:
                raise ValueError(f"config field {fieldname!r} {msg}")
        if self.style_weight not in (None, 0, 0.0):
            if self.style_weight != "auto" and not (
                isinstance(self.style_weight, (int, float)) and self.style_weight >= 0
            ):
                raise ValueError("config field 'style_weight' must be None, 'auto' or a number >= 0")
            if not self.style_prototype:
                raise ValueError("config field 'style_prototype' is required when style_weight is set")
        self.phi.validate()
        return self


@dataclass
class EvalRecord:
    iteration: int
    loss: float
    accuracy: float
    capacity: float
    seconds: float


class TrainStats:
    CSV_HEADER = "iteration,loss,accuracy,capacity,seconds"

    def __init__(self):
        self.records = []

    def add(self, record):
        self.records.append(record)

    def best(self):
        best = None
        for r in self.records:
            if best is None or r.accuracy >= best.accuracy:
                best = r
        return best

    def to_csv(self):
        lines = [self.CSV_HEADER]
        for r in self.records:
            lines.append(
                f"{r.iteration},{r.loss!r},{r.accuracy!r},{r.capacity!r},{r.seconds:.3f}"
            )
        return "\n".join(lines) + "\n"

    def write_csv(self, path):
        with open(path, "w") as f:
            f.write(self.to_csv())


def binary_entropy(p):
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -(p * math.log2(p) + (1 - p) * math.log2(1 - p))


def capacity(n, p):
    """Effective bits per marker, n * (1 - H(p)); below-chance p clamps to 0."""
    if p < 0.5:
        return 0.0
    return n * (1.0 - binary_entropy(p))


class Adam:
    def __init__(self, tensors, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.tensors = list(tensors)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.moments = [
            (np.zeros_like(t.data), np.zeros_like(t.data)) for t in self.tensors
        ]
        self.step_count = 0

    def step(self):
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1 - b1 ** self.step_count
        bc2 = 1 - b2 ** self.step_count
        for t, (m, v) in zip(self.tensors, self.moments):
            g = t.grad
            if g is None:
                continue
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * (g * g)
            t.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def zero_grads(self):
        for t in self.tensors:
            t.zero_grad()


@dataclass
class StepResult:
    total: float
    recognition: float
    style: float
    style_weight: float


def train_step(model, adam, config, rng_bits, rng_phi, pool=None, style=None, style_weight=0.0):
    """One minibatch update; returns the batch losses.

    style is an optional (FeatureNet, StylePrototype) pair. A style_weight
    of "auto" is resolved on this step so the two terms start with equal
    magnitude; the resolved value is returned.
    """
    s = config.resolved_canvas()
    payload = random_bits(rng_bits, config.batch, config.n)
    params = [
        sample_nuisance(config.phi, rng_phi, channels=config.channels, pool=pool, canvas=s)
        for _ in range(config.batch)
    ]
    markers, synth_caches = model.synth.forward(payload)
    images, render_cache = render_batch(markers, params, pool=pool, canvas=s)
    scores, recog_caches = model.recog.forward(images, train=True)
    rec_loss, gscores = batch_objective(payload, scores)

    gimages = model.recog.backward(gscores, recog_caches)
    gmarkers = render_batch_backward(gimages, render_cache)

    sty_loss = 0.0
    weight = 0.0
    if style is not None:
        featnet, proto = style
        sty_loss, gm_style = style_loss_batch(markers, proto, featnet)
        if style_weight == "auto":
            weight = abs(rec_loss) / max(sty_loss, 1e-12)
        else:
            weight = float(style_weight)
        gmarkers = gmarkers + weight * gm_style
    model.synth.backward(gmarkers, synth_caches)

    total = rec_loss + weight * sty_loss
    if not math.isfinite(total):
        raise FloatingPointError(
            f"non-finite loss {total} (recognition {rec_loss}, style {sty_loss}); "
            f"master seed {config.seed}"
        )
    adam.step()
    adam.zero_grads()
    return StepResult(total, rec_loss, sty_loss, weight)


def evaluate(model, phi, n_samples, rng, pool=None, batch=64):
    """Monte-Carlo accuracy/capacity/loss over fresh payloads and distortions.

    Runs the recognizer in eval mode; returns (accuracy, capacity, loss).
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    s = model.s
    correct = 0
    total_bits = 0
    loss_sum = 0.0
    done = 0
    while done < n_samples:
        k = min(batch, n_samples - done)
        payload = random_bits(rng, k, model.n)
        params = [
            sample_nuisance(phi, rng, channels=model.c, pool=pool, canvas=s)
            for _ in range(k)
        ]
        markers, _ = model.synth.forward(payload)
        images, _ = render_batch(markers, params, pool=pool, canvas=s)
        scores, _ = model.recog.forward(images, train=False)
        loss, _ = batch_objective(payload, scores)
        loss_sum += loss * k
        correct += int((decode(scores) == payload).sum())
        total_bits += payload.size
        done += k
    p = correct / total_bits
    return p, capacity(model.n, p), loss_sum / n_samples


def build_model(config):
    return MarkerModel(
        n=config.n, m=config.marker_size, c=config.channels, s=config.resolved_canvas(),
        synth_variant=config.synthesizer, recog_variant=config.recognizer,
        phi=config.phi, seed=config.seed,
        synth_channels=config.synth_channels, synth_stages=config.synth_stages,
    )


def _build_style(config):
    if config.style_weight in (None, 0, 0.0):
        return None
    from .imageio import load_image

    featnet = FeatureNet(config.channels)
    proto_img = load_image(config.style_prototype, config.channels)
    proto = StylePrototype.build(proto_img, featnet, config.style_tap)
    return featnet, proto


def train(config, progress=None):
    """Run the full training loop; returns (model, stats).

    Evaluates at iteration 0, every eval_interval steps and at the end; the
    returned model carries the parameters of the best-accuracy evaluation
    (ties resolve to the latest).
    """
    config.validate()
    model = build_model(config)
    pool = None
    if config.phi.backgrounds:
        pool = BackgroundPool.from_dir(
            config.phi.backgrounds, config.channels, config.resolved_canvas()
        )
    style = _build_style(config)
    style_weight = config.style_weight if style is not None else 0.0

    adam = Adam(
        [p for _, p in model.params()],
        lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.adam_eps,
    )
    rng_bits = substream(config.seed, "train-bits")
    rng_phi = substream(config.seed, "train-phi")
    rng_eval = substream(config.seed, "eval")

    stats = TrainStats()
    best_snap = None
    best_acc = -1.0
    best_record = None
    t0 = time.perf_counter()

    def run_eval(iteration):
        nonlocal best_snap, best_acc, best_record
        p, cap, loss = evaluate(
            model, config.phi, config.eval_samples, rng_eval, pool=pool
        )
        record = EvalRecord(iteration, loss, p, cap, time.perf_counter() - t0)
        stats.add(record)
        if p >= best_acc:
            best_acc = p
            best_snap = model.snapshot()
            best_record = record
        if progress is not None:
            progress(record)

    for it in range(config.iterations):
        if it % config.eval_interval == 0:
            run_eval(it)
        result = train_step(
            model, adam, config, rng_bits, rng_phi, pool=pool,
            style=style, style_weight=style_weight,
        )
        if style_weight == "auto":
            style_weight = result.style_weight
            model.metrics["style_weight"] = result.style_weight
    run_eval(config.iterations)

    if best_snap is not None:
        model.restore(best_snap)
    model.metrics.update(
        iteration=best_record.iteration,
        accuracy=best_record.accuracy,
        capacity=best_record.capacity,
        loss=best_record.loss,
    )
    return model, stats
