"""Slice the saved high-blur model by blur strength: accuracy and confidence."""
import numpy as np
from neuromark.bits import random_bits
from neuromark.bundle import load_bundle
from neuromark.recognizer import decode
from neuromark.renderer import render_batch, sample_nuisance
from neuromark.tensor import substream

model = load_bundle("calib/diag_hb.nmk")
phi = model.phi
rng = substream(777, "slice")
acc, conf = {}, {}
for _ in range(100):
    bits = random_bits(rng, 32, model.n)
    params = [sample_nuisance(phi, rng, channels=model.c, canvas=model.s) for _ in range(32)]
    markers, _ = model.synth.forward(bits)
    images, _ = render_batch(markers, params, canvas=model.s)
    scores, _ = model.recog.forward(images, train=False)
    ok = (decode(scores) == bits).mean(axis=1)
    mag = np.abs(scores).mean(axis=1)
    for p_, m_, prm in zip(ok, mag, params):
        key = round(prm.blur_sigma * 2) / 2
        acc.setdefault(key, []).append(p_)
        conf.setdefault(key, []).append(m_)
print("blur slice -> accuracy, mean |score|")
for key in sorted(acc):
    print(f"sigma~{key:>4}: p={np.mean(acc[key]):.4f} |r|={np.mean(conf[key]):7.2f} (n={len(acc[key])})")

# marker statistics: contrast and spatial smoothness
bits = random_bits(substream(5, "mk"), 8, model.n)
mk, _ = model.synth.forward(bits)
dx = np.abs(np.diff(mk, axis=3)).mean()
print(f"marker stats: min={mk.min():.3f} max={mk.max():.3f} std={mk.std():.3f} |dx|={dx:.4f}")
# fraction of saturated pixels
print(f"saturated (<0.02 or >0.98): {((mk < 0.02) | (mk > 0.98)).mean():.3f}")
