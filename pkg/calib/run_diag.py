"""Train longer at high blur, save the bundle, then slice accuracy by blur sigma."""
import time
import numpy as np
from neuromark.bits import random_bits
from neuromark.bundle import save_bundle
from neuromark.presets import make_config
from neuromark.recognizer import decode
from neuromark.renderer import render_batch, sample_nuisance
from neuromark.tensor import substream
from neuromark.trainer import train

cfg = make_config("high-blur-8", iterations=4000, eval_interval=250, eval_samples=1024, seed=1)
t0 = time.time()
def prog(r):
    print(f"diag it {r.iteration:>5d} loss {r.loss:+.4f} p {r.accuracy:.4f} [{r.seconds:.0f}s]", flush=True)
model, stats = train(cfg, progress=prog)
save_bundle(model, "calib/diag_hb.nmk")
print(f"diag DONE best p={model.metrics['accuracy']:.4f} wall={time.time()-t0:.0f}s", flush=True)

rng = substream(777, "slice")
bins = {}
for _ in range(80):
    bits = random_bits(rng, 32, 8)
    params = [sample_nuisance(cfg.phi, rng, channels=3, canvas=32) for _ in range(32)]
    markers, _ = model.synth.forward(bits)
    images, _ = render_batch(markers, params, canvas=32)
    scores, _ = model.recog.forward(images, train=False)
    ok = (decode(scores) == bits).mean(axis=1)
    for p_, prm in zip(ok, params):
        key = round(prm.blur_sigma * 2) / 2
        bins.setdefault(key, []).append(p_)
for key in sorted(bins):
    v = bins[key]
    print(f"sigma~{key:>4}: p={np.mean(v):.4f}  (n={len(v)})", flush=True)
