"""Calibration batch 3: la64base, m-sweep points, textured."""
import time
import numpy as np
from neuromark.presets import make_config
from neuromark.trainer import train
from neuromark.bundle import save_bundle
from neuromark.imageio import save_png
from neuromark.tensor import substream

def run(name, cfg, save=None):
    t0 = time.time()
    def prog(r):
        print(f"{name} it {r.iteration:>5d} loss {r.loss:+.4f} p {r.accuracy:.4f} C {r.capacity:.2f} [{r.seconds:.0f}s]", flush=True)
    model, stats = train(cfg, progress=prog)
    if save:
        save_bundle(model, save)
    print(f"{name} DONE best p={model.metrics['accuracy']:.4f} C={model.metrics['capacity']:.2f} wall={time.time()-t0:.0f}s", flush=True)
    return model

run("la64base", make_config("low-affine-64", iterations=8000, eval_interval=500,
                            eval_samples=1024, seed=1), save="calib/la64base.nmk")
run("m16", make_config(None, n=64, marker_size=16, channels=3, recognizer="thin",
                       phi="low-affine", iterations=4000, eval_interval=500,
                       eval_samples=1024, seed=1))
run("m48", make_config(None, n=64, marker_size=48, channels=3, recognizer="thin",
                       phi="low-affine", iterations=4000, eval_interval=500,
                       eval_samples=1024, seed=1))
run("m32", make_config(None, n=64, marker_size=32, channels=3, recognizer="thin",
                       phi="low-affine", iterations=4000, eval_interval=500,
                       eval_samples=1024, seed=1))

# textured: build the same prototype the acceptance test uses
rng = substream(512, "texture-proto")
y, x = np.mgrid[0:96, 0:96] / 96.0
img = 0.5 + 0.25 * np.sin(14 * x + 3 * np.sin(5 * y)) + 0.15 * np.sin(23 * (x + y))
img = img + 0.08 * rng.standard_normal((96, 96))
img = np.clip(img, 0.02, 0.98).astype(np.float32)
rgb = np.stack([img, np.roll(img, 7, axis=0), 1 - img])
save_png(rgb, "calib/proto.png")
run("textured", make_config("textured-64", iterations=2500, eval_interval=250,
                            eval_samples=1024, seed=1,
                            style_prototype="calib/proto.png"),
    save="calib/textured.nmk")
