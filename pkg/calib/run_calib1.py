"""Calibration batch 1: sanity, high-blur-8, low-affine-64 thin and base."""
import sys, time
from neuromark.presets import make_config
from neuromark.trainer import train

def run(name, cfg):
    t0 = time.time()
    def prog(r):
        print(f"{name} it {r.iteration:>5d} loss {r.loss:+.4f} p {r.accuracy:.4f} C {r.capacity:.2f} [{r.seconds:.0f}s]", flush=True)
    model, stats = train(cfg, progress=prog)
    print(f"{name} DONE best p={model.metrics['accuracy']:.4f} C={model.metrics['capacity']:.2f} wall={time.time()-t0:.0f}s", flush=True)

run("sanity8", make_config(None, n=8, marker_size=16, channels=3, recognizer="thin",
                           phi="identity", iterations=2000, eval_interval=250,
                           eval_samples=1024, seed=1))
run("highblur8", make_config("high-blur-8", iterations=3000, eval_interval=250,
                             eval_samples=1024, seed=1))
run("la64thin", make_config("low-affine-64", recognizer="thin", iterations=8000,
                            eval_interval=500, eval_samples=1024, seed=1))
run("la64base", make_config("low-affine-64", iterations=8000, eval_interval=500,
                            eval_samples=1024, seed=1))
