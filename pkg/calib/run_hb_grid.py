"""High-blur hyperparameter grid: escape the saturated-margin plateau."""
import sys, time
from neuromark.presets import make_config
from neuromark.trainer import train

def run(name, **kw):
    cfg = make_config("high-blur-8", eval_interval=200, eval_samples=1024, **kw)
    t0 = time.time()
    def prog(r):
        print(f"{name} it {r.iteration:>5d} loss {r.loss:+.4f} p {r.accuracy:.4f} [{r.seconds:.0f}s]", flush=True)
    model, stats = train(cfg, progress=prog)
    print(f"{name} DONE best p={model.metrics['accuracy']:.4f} wall={time.time()-t0:.0f}s", flush=True)

run("lr3e-3_b32", iterations=1400, seed=1, lr=3e-3)
run("lr1e-3_b64", iterations=1400, seed=1, batch=64)
run("lr3e-3_b64", iterations=1400, seed=1, lr=3e-3, batch=64)
run("lr1e-2_b32", iterations=1400, seed=1, lr=1e-2)
