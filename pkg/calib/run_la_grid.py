"""la64thin lr/batch grid with head init."""
import time
from neuromark.presets import make_config
from neuromark.trainer import train

def run(name, **kw):
    cfg = make_config("low-affine-64", recognizer="thin", eval_interval=250,
                      eval_samples=1024, **kw)
    t0 = time.time()
    def prog(r):
        print(f"{name} it {r.iteration:>5d} loss {r.loss:+.4f} p {r.accuracy:.4f} [{r.seconds:.0f}s]", flush=True)
    model, stats = train(cfg, progress=prog)
    print(f"{name} DONE best p={model.metrics['accuracy']:.4f} wall={time.time()-t0:.0f}s", flush=True)

run("lr2e-3_b32", iterations=3000, seed=1, lr=2e-3)
run("lr1e-3_b64", iterations=3000, seed=1, batch=64)
run("lr2e-3_b64", iterations=3000, seed=1, lr=2e-3, batch=64)
