"""After diag: la64thin baseline, high-blur b64 probe, la64base."""
import time
from neuromark.presets import make_config
from neuromark.trainer import train
from neuromark.bundle import save_bundle

def run(name, cfg, save=None):
    t0 = time.time()
    def prog(r):
        print(f"{name} it {r.iteration:>5d} loss {r.loss:+.4f} p {r.accuracy:.4f} C {r.capacity:.2f} [{r.seconds:.0f}s]", flush=True)
    model, stats = train(cfg, progress=prog)
    if save:
        save_bundle(model, save)
    print(f"{name} DONE best p={model.metrics['accuracy']:.4f} C={model.metrics['capacity']:.2f} wall={time.time()-t0:.0f}s", flush=True)

run("la64thin", make_config("low-affine-64", recognizer="thin", iterations=8000,
                            eval_interval=500, eval_samples=1024, seed=1),
    save="calib/la64thin.nmk")
run("hb_b64", make_config("high-blur-8", iterations=2500, eval_interval=250,
                          eval_samples=1024, seed=1, batch=64))
run("la64base", make_config("low-affine-64", iterations=8000, eval_interval=500,
                            eval_samples=1024, seed=1),
    save="calib/la64base.nmk")
