import numpy as np
import pytest

from neuromark import load_bundle, save_bundle, substream
from neuromark.bundle import MAGIC, read_raw_bundle
from neuromark.presets import make_config
from neuromark.trainer import build_model


def random_model(seed, **kw):
    args = dict(n=6, marker_size=16, channels=1, recognizer="thin", phi="default", seed=seed)
    args.update(kw)
    cfg = make_config(None, **args)
    model = build_model(cfg)
    rng = substream(seed, "scramble")
    for _, arr in model.state_entries():
        arr[...] = rng.standard_normal(arr.shape).astype(arr.dtype)
    model.metrics.update(accuracy=float(rng.uniform()), capacity=1.5, loss=-0.5, iteration=10)
    return model


class TestBundleRoundTrip:
    def test_bytes_stable_over_save_load_save(self, tmp_path):
        model = random_model(100)
        p1 = tmp_path / "a.nmk"
        p2 = tmp_path / "b.nmk"
        save_bundle(model, p1)
        loaded = load_bundle(p1)
        save_bundle(loaded, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_tensor_payload_bit_exact(self, tmp_path):
        model = random_model(7)
        path = tmp_path / "m.nmk"
        save_bundle(model, path)
        loaded = load_bundle(path)
        for (n1, a1), (n2, a2) in zip(model.state_entries(), loaded.state_entries()):
            assert n1 == n2
            assert np.array_equal(a1, a2)

    def test_header_determines_shapes(self, tmp_path):
        model = random_model(8, recognizer="base", n=12)
        path = tmp_path / "m.nmk"
        save_bundle(model, path)
        header, tensors = read_raw_bundle(path)
        assert header["n"] == 12
        for spec in header["tensors"]:
            assert tuple(spec["shape"]) == tensors[spec["name"]].shape

    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_many_random_round_trips(self, tmp_path, seed):
        model = random_model(seed, recognizer="thin" if seed % 2 else "base")
        path = tmp_path / f"{seed}.nmk"
        save_bundle(model, path)
        loaded = load_bundle(path)
        for (_, a1), (_, a2) in zip(model.state_entries(), loaded.state_entries()):
            assert np.array_equal(a1, a2)
        assert loaded.phi == model.phi
        assert loaded.metrics == model.metrics

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.nmk"
        path.write_bytes(b"not a bundle at all")
        with pytest.raises(ValueError, match="magic"):
            load_bundle(path)

    def test_truncated_payload_rejected(self, tmp_path):
        model = random_model(3)
        path = tmp_path / "m.nmk"
        save_bundle(model, path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-16])
        with pytest.raises(ValueError, match="truncated"):
            load_bundle(path)

    def test_magic_prefix(self, tmp_path):
        model = random_model(4)
        path = tmp_path / "m.nmk"
        save_bundle(model, path)
        assert path.read_bytes().startswith(MAGIC)
