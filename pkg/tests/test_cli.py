import json

import numpy as np
import pytest

from neuromark import bit_accuracy, load_bundle, parse_bits, save_bundle
from neuromark.bits import bits_to_hex, format_bits
from neuromark.cli import main
from neuromark.imageio import load_image, resize_center_crop, save_png, save_ppm, to_uint8
from neuromark.presets import make_config
from neuromark.trainer import train


@pytest.fixture(scope="module")
def tiny_model_path(tmp_path_factory):
    # small but genuinely trained model so decode round-trips make sense
    cfg = make_config(None, n=8, marker_size=16, channels=1, recognizer="thin",
                      phi="identity", batch=16, iterations=250, eval_interval=125,
                      eval_samples=256, seed=404)
    model, _ = train(cfg)
    path = tmp_path_factory.mktemp("model") / "tiny.nmk"
    save_bundle(model, path)
    return str(path)


class TestBitText:
    def test_binary_and_hex_agree(self):
        b = parse_bits("10100011", 8)
        h = parse_bits("a3", 8)
        assert np.array_equal(b, h)
        assert format_bits(b) == "10100011"
        assert bits_to_hex(b) == "a3"

    def test_zero_maps_to_minus_one(self):
        b = parse_bits("00000000", 8)
        assert np.all(b == -1)

    def test_bad_length_mentions_n(self):
        with pytest.raises(ValueError, match="8"):
            parse_bits("1010", 8)

    def test_garbage_rejected(self):
        with pytest.raises(ValueError):
            parse_bits("zz!", 8)


class TestImageIO:
    def test_quantization_rule(self):
        img = np.array([[[0.0, 0.4999, 0.5, 1.0]]])
        assert to_uint8(img).tolist() == [[[0, 127, 128, 255]]]

    def test_png_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        img = rng.uniform(0, 1, (3, 10, 12)).astype(np.float32)
        path = tmp_path / "x.png"
        save_png(img, path)
        back = load_image(path, 3)
        assert back.shape == (3, 10, 12)
        assert np.abs(back - img).max() <= 0.5 / 255 + 1e-6

    def test_ppm_plain_text(self, tmp_path):
        img = np.full((1, 2, 2), 0.5, np.float32)
        path = tmp_path / "x.ppm"
        save_ppm(img, path)
        text = path.read_text().split()
        assert text[0] == "P2"
        assert text[4:] == ["128"] * 4

    def test_gray_conversion_is_channel_mean(self, tmp_path):
        img = np.zeros((3, 4, 4), np.float32)
        img[0] = 1.0  # pure red
        path = tmp_path / "red.png"
        save_png(img, path)
        gray = load_image(path, 1)
        assert np.allclose(gray, 1 / 3, atol=1 / 255)

    def test_resize_center_crop(self):
        rng = np.random.default_rng(1)
        img = rng.uniform(0, 1, (3, 40, 20)).astype(np.float32)
        out = resize_center_crop(img, 16)
        assert out.shape == (3, 16, 16)

    def test_scale_export(self, tmp_path):
        img = np.random.default_rng(2).uniform(0, 1, (1, 8, 8)).astype(np.float32)
        p_near = tmp_path / "n.png"
        save_png(img, p_near, scale=3, resample="nearest")
        back = load_image(p_near, 1)
        assert back.shape == (1, 24, 24)
        # nearest upscale replicates pixels exactly
        assert np.array_equal(back[:, ::3, ::3], load_image_saved(img, tmp_path))


def load_image_saved(img, tmp_path):
    p = tmp_path / "ref.png"
    save_png(img, p)
    return load_image(p, 1)


class TestCommands:
    def test_encode_decode_round_trip(self, tiny_model_path, tmp_path):
        marker = tmp_path / "m.png"
        assert main(["encode", tiny_model_path, "10110010", "--out", str(marker)]) == 0
        report = tmp_path / "r.json"
        assert main(["decode", tiny_model_path, str(marker),
                     "--true-bits", "10110010", "--json", str(report)]) == 0
        data = json.loads(report.read_text())
        assert data["bits"] == "10110010"
        assert data["correct"] == 8
        assert len(data["probabilities"]) == 8

    def test_encode_twice_byte_identical(self, tiny_model_path, tmp_path):
        a = tmp_path / "a.png"
        b = tmp_path / "b.png"
        main(["encode", tiny_model_path, "ff", "--out", str(a)])
        main(["encode", tiny_model_path, "ff", "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_single_bit_flip_changes_file(self, tiny_model_path, tmp_path):
        a = tmp_path / "a.png"
        b = tmp_path / "b.png"
        main(["encode", tiny_model_path, "00000000", "--out", str(a)])
        main(["encode", tiny_model_path, "00000001", "--out", str(b)])
        assert a.read_bytes() != b.read_bytes()

    def test_encode_wrong_length_fails(self, tiny_model_path, tmp_path, capsys):
        rc = main(["encode", tiny_model_path, "101", "--out", str(tmp_path / "x.png")])
        assert rc == 2
        assert "8" in capsys.readouterr().err

    def test_eval_reports_accuracy(self, tiny_model_path, tmp_path, capsys):
        csv = tmp_path / "eval.csv"
        rc = main(["eval", tiny_model_path, "--samples", "64", "--seed", "5",
                   "--csv", str(csv)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "p=" in out and "C=" in out
        lines = csv.read_text().strip().split("\n")
        assert lines[0] == "samples,seed,accuracy,capacity,loss"
        assert lines[1].startswith("64,5,")

    def test_eval_single_sample_ok(self, tiny_model_path, capsys):
        assert main(["eval", tiny_model_path, "--samples", "1", "--seed", "1"]) == 0
        assert "p=" in capsys.readouterr().out

    def test_preview_deterministic_with_seed(self, tiny_model_path, tmp_path):
        a = tmp_path / "a.png"
        b = tmp_path / "b.png"
        assert main(["preview", tiny_model_path, "--count", "4", "--seed", "11",
                     "--out", str(a)]) == 0
        assert main(["preview", tiny_model_path, "--count", "4", "--seed", "11",
                     "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_preview_identity_phi_tiles_identical(self, tiny_model_path, tmp_path):
        sheet = tmp_path / "s.png"
        main(["preview", tiny_model_path, "--phi", "identity", "--count", "4",
              "--seed", "3", "--out", str(sheet)])
        img = load_image(sheet, 1)
        # tiles arranged 2x2 with 2px padding; all four renders identical
        t = img[:, 2:18, 2:18]
        assert np.array_equal(t, img[:, 2:18, 20:36])
        assert np.array_equal(t, img[:, 20:36, 2:18])

    def test_preview_default_phi_tiles_differ(self, tiny_model_path, tmp_path):
        sheet = tmp_path / "s.png"
        main(["preview", tiny_model_path, "--phi", "default", "--count", "4",
              "--seed", "3", "--out", str(sheet)])
        img = load_image(sheet, 1)
        assert not np.array_equal(img[:, 2:18, 2:18], img[:, 2:18, 20:36])

    def test_train_writes_bundle_and_stats(self, tmp_path, capsys):
        out = tmp_path / "m.nmk"
        stats = tmp_path / "s.csv"
        cfg = dict(n=4, marker_size=16, channels=1, recognizer="thin",
                   phi="identity", batch=4, iterations=2, eval_interval=1,
                   eval_samples=8, seed=2)
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        rc = main(["train", "--config", str(cfg_path), "--out", str(out),
                   "--stats", str(stats)])
        assert rc == 0
        model = load_bundle(out)
        assert model.n == 4
        lines = stats.read_text().strip().split("\n")
        assert lines[0] == "iteration,loss,accuracy,capacity,seconds"
        assert len(lines) == 4  # evals at 0, 1, and 2

    def test_train_invalid_config_field_level_error(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(dict(n=0)))
        rc = main(["train", "--config", str(cfg_path), "--out", str(tmp_path / "x.nmk")])
        assert rc == 2
        assert "'n'" in capsys.readouterr().err

    def test_zero_budget_bundle_loadable(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(dict(
            n=4, marker_size=16, channels=1, recognizer="thin", phi="identity",
            batch=4, iterations=0, eval_samples=8, seed=2)))
        out = tmp_path / "m.nmk"
        assert main(["train", "--config", str(cfg_path), "--out", str(out)]) == 0
        assert load_bundle(out).n == 4

    def test_decode_unreadable_image_fails(self, tiny_model_path, tmp_path, capsys):
        bad = tmp_path / "bad.png"
        bad.write_bytes(b"this is not an image")
        rc = main(["decode", tiny_model_path, str(bad)])
        assert rc == 2
        assert "cannot read" in capsys.readouterr().err

    def test_trained_decode_accuracy(self, tiny_model_path, tmp_path):
        # the fixture model trains distortion-free to high accuracy; the
        # PNG round trip must preserve the payload
        model = load_bundle(tiny_model_path)
        rng = np.random.default_rng(0)
        good = 0
        for _ in range(20):
            bits = (rng.integers(0, 2, 8) * 2 - 1).astype(np.float32)
            marker = model.encode(bits)
            path = tmp_path / "m.png"
            save_png(marker, path)
            scores = model.recognize(resize_center_crop(load_image(path, 1), model.s))
            good += bit_accuracy(bits, scores) == 1.0
        assert good >= 19


class TestBackgroundsAndEvalConsistency:
    def test_train_with_background_pool(self, tmp_path):
        rng = np.random.default_rng(0)
        bg_dir = tmp_path / "bgs"
        bg_dir.mkdir()
        for i in range(3):
            save_png(rng.uniform(0, 1, (3, 24, 24)).astype(np.float32),
                     bg_dir / f"bg{i}.png")
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(dict(
            n=4, marker_size=16, channels=3, recognizer="thin",
            phi=dict(affine_sigma=0.2, noise_max=0.0), batch=4,
            iterations=2, eval_interval=2, eval_samples=8, seed=1)))
        out = tmp_path / "m.nmk"
        rc = main(["train", "--config", str(cfg_path), "--backgrounds", str(bg_dir),
                   "--out", str(out)])
        assert rc == 0
        model = load_bundle(out)
        assert model.phi.backgrounds == str(bg_dir)

    def test_small_background_images_skipped(self, tmp_path, caplog):
        import logging

        from neuromark.renderer import BackgroundPool

        rng = np.random.default_rng(1)
        bg_dir = tmp_path / "bgs"
        bg_dir.mkdir()
        save_png(rng.uniform(0, 1, (3, 8, 8)).astype(np.float32), bg_dir / "small.png")
        save_png(rng.uniform(0, 1, (3, 32, 32)).astype(np.float32), bg_dir / "big.png")
        with caplog.at_level(logging.WARNING, logger="neuromark.renderer"):
            pool = BackgroundPool.from_dir(str(bg_dir), 3, 16)
        assert len(pool) == 1
        assert any("skipped" in r.message for r in caplog.records)

    def test_fresh_eval_matches_training_metrics(self, tiny_model_path):
        from neuromark.tensor import substream
        from neuromark.trainer import evaluate

        model = load_bundle(tiny_model_path)
        p, cap, _ = evaluate(model, model.phi, 512, substream(777, "fresh-eval"))
        assert abs(p - model.metrics["accuracy"]) <= 0.01

    def test_eval_with_harsher_phi_lowers_accuracy(self, tiny_model_path):
        from neuromark.renderer import phi_preset
        from neuromark.tensor import substream
        from neuromark.trainer import evaluate

        model = load_bundle(tiny_model_path)  # trained distortion-free
        p_clean, _, _ = evaluate(model, model.phi, 256, substream(5, "a"))
        harsh = phi_preset("high-blur")
        harsh.canvas = model.s
        p_harsh, _, _ = evaluate(model, harsh, 256, substream(5, "b"))
        assert p_harsh < p_clean


def test_grayscale_preset_trains_single_channel(tmp_path):
    from neuromark.presets import make_config
    from neuromark.trainer import train

    cfg = make_config("grayscale-32", iterations=1, eval_interval=1, eval_samples=8,
                      batch=4, marker_size=16, seed=1)
    assert cfg.channels == 1
    model, _ = train(cfg)
    marker = model.encode(np.sign(np.random.default_rng(0).standard_normal(32)))
    assert marker.shape == (1, 16, 16)
