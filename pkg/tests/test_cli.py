import hashlib
import json

import numpy as np
import pytest

from painterly.backbone import save_weights
from painterly.cli import run
from painterly.imageio import ImageIOError, load_image, load_mask, save_image


def write_fixture(tmp_path, seed=0, size=16):
    """PNG triple plus a toy weight bank, returning the common CLI args."""
    from test_harmonize import toy_fixture
    bank, composite, mask, style = toy_fixture(seed=seed, size=size)
    paths = {
        "input": tmp_path / "input.png",
        "mask": tmp_path / "mask.png",
        "style": tmp_path / "style.png",
        "weights": tmp_path / "bank.nphw",
        "out": tmp_path / "out.png",
    }
    save_image(composite, paths["input"])
    save_image(mask.astype(np.float64), paths["mask"])
    save_image(style, paths["style"])
    save_weights(bank, paths["weights"])
    argv = ["--input", str(paths["input"]), "--mask", str(paths["mask"]),
            "--style", str(paths["style"]), "--out", str(paths["out"]),
            "--weights", str(paths["weights"])]
    return paths, argv


class TestImageIO:
    def test_save_load_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        img = rng.random((9, 7, 3))
        path = tmp_path / "img.png"
        save_image(img, path)
        back = load_image(path)
        assert np.max(np.abs(back - img)) <= 1.0 / 510.0

    def test_gray_png_loads_as_rgb(self, tmp_path):
        g = np.linspace(0, 1, 64).reshape(8, 8)
        path = tmp_path / "gray.png"
        save_image(g, path)
        img = load_image(path)
        assert img.shape == (8, 8, 3)
        np.testing.assert_array_equal(img[..., 0], img[..., 1])

    def test_binary_mask_exact(self, tmp_path):
        mask = np.zeros((8, 8))
        mask[2:5, 3:7] = 1.0
        path = tmp_path / "mask.png"
        save_image(mask, path)
        loaded = load_mask(path)
        np.testing.assert_array_equal(loaded, mask != 0)

    def test_16bit_png_rejected(self, tmp_path):
        from PIL import Image
        data = (np.random.default_rng(1).random((6, 6)) * 65535).astype(np.uint16)
        path = tmp_path / "deep.png"
        Image.fromarray(data).save(path, format="PNG")
        with pytest.raises(ImageIOError, match="16-bit"):
            load_image(path)

    def test_non_png_rejected(self, tmp_path):
        from PIL import Image
        path = tmp_path / "img.jpg"
        Image.new("RGB", (8, 8)).save(path, format="JPEG")
        with pytest.raises(ImageIOError, match="PNG"):
            load_image(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ImageIOError, match="not found"):
            load_image(tmp_path / "nope.png")


class TestCliErrors:
    def test_missing_mask_flag_exits_2(self, tmp_path, capsys):
        paths, argv = write_fixture(tmp_path)
        argv = [a for a in argv if "mask" not in a and not a.endswith("mask.png")]
        code = run(argv)
        err = capsys.readouterr().err
        assert code == 2
        assert "--mask" in err

    def test_unknown_flag_exits_2(self, tmp_path):
        paths, argv = write_fixture(tmp_path)
        assert run(argv + ["--frobnicate"]) == 2

    def test_missing_input_file_exits_3(self, tmp_path):
        paths, argv = write_fixture(tmp_path)
        paths["input"].unlink()
        assert run(argv) == 3

    def test_corrupt_weights_exit_3(self, tmp_path):
        paths, argv = write_fixture(tmp_path)
        paths["weights"].write_bytes(b"JUNKJUNK")
        assert run(argv) == 3

    def test_mask_size_mismatch_exits_2(self, tmp_path):
        paths, argv = write_fixture(tmp_path)
        save_image(np.ones((4, 4)), paths["mask"])
        assert run(argv) == 2

    def test_empty_mask_exits_2(self, tmp_path):
        paths, argv = write_fixture(tmp_path)
        save_image(np.zeros((16, 16)), paths["mask"])
        assert run(argv) == 2


class TestCliPipeline:
    def test_self_style_fixed_point(self, tmp_path):
        # style == input with a full mask: postprocess off, weak weights
        from test_harmonize import toy_fixture
        bank, _, _, style = toy_fixture(seed=3, size=16)
        paths = {k: tmp_path / f"{k}.png" for k in
                 ("input", "mask", "style", "out")}
        save_image(style, paths["input"])
        save_image(np.ones((16, 16)), paths["mask"])
        save_image(style, paths["style"])
        weights = tmp_path / "bank.nphw"
        save_weights(bank, weights)
        probs = tmp_path / "probs.json"
        probs.write_text(json.dumps({"styles": {"Baroque": 1.0}}))
        code = run(["--input", str(paths["input"]), "--mask", str(paths["mask"]),
                    "--style", str(paths["style"]), "--out", str(paths["out"]),
                    "--weights", str(weights), "--style-probs", str(probs),
                    "--iters1", "60", "--iters2", "60", "--no-postprocess"])
        assert code == 0
        out = load_image(paths["out"])
        original = load_image(paths["input"])
        assert np.max(np.abs(out - original)) <= 1.0 / 255.0 + 1e-12

    def test_deterministic_output_bytes(self, tmp_path):
        paths, argv = write_fixture(tmp_path, seed=4)
        argv += ["--iters1", "6", "--iters2", "6", "--seed", "11"]
        assert run(argv) == 0
        first = paths["out"].read_bytes()
        assert run(argv) == 0
        assert paths["out"].read_bytes() == first

    def test_debug_artifacts(self, tmp_path):
        paths, argv = write_fixture(tmp_path, seed=5)
        debug = tmp_path / "debug"
        argv += ["--iters1", "4", "--iters2", "4", "--debug-dir", str(debug)]
        assert run(argv) == 0
        assert (debug / "pass1.png").exists()
        assert (debug / "pass2.png").exists()
        triples = json.loads((debug / "mapping_lref.json").read_text())
        assert triples and all(len(t) == 3 for t in triples)
        trace = (debug / "loss_trace.csv").read_text().strip().splitlines()
        assert trace[0] == "pass,iteration,content,style,hist,tv,total"
        assert len(trace) > 2

    def test_pass_selector(self, tmp_path):
        paths, argv = write_fixture(tmp_path, seed=6)
        argv += ["--iters1", "4", "--iters2", "4", "--no-postprocess"]
        assert run(argv + ["--pass", "1"]) == 0
        only1 = paths["out"].read_bytes()
        assert run(argv + ["--pass", "both"]) == 0
        both = paths["out"].read_bytes()
        assert only1 != both

    def test_style_probs_drive_weights(self, tmp_path):
        paths, argv = write_fixture(tmp_path, seed=7)
        probs = tmp_path / "probs.json"
        probs.write_text(json.dumps({"styles": {"Cubism": 1.0}}))
        argv += ["--iters1", "5", "--iters2", "5", "--style-probs", str(probs),
                 "--no-postprocess"]
        assert run(argv) == 0
        strong = paths["out"].read_bytes()
        probs.write_text(json.dumps({"styles": {"Baroque": 1.0}}))
        assert run(argv) == 0
        weak = paths["out"].read_bytes()
        assert strong != weak

    def test_size_flag_resizes_pipeline(self, tmp_path):
        from scipy.ndimage import gaussian_filter
        from util import toy_bank as make_bank
        from painterly.backbone import save_weights as save_bank
        rng = np.random.default_rng(5)
        style = np.clip(gaussian_filter(rng.random((96, 64, 3)), 1.5,
                                        mode="nearest") * 2.2, 0, 1)
        comp = style.copy()
        comp[24:72, 16:48] = np.clip(
            0.6 + 0.2 * rng.standard_normal((48, 32, 3)), 0, 1)
        mask = np.zeros((96, 64))
        mask[24:72, 16:48] = 1
        paths = {k: tmp_path / f"{k}.png" for k in ("input", "mask", "style", "out")}
        save_image(comp, paths["input"])
        save_image(mask, paths["mask"])
        save_image(style, paths["style"])
        weights = tmp_path / "bank.nphw"
        save_bank(make_bank([("conv1_1", 4), ("conv2_1", 6)], seed=5), weights)
        code = run(["--input", str(paths["input"]), "--mask", str(paths["mask"]),
                    "--style", str(paths["style"]), "--out", str(paths["out"]),
                    "--weights", str(weights), "--iters1", "4", "--iters2", "4",
                    "--size", "48", "--no-postprocess"])
        assert code == 0
        out = load_image(paths["out"])
        assert max(out.shape[:2]) == 48

    def test_unknown_style_key_exits_2(self, tmp_path):
        paths, argv = write_fixture(tmp_path, seed=8)
        probs = tmp_path / "probs.json"
        probs.write_text(json.dumps({"styles": {"Dadaism": 1.0}}))
        assert run(argv + ["--style-probs", str(probs)]) == 2


class TestGolden:
    def test_pipeline_hash_pinned(self, tmp_path):
        # fixed fixture + seed: the decoded output pixels are pinned; the
        # hash below was produced by this pipeline once and frozen
        paths, argv = write_fixture(tmp_path, seed=20, size=24)
        argv += ["--iters1", "12", "--iters2", "12", "--seed", "7"]
        assert run(argv) == 0
        from PIL import Image
        pixels = np.asarray(Image.open(paths["out"]))
        digest = hashlib.sha256(pixels.tobytes()).hexdigest()
        assert digest == GOLDEN_DIGEST


GOLDEN_DIGEST = "b3765f28743b3c8fbc6aec25d7c7ccef788dba2e0e372e82b85552501e706043"
