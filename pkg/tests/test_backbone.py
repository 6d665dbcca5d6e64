import numpy as np
import pytest

from painterly.backbone import (
    ConfigurationError,
    ConvLayer,
    WeightBank,
    WeightFormatError,
    backward,
    conv2d,
    forward,
    forward_cached,
    load_weights,
    save_weights,
)

from util import central_diff, ref_conv2d, ref_forward, rel_err, toy_bank


def make_layer(weights, bias, name="conv1_1"):
    return ConvLayer(name, np.asarray(weights, dtype=np.float32),
                     np.asarray(bias, dtype=np.float32))


class TestConv2d:
    def test_identity_kernel(self):
        w = np.zeros((1, 1, 3, 3))
        w[0, 0, 1, 1] = 1.0
        x = np.ones((1, 3, 3), dtype=np.float32)
        out = conv2d(x, make_layer(w, [0.0]))
        np.testing.assert_array_equal(out, x)

    def test_zero_kernel_gives_bias(self):
        rng = np.random.default_rng(3)
        x = rng.random((1, 5, 4)).astype(np.float32)
        out = conv2d(x, make_layer(np.zeros((2, 1, 3, 3)), [1.5, -2.0]))
        np.testing.assert_array_equal(out[0], np.full((5, 4), 1.5, dtype=np.float32))
        np.testing.assert_array_equal(out[1], np.full((5, 4), -2.0, dtype=np.float32))

    def test_all_ones_box_sum(self):
        # zero-padded 3x3 box sum over an all-ones image: corners see 4
        # in-range taps, edges 6, the center 9
        x = np.ones((1, 3, 3), dtype=np.float32)
        layer = make_layer(np.ones((1, 1, 3, 3)), [0.0])
        out = conv2d(x, layer)[0]
        expected = ref_conv2d(x, layer.weights, layer.bias)[0]
        np.testing.assert_allclose(out, expected, atol=1e-6)
        np.testing.assert_array_equal(expected, [[4, 6, 4], [6, 9, 6], [4, 6, 4]])

    def test_channel_mismatch_raises(self):
        x = np.ones((2, 3, 3), dtype=np.float32)
        with pytest.raises(ConfigurationError):
            conv2d(x, make_layer(np.zeros((1, 1, 3, 3)), [0.0]))

    def test_random_against_reference(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=(3, 6, 7))
        layer = make_layer(rng.normal(size=(4, 3, 3, 3)), rng.normal(size=4))
        out = conv2d(x.astype(np.float64), layer, dtype=np.float64)
        ref = ref_conv2d(x, layer.weights, layer.bias)
        assert np.max(np.abs(out - ref)) < 1e-10


class TestForward:
    def test_zero_image_isolates_bias(self):
        bank = toy_bank([("conv1_1", 4)], seed=1)
        img = np.zeros((8, 8, 3), dtype=np.float32)
        stack = forward(img, bank, {"conv1_1"})
        expected = np.maximum(bank.layers[0].bias, 0.0)
        np.testing.assert_allclose(
            stack["conv1_1"], np.broadcast_to(expected[:, None, None], (4, 8, 8)),
            atol=1e-7)

    def test_empty_wanted(self):
        bank = toy_bank([("conv1_1", 4)])
        assert forward(np.zeros((8, 8, 3)), bank, set()) == {}

    def test_random_against_reference(self):
        bank = toy_bank([("conv1_1", 4), ("conv2_1", 5)], seed=7)
        rng = np.random.default_rng(7)
        img = rng.random((32, 32, 3))
        stack = forward(img, bank, {"conv1_1", "conv2_1"}, dtype=np.float64)
        ref = ref_forward(img, bank, {"conv1_1", "conv2_1"})
        for name in ("conv1_1", "conv2_1"):
            assert np.max(np.abs(stack[name] - ref[name])) < 1e-6

    def test_unknown_layer(self):
        bank = toy_bank([("conv1_1", 4)])
        with pytest.raises(ConfigurationError):
            forward(np.zeros((8, 8, 3)), bank, {"conv9_9"})

    def test_too_small_image(self):
        bank = toy_bank([("conv1_1", 4), ("conv2_1", 4), ("conv3_1", 4)])
        with pytest.raises(ConfigurationError):
            forward(np.zeros((8, 8, 3)), bank, {"conv3_1"})

    def test_determinism(self):
        bank = toy_bank([("conv1_1", 4), ("conv2_1", 5)], seed=5)
        img = np.random.default_rng(5).random((16, 16, 3))
        a = forward(img, bank, {"conv2_1"})["conv2_1"]
        b = forward(img, bank, {"conv2_1"})["conv2_1"]
        assert a.tobytes() == b.tobytes()

    def test_relu_nonnegative(self):
        bank = toy_bank([("conv1_1", 6), ("conv2_1", 6)], seed=9)
        img = np.random.default_rng(9).random((20, 20, 3))
        stack = forward(img, bank, {"conv1_1", "conv2_1"})
        for act in stack.values():
            assert (act >= 0).all()

    def test_pool_tie_breaks_to_first_row_major(self):
        from painterly.backbone import _pool_forward
        tied = np.zeros((1, 4, 4), dtype=np.float32)
        out, arg = _pool_forward(tied)
        assert np.all(arg == 0)
        ridge = np.zeros((1, 2, 4), dtype=np.float32)
        ridge[0, 1, :] = 1.0  # bottom row wins; ties include both columns
        _, arg = _pool_forward(ridge)
        assert np.all(arg == 2)  # first row-major element of the max pair

    def test_spatial_size_law_non_power_of_two(self):
        bank = toy_bank([("conv1_1", 2), ("conv2_1", 2), ("conv3_1", 2)], seed=2)
        img = np.random.default_rng(0).random((37, 23, 3))
        stack = forward(img, bank, {"conv1_1", "conv2_1", "conv3_1"})
        for name, block in (("conv1_1", 1), ("conv2_1", 2), ("conv3_1", 3)):
            h, w = stack[name].shape[1:]
            assert h == 37 // 2 ** (block - 1)
            assert w == 23 // 2 ** (block - 1)


class TestBackward:
    def test_zero_gradients(self):
        bank = toy_bank([("conv1_1", 4), ("conv2_1", 4)], seed=0)
        img = np.random.default_rng(0).random((8, 8, 3))
        stack = forward(img, bank, {"conv2_1"})
        g = backward(img, bank, {"conv2_1": np.zeros_like(stack["conv2_1"])})
        assert g.shape == img.shape
        assert np.all(g == 0)

    def test_linearity_in_gradient(self):
        bank = toy_bank([("conv1_1", 4), ("conv2_1", 4)], seed=4)
        img = np.random.default_rng(4).random((8, 8, 3))
        stack, cache = forward_cached(img, bank, {"conv2_1"}, dtype=np.float64)
        gmap = np.random.default_rng(5).normal(size=stack["conv2_1"].shape)
        g1 = backward(img, bank, {"conv2_1": gmap}, cache=cache)
        g3 = backward(img, bank, {"conv2_1": 3.0 * gmap}, cache=cache)
        np.testing.assert_allclose(g3, 3.0 * g1, rtol=1e-12)

    def test_shape_mismatch(self):
        bank = toy_bank([("conv1_1", 4)], seed=0)
        img = np.zeros((8, 8, 3))
        with pytest.raises(ConfigurationError):
            backward(img, bank, {"conv1_1": np.zeros((4, 5, 5))})

    def test_finite_differences_per_coordinate(self):
        bank = toy_bank([("conv1_1", 3), ("conv2_1", 4)], seed=21)
        rng = np.random.default_rng(21)
        img = rng.random((8, 8, 3))
        probes = {name: rng.normal(size=act.shape)
                  for name, act in forward(img, bank, {"conv1_1", "conv2_1"},
                                           dtype=np.float64).items()}

        def scalar(image):
            stack = forward(image, bank, {"conv1_1", "conv2_1"}, dtype=np.float64)
            return sum(float(np.sum(probes[n] * stack[n])) for n in probes)

        analytic = backward(img, bank, probes, dtype=np.float64)
        fd = central_diff(scalar, img, h=1e-4)
        errs = rel_err(np.array([analytic.ravel()[i] for i in fd]),
                       np.array(list(fd.values())), floor=1e-6)
        assert errs.max() < 1e-4

    def test_directional_derivative_many_seeds(self):
        for seed in range(5):
            bank = toy_bank([("conv1_1", 3), ("conv2_1", 3)], seed=seed)
            rng = np.random.default_rng(100 + seed)
            img = rng.random((10, 10, 3))
            stack = forward(img, bank, {"conv2_1"}, dtype=np.float64)
            probe = rng.normal(size=stack["conv2_1"].shape)
            v = rng.normal(size=img.shape)
            analytic = float(np.sum(backward(img, bank, {"conv2_1": probe},
                                             dtype=np.float64) * v))
            h = 1e-6

            def scalar(image):
                s = forward(image, bank, {"conv2_1"}, dtype=np.float64)
                return float(np.sum(probe * s["conv2_1"]))

            fd = (scalar(img + h * v) - scalar(img - h * v)) / (2 * h)
            assert rel_err(analytic, fd, floor=1e-8) < 1e-4


class TestWeightFile:
    def test_round_trip_bit_exact(self, tmp_path):
        bank = toy_bank([("conv1_1", 4), ("conv2_1", 6)], seed=13,
                        means=(123.68, 116.779, 103.939))
        path = tmp_path / "toy.nphw"
        save_weights(bank, path)
        loaded = load_weights(path)
        assert loaded.layer_names == bank.layer_names
        np.testing.assert_array_equal(loaded.channel_means, bank.channel_means)
        for a, b in zip(loaded.layers, bank.layers):
            assert a.weights.tobytes() == b.weights.tobytes()
            assert a.bias.tobytes() == b.bias.tobytes()

    def test_save_is_deterministic(self, tmp_path):
        bank = toy_bank([("conv1_1", 4)], seed=1)
        p1, p2 = tmp_path / "a.nphw", tmp_path / "b.nphw"
        save_weights(bank, p1)
        save_weights(bank, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic(self, tmp_path):
        bank = toy_bank([("conv1_1", 4)], seed=1)
        path = tmp_path / "toy.nphw"
        save_weights(bank, path)
        data = bytearray(path.read_bytes())
        data[:4] = b"XXXX"
        path.write_bytes(bytes(data))
        with pytest.raises(WeightFormatError, match="magic"):
            load_weights(path)

    def test_truncated_payload(self, tmp_path):
        bank = toy_bank([("conv1_1", 4)], seed=1)
        path = tmp_path / "toy.nphw"
        save_weights(bank, path)
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(WeightFormatError, match="truncated"):
            load_weights(path)

    def test_bias_length_mismatch_names_layer(self, tmp_path):
        # hand-build a file declaring out_channels=2 but kernel counts for 1
        import struct
        parts = [b"NPHW", struct.pack("<I", 1),
                 np.zeros(3, dtype="<f4").tobytes(), struct.pack("<I", 1)]
        name = b"conv1_1"
        parts += [struct.pack("<H", len(name)), name,
                  struct.pack("<IIII", 2, 3, 3, 3),
                  np.zeros(2 * 3 * 9, dtype="<f4").tobytes(),
                  np.zeros(1, dtype="<f4").tobytes()]  # bias too short
        path = tmp_path / "bad.nphw"
        path.write_bytes(b"".join(parts))
        with pytest.raises(WeightFormatError, match="conv1_1"):
            load_weights(path)

    def test_non_3x3_kernel_rejected(self, tmp_path):
        import struct
        parts = [b"NPHW", struct.pack("<I", 1),
                 np.zeros(3, dtype="<f4").tobytes(), struct.pack("<I", 1)]
        name = b"conv1_1"
        parts += [struct.pack("<H", len(name)), name,
                  struct.pack("<IIII", 1, 3, 5, 5),
                  np.zeros(1 * 3 * 25, dtype="<f4").tobytes(),
                  np.zeros(1, dtype="<f4").tobytes()]
        path = tmp_path / "bad.nphw"
        path.write_bytes(b"".join(parts))
        with pytest.raises(WeightFormatError, match="conv1_1"):
            load_weights(path)

    def test_out_of_order_names_rejected(self):
        rng = np.random.default_rng(0)
        layers = [
            ConvLayer("conv1_1", rng.normal(size=(2, 3, 3, 3)).astype(np.float32),
                      np.zeros(2, dtype=np.float32)),
            ConvLayer("conv3_1", rng.normal(size=(2, 2, 3, 3)).astype(np.float32),
                      np.zeros(2, dtype=np.float32)),
        ]
        with pytest.raises(WeightFormatError, match="conv3_1"):
            WeightBank(layers, np.zeros(3, dtype=np.float32))
