import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bevdet.encoder import ORACLE_LOGIT, BevEncoderSpec, EncoderSpec, encode_bev, encode_image
from bevdet.errors import ConfigError, InvalidInputError
from bevdet.scenegen import SceneConfig, class_color, generate_scene
from bevdet.view_transform import BevFeature, BevGrid, CameraInput, DepthBins, view_transform

BINS = DepthBins()


class TestDepthOracle:
    def test_bin_of_true_depth(self):
        depth = np.full((16, 16), 12.3, dtype=np.float32)
        img = np.zeros((16, 16, 3), dtype=np.uint8)
        fm, logits = encode_image(img, EncoderSpec("depth_oracle", channels=2), BINS, depth)
        assert int(np.argmax(logits.data[:, 0, 0])) == 11
        assert logits.data[11, 0, 0] == ORACLE_LOGIT == 40.0
        assert logits.data[10, 0, 0] == -40.0
        assert fm.data[0, 0, 0] == 1.0

    def test_nearest_surface_wins(self):
        depth = np.zeros((16, 16), dtype=np.float32)
        depth[:4] = 30.0
        depth[10, 10] = 5.2
        _, logits = encode_image(np.zeros((16, 16, 3), np.uint8), EncoderSpec("depth_oracle", channels=1), BINS, depth)
        assert int(np.argmax(logits.data[:, 0, 0])) == 4

    def test_background_has_zero_features(self):
        fm, _ = encode_image(np.zeros((32, 32, 3), np.uint8), EncoderSpec("depth_oracle", channels=3), BINS, np.zeros((32, 32), np.float32))
        assert not fm.data.any()

    def test_class_channels(self):
        img = np.zeros((16, 32, 3), np.uint8)
        img[:, :16] = class_color(2)
        depth = np.full((16, 32), 7.0, np.float32)
        fm, _ = encode_image(img, EncoderSpec("depth_oracle", channels=5), BINS, depth)
        assert fm.data[3, 0, 0] == 1.0 and fm.data[1:, 0, 1].sum() == 0.0

    def test_requires_depth(self):
        with pytest.raises(InvalidInputError):
            encode_image(np.zeros((16, 16, 3), np.uint8), EncoderSpec("depth_oracle"), BINS)

    def test_depth_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            encode_image(np.zeros((16, 16, 3), np.uint8), EncoderSpec("depth_oracle"), BINS, np.zeros((16, 32)))

    def test_indivisible_image(self):
        with pytest.raises(InvalidInputError):
            encode_image(np.zeros((20, 16, 3), np.uint8), EncoderSpec("toy_conv"), BINS)


class TestToyConv:
    @pytest.mark.parametrize("stride", [8, 16, 32])
    def test_shape(self, stride):
        img = np.random.default_rng(0).integers(0, 255, (64, 96, 3), dtype=np.uint8)
        fm, logits = encode_image(img, EncoderSpec("toy_conv", channels=5, stride=stride), BINS)
        assert fm.data.shape == (5, 64 // stride, 96 // stride)
        assert logits.data.shape == (BINS.count, 64 // stride, 96 // stride)

    def test_deterministic(self):
        img = np.random.default_rng(0).integers(0, 255, (32, 48, 3), dtype=np.uint8)
        a = encode_image(img, EncoderSpec("toy_conv", seed=3), BINS)
        b = encode_image(img, EncoderSpec("toy_conv", seed=3), BINS)
        assert np.array_equal(a[0].data, b[0].data) and np.array_equal(a[1].data, b[1].data)

    def test_seed_matters(self):
        img = np.random.default_rng(0).integers(0, 255, (32, 48, 3), dtype=np.uint8)
        assert not np.array_equal(encode_image(img, EncoderSpec("toy_conv", seed=1), BINS)[0].data, encode_image(img, EncoderSpec("toy_conv", seed=2), BINS)[0].data)

    @pytest.mark.parametrize("kw", [dict(kind="resnet"), dict(channels=0), dict(stride=4)])
    def test_invalid_spec(self, kw):
        with pytest.raises(ConfigError):
            EncoderSpec(**kw)


class TestEncodeBev:
    def test_identity(self):
        f = BevFeature(np.random.default_rng(0).random((3, 8, 8)))
        assert encode_bev(f, BevEncoderSpec("identity")).data is f.data

    def test_toy_deterministic_and_shape(self):
        f = BevFeature(np.random.default_rng(0).random((3, 8, 10)))
        a = encode_bev(f, BevEncoderSpec("toy", seed=4))
        assert a.data.shape == (3, 8, 10)
        assert np.array_equal(a.data, encode_bev(f, BevEncoderSpec("toy", seed=4)).data)

    @given(st.integers(0, 2**32 - 1), st.floats(0.01, 100.0))
    def test_toy_positive_homogeneity(self, seed, alpha):
        # ReLU layers commute with positive scaling when biases are off
        f = np.random.default_rng(seed).standard_normal((2, 6, 6))
        spec = BevEncoderSpec("toy", seed=seed % 1000, bias=False)
        a = encode_bev(BevFeature(alpha * f), spec).data
        b = alpha * encode_bev(BevFeature(f), spec).data
        np.testing.assert_allclose(a, b, rtol=1e-6, atol=1e-9 * max(1.0, alpha))

    def test_toy_linear_single_layer(self):
        f = np.random.default_rng(1).standard_normal((2, 5, 5))
        spec = BevEncoderSpec("toy", layers=1, bias=False)
        np.testing.assert_allclose(encode_bev(BevFeature(-3.0 * f), spec).data, -3.0 * encode_bev(BevFeature(f), spec).data, rtol=1e-9, atol=1e-12)


def test_oracle_mass_concentrates_on_footprints():
    cfg = SceneConfig(n_boxes=(2, 4), visibility_view=None)
    grid = BevGrid()
    scene = generate_scene(cfg, 1)
    spec = EncoderSpec("depth_oracle", channels=1)
    inputs = []
    for sc in scene.cameras:
        img, dep = sc.image[:896], sc.depth[:896]  # trim to a multiple of the stride
        fm, lg = encode_image(img, spec, BINS, dep)
        inputs.append(CameraInput(fm, lg, sc.intrinsics, sc.pose))
    mass = view_transform(inputs, grid, BINS).data[0]
    xs, ys = grid.cell_centers()
    near = np.zeros(grid.shape, bool)
    peaks = []
    for b in scene.boxes:
        reach = 0.5 * np.hypot(b.dims[0], b.dims[1]) + 2 * grid.cell + grid.cell
        near |= np.hypot(xs - b.center[0], ys - b.center[1]) <= reach
        on = np.hypot(xs - b.center[0], ys - b.center[1]) <= 0.5 * np.hypot(b.dims[0], b.dims[1]) + grid.cell
        peaks.append(mass[on].max())
    # off-bin softmax leakage is exp(-80) per point
    assert min(peaks) > 1e20 * mass[~near].max(initial=0.0)
