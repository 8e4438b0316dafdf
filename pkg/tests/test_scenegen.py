import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bevdet.boxes import Box3D
from bevdet.checks import SMALL_SCENE, _footprints_disjoint, silhouette_outliers
from bevdet.errors import ConfigError, GenerationError
from bevdet.scenegen import (
    SceneConfig,
    class_color,
    decode_class_shading,
    generate_scene,
    make_rig,
    render_camera,
)


class TestRig:
    def test_single_camera_forward(self):
        (cam,) = make_rig(1, math.radians(70), (1600, 900))
        np.testing.assert_allclose(cam.pose.rotation[:, 2], (1, 0, 0), atol=1e-15)

    def test_six_cameras_spacing(self):
        rig = make_rig(6, math.radians(70), (1600, 900))
        yaws = [math.atan2(c.pose.rotation[1, 2], c.pose.rotation[0, 2]) for c in rig]
        gaps = np.diff(np.unwrap(yaws))
        np.testing.assert_allclose(gaps, math.radians(60), atol=1e-12)

    def test_forward_axis_hits_principal_point(self):
        for cam in make_rig(6, math.radians(70), (1600, 900)):
            fwd = cam.pose.rotation[:, 2] * 10.0
            p_cam = cam.pose.inverse().apply(fwd[None])
            np.testing.assert_allclose(cam.intrinsics.project(p_cam)[0], (800, 450), atol=1e-9)

    def test_focal_from_fov(self):
        (cam,) = make_rig(1, math.radians(90), (200, 100))
        assert cam.intrinsics.fx == pytest.approx(100.0)

    def test_no_cameras(self):
        with pytest.raises(ConfigError):
            make_rig(0, 1.0, (10, 10))


class TestRender:
    def test_box_ahead_depth(self):
        (cam,) = make_rig(1, math.radians(70), (1600, 900))
        b = Box3D(center=(10.5, 0.0, 0.0), dims=(2.0, 1.0, 2.0))  # near face at x = 10
        img, depth, inst = render_camera([b], cam)
        assert depth[450, 800] == pytest.approx(10.0, abs=1e-4)
        assert tuple(img[450, 800]) == class_color(0)
        assert inst[450, 800] == 0 and inst[0, 0] == -1 and depth[0, 0] == 0

    def test_nearer_box_occludes(self):
        (cam,) = make_rig(1, math.radians(70), (320, 180))
        near = Box3D(center=(8.5, 0.0, 0.0), dims=(2.0, 1.0, 2.0), class_id=1)
        far = Box3D(center=(20.0, 0.0, 0.0), dims=(4.0, 4.0, 4.0), class_id=0)
        _, depth, inst = render_camera([far, near], cam)
        assert inst[90, 160] == 1 and depth[90, 160] == pytest.approx(8.0, abs=1e-4)

    def test_shading_roundtrip(self):
        rgb = np.array([class_color(k) for k in range(7)] + [(0, 0, 0), (1, 2, 3)])
        np.testing.assert_array_equal(decode_class_shading(rgb), list(range(7)) + [-1, -1])


class TestGenerate:
    def test_zero_boxes(self):
        s = generate_scene(SceneConfig(n_boxes=(0, 0)), 3)
        assert s.boxes == [] and len(s.cameras) == 6
        assert all(not c.image.any() and not c.depth.any() for c in s.cameras)

    def test_deterministic(self):
        a, b = generate_scene(SMALL_SCENE, 9), generate_scene(SMALL_SCENE, 9)
        assert a.boxes == b.boxes
        assert all(np.array_equal(x.image, y.image) and np.array_equal(x.depth, y.depth) for x, y in zip(a.cameras, b.cameras))

    def test_sample_id(self):
        assert generate_scene(SMALL_SCENE, 2, sample_id="abc").sample_id == "abc"

    def test_infeasible(self):
        cfg = SceneConfig(n_boxes=(40, 40), spawn_radius=(6.0, 8.0), max_retries=3, visibility_view=None)
        with pytest.raises(GenerationError):
            generate_scene(cfg, 0)

    @pytest.mark.parametrize(
        "kw",
        [dict(n_boxes=(3, 1)), dict(spawn_radius=(10, 5)), dict(fov_deg=180), dict(n_cameras=0), dict(min_visible_fraction=2.0), dict(classes=())],
    )
    def test_invalid_config(self, kw):
        with pytest.raises(ConfigError):
            SceneConfig(**kw)

    @settings(max_examples=15)
    @given(st.integers(0, 2**31 - 1))
    def test_invariants(self, seed):
        s = generate_scene(SMALL_SCENE, seed)
        lo, hi = SMALL_SCENE.spawn_radius
        assert _footprints_disjoint(s.boxes)
        for b in s.boxes:
            assert lo * 0.5 <= math.hypot(*b.center[:2]) <= hi
            assert b.center[2] - b.dims[2] / 2 == pytest.approx(SMALL_SCENE.ground_z)
        for c in s.cameras:
            assert np.all(c.depth[decode_class_shading(c.image) >= 0] > 0)
            assert np.all(c.depth[decode_class_shading(c.image) < 0] == 0)
        assert all(v >= SMALL_SCENE.min_visible_pixels for v in s.visible_pixels)
        assert silhouette_outliers(s) == 0

    def test_default_scene_visibility(self):
        s = generate_scene(SceneConfig(), 4)
        assert 1 <= len(s.boxes) <= 8
        assert all(v >= 300 for v in s.visible_pixels)
        assert silhouette_outliers(s) == 0
