import math
from dataclasses import replace

import numpy as np
import pytest

from bevdet.checks import SMALL_SCENE, identity_aug_config
from bevdet.config import PipelineConfig
from bevdet.pipeline import infer, infer_sample
from bevdet.scenegen import generate_scene

CFG = PipelineConfig()
CELL = CFG.grid.cell


def scene_with(n, seed, cfg=CFG):
    return generate_scene(replace(cfg.scene, n_boxes=(n, n)), seed)


@pytest.fixture(scope="module")
def one_box():
    return scene_with(1, 3)


def test_blank_scene_has_no_detections():
    assert infer(scene_with(0, 1), CFG) == []


def test_single_box_found(one_box):
    dets = infer(one_box, CFG)
    gt = one_box.boxes[0]
    same = [d for d in dets if d.class_id == gt.class_id]
    assert same
    best = min(math.dist(d.center[:2], gt.center[:2]) for d in same)
    assert best < 2 * CELL


def test_deterministic(one_box):
    assert infer(one_box, CFG) == infer(one_box, CFG)


def test_sorted_by_score():
    dets = infer(scene_with(6, 11), CFG)
    scores = [d.score for d in dets]
    assert scores == sorted(scores, reverse=True)


@pytest.fixture(scope="module")
def small_one_box():
    return generate_scene(replace(SMALL_SCENE, n_boxes=(1, 1)), 8)


def test_identity_augmentation_is_bitwise_noop(small_one_box):
    on, off = identity_aug_config(CFG)
    a, b = infer_sample(small_one_box, on, index=2), infer_sample(small_one_box, off, index=2)
    assert np.array_equal(a.bev.data, b.bev.data)
    assert a.detections == b.detections


def test_train_mode_bda_reports_in_ego_frame(small_one_box):
    one_box = small_one_box
    cfg = replace(CFG, scene=SMALL_SCENE, mode="train", bda_enabled=True, ida_enabled=False, bda=replace(CFG.bda, scale_range=(1.0, 1.0), flip_prob=1.0))
    tr = infer_sample(one_box, cfg, index=4)
    assert tr.bda is not None and tr.bda.flip_x and abs(tr.bda.rotation) > 0
    gt = one_box.boxes[0]
    best = min(math.dist(d.center[:2], gt.center[:2]) for d in tr.detections if d.class_id == gt.class_id)
    assert best < 3 * CELL
