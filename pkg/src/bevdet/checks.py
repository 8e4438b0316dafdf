"""Seeded invariant suite run by ``bevdet check``.

Each check draws one random instance from a trial seed and returns None on
success or a short failure description. Trial ``t`` of a run with root seed
``S`` uses seed ``S + t``, so a failure is replayed with ``--seed S+t --trials 1``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .augment import (
    BdaConfig,
    BdaTransform,
    IdaConfig,
    apply_bda_boxes,
    apply_bda_feature,
    apply_ida_image,
    sample_bda,
    sample_ida,
)
from .boxes import Box3D, wrap_angle
from .config import PipelineConfig
from .encoder import EncoderSpec, encode_image
from .geometry import AugTransform2D, CameraIntrinsics, Flip, Pose3D, compose_aug, pixel_to_camera, unproject_augmented
from .head import decode, encode_targets, nms_distance
from .metrics import MetricConfig, average_precision, evaluate, match_detections, nds
from .scenegen import SceneConfig, camera_rotation, generate_scene, render_camera
from .view_transform import (
    BevFeature,
    BevGrid,
    CameraInput,
    DepthBins,
    DepthLogits,
    FeatureMap,
    PointFeatureCloud,
    camera_cloud,
    splat_naive,
    splat_sorted,
    view_transform,
)

CheckFn = Callable[[np.random.Generator, PipelineConfig], Optional[str]]


@dataclass(frozen=True)
class Check:
    name: str
    module: str
    fn: CheckFn


@dataclass
class CheckResult:
    name: str
    module: str
    trials: int
    failures: list[tuple[int, str]]

    @property
    def ok(self) -> bool:
        return not self.failures


REGISTRY: list[Check] = []


def check(module: str, name: str) -> Callable[[CheckFn], CheckFn]:
    def register(fn: CheckFn) -> CheckFn:
        REGISTRY.append(Check(name, module, fn))
        return fn

    return register


def _rel_err(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(1.0, float(np.max(np.abs(b))) if np.size(b) else 1.0)
    return float(np.max(np.abs(a - b))) / scale if np.size(a) else 0.0


# -- random instances ---------------------------------------------------------------


def random_intrinsics(rng: np.random.Generator, size: tuple[int, int] = (1600, 900)) -> CameraIntrinsics:
    w, h = size
    f = rng.uniform(0.5, 2.0) * w / 2
    return CameraIntrinsics.from_params(f * rng.uniform(0.9, 1.1), f, w / 2 + rng.uniform(-30, 30), h / 2 + rng.uniform(-30, 30))


def random_box(rng: np.random.Generator, radius: float = 40.0, num_classes: int = 4) -> Box3D:
    r = math.sqrt(rng.uniform(1.0, radius**2))
    a = rng.uniform(-math.pi, math.pi)
    return Box3D(
        center=(r * math.cos(a), r * math.sin(a), rng.uniform(-2.0, 1.0)),
        dims=tuple(rng.uniform(0.3, 5.0, size=3)),
        yaw=rng.uniform(-math.pi, math.pi),
        velocity=tuple(rng.uniform(-10, 10, size=2)),
        class_id=int(rng.integers(num_classes)),
        attribute_id=int(rng.integers(3)),
        score=float(rng.uniform(0.0, 1.0)),
    )


def random_cloud(rng: np.random.Generator, n: int, grid: BevGrid, channels: int = 4, margin: float = 5.0) -> PointFeatureCloud:
    pos = np.column_stack(
        [
            rng.uniform(grid.x_min - margin, grid.x_max + margin, n),
            rng.uniform(grid.y_min - margin, grid.y_max + margin, n),
            rng.uniform(grid.z_min - 1.0, grid.z_max + 1.0, n),
        ]
    )
    return PointFeatureCloud(pos, rng.standard_normal((n, channels)), rng.uniform(0.0, 1.0, n))


# -- geometry ---------------------------------------------------------------


def augmented_unprojection_deviation(rng: np.random.Generator, n: int = 64) -> float:
    """Max relative deviation of augmented-path unprojection from the direct one."""
    K = random_intrinsics(rng)
    A = sample_ida(IdaConfig(), rng)
    p = np.column_stack([rng.uniform(0, 1600, n), rng.uniform(0, 900, n)])
    d = rng.uniform(1.0, 60.0, n)
    direct = pixel_to_camera(p, d, K)
    via_aug = unproject_augmented(A.apply(p), d, K, A)
    return float(np.max(np.abs(via_aug - direct) / np.maximum(np.linalg.norm(direct, axis=1, keepdims=True), 1e-12)))


@check("geometry", "augmented_unprojection")
def _augmented_unprojection(rng, cfg):
    dev = augmented_unprojection_deviation(rng)
    return None if dev < 1e-9 else f"augmented unprojection deviates by {dev:.3e} (relative)"


@check("geometry", "projection_roundtrip")
def _projection(rng, cfg):
    K = random_intrinsics(rng)
    p = rng.uniform(0, 1600, (32, 2))
    d = rng.uniform(0.5, 80.0, 32)
    cam = pixel_to_camera(p, d, K)
    err = max(_rel_err(K.project(cam), p), _rel_err(cam[:, 2], d))
    return None if err < 1e-9 else f"project(unproject(p, d)) off by {err:.3e}"


@check("geometry", "aug_inverse_roundtrip")
def _aug_inv(rng, cfg):
    A = sample_ida(IdaConfig(), rng)
    p = rng.uniform(-100, 1700, (32, 2))
    err = _rel_err(A.apply_inverse(A.apply(p)), p)
    return None if err < 1e-9 else f"A^-1(A p) off by {err:.3e}"


@check("geometry", "pose_roundtrip")
def _pose(rng, cfg):
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    pose = Pose3D(q, rng.uniform(-5, 5, 3))
    p = rng.uniform(-50, 50, (16, 3))
    err = _rel_err(pose.inverse().apply(pose.apply(p)), p)
    return None if err < 1e-9 else f"pose inverse round trip off by {err:.3e}"


# -- view transform ------------------------------------------------------------


@check("view_transform", "kernel_equivalence")
def _kernels(rng, cfg):
    grid = BevGrid(-8.0, 8.0, -8.0, 8.0, 0.8)
    cloud = random_cloud(rng, int(rng.integers(1, 400)), grid)
    a, b = splat_sorted(cloud, grid).data, splat_naive(cloud, grid).data
    err = float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-12))) if np.any(b) else float(np.max(np.abs(a)))
    return None if np.allclose(a, b, rtol=1e-6, atol=1e-12) else f"sorted vs naive per-cell error {err:.3e}"


@check("view_transform", "mass_conservation")
def _mass(rng, cfg):
    grid = BevGrid(-8.0, 8.0, -8.0, 8.0, 0.8)
    cloud = random_cloud(rng, int(rng.integers(1, 400)), grid, channels=1)
    cloud = replace(cloud, features=np.abs(cloud.features))
    expected = float(np.sum(cloud.weights[grid.in_range(cloud.positions)] * cloud.features[grid.in_range(cloud.positions), 0]))
    got = float(splat_sorted(cloud, grid).data.sum())
    err = abs(got - expected) / max(abs(expected), 1e-12)
    return None if err < 1e-6 else f"BEV mass {got} vs in-ROI point mass {expected}"


def flip_decoupling_error(rng: np.random.Generator, bins: DepthBins = DepthBins()) -> float:
    """Max abs difference between the BEV of a flipped image path and the unaugmented one."""
    stride = 16
    hf, wf, c = int(rng.integers(2, 8)), int(rng.integers(2, 12)), 3
    width = wf * stride
    K = random_intrinsics(rng, (width, hf * stride))
    pose = Pose3D(camera_rotation(rng.uniform(-math.pi, math.pi)), np.array([0.0, 0.0, rng.uniform(-1.0, 1.0)]))
    feats = rng.standard_normal((c, hf, wf))
    logits = rng.standard_normal((bins.count, hf, wf)) * 3
    grid = BevGrid()
    base = view_transform([CameraInput(FeatureMap(feats, stride), DepthLogits(logits), K, pose)], grid, bins)
    A = compose_aug([Flip(width)])
    flipped = CameraInput(FeatureMap(feats[:, :, ::-1].copy(), stride), DepthLogits(logits[:, :, ::-1].copy()), K, pose, A)
    aug = view_transform([flipped], grid, bins)
    return float(np.max(np.abs(aug.data - base.data)))


@check("view_transform", "flip_decoupling")
def _flip(rng, cfg):
    err = flip_decoupling_error(rng, cfg.depth)
    return None if err < 1e-6 else f"flipped-image BEV differs by {err:.3e}"


def impulse_drift_cells(
    rng: np.random.Generator, ida: IdaConfig = IdaConfig(), bins: DepthBins = DepthBins(), raster: bool = False
) -> float:
    """BEV center-of-mass shift (cells) of a small surface patch seen with and without a random IDA.

    By default the center of mass is taken over the mass the splat deposits, at
    the point positions. The patch is far smaller than a cell, so with
    `raster=True` (center of mass over cell centers) any sub-cell shift that
    crosses a cell boundary reads as a whole cell.
    """
    size = ida.source_size
    f = 600.0
    K = CameraIntrinsics.from_params(f, f, size[0] / 2, size[1] / 2)
    pose = Pose3D(camera_rotation(rng.uniform(-math.pi, math.pi)), np.zeros(3))
    depth = np.zeros(size[::-1], dtype=np.float32)
    img = np.zeros(size[::-1] + (3,), dtype=np.uint8)
    # an 8x8 px patch kept inside the region every sampled crop retains
    x0 = int(rng.uniform(0.35, 0.65) * size[0])
    y0 = int(rng.uniform(0.6, 0.8) * size[1])
    d = rng.uniform(2.0, 10.0)
    depth[y0 : y0 + 8, x0 : x0 + 8] = d
    img[y0 : y0 + 8, x0 : x0 + 8] = (32, 223, 128)
    spec = EncoderSpec("depth_oracle", channels=2, stride=16)
    grid = BevGrid()

    def com(image, dep, A):
        fm, lg = encode_image(image, spec, bins, dep)
        cam = CameraInput(fm, lg, K, pose, A)
        if raster:
            bev = view_transform([cam], grid, bins).data[0]
            xs, ys = grid.cell_centers()
            m = bev.sum()
            return np.array([(bev * xs).sum() / m, (bev * ys).sum() / m]) if m > 0 else None
        cloud = camera_cloud(cam, bins)
        inside = grid.in_range(cloud.positions)
        mass = cloud.features[inside, 0] * cloud.weights[inside]
        m = mass.sum()
        return mass @ cloud.positions[inside, :2] / m if m > 0 else None

    pad_w, pad_h = (-size[0]) % 16, (-size[1]) % 16
    base_img = np.pad(img, ((0, pad_h), (0, pad_w), (0, 0)))
    base_dep = np.pad(depth, ((0, pad_h), (0, pad_w)))
    base = com(base_img, base_dep, AugTransform2D.identity())
    A = sample_ida(ida, rng)
    aug = com(apply_ida_image(img, A, ida.crop_size), apply_ida_image(depth, A, ida.crop_size), A)
    if base is None or aug is None:
        return math.inf
    return float(np.linalg.norm(aug - base) / grid.cell)


@check("view_transform", "ida_impulse_drift")
def _drift(rng, cfg):
    drift = impulse_drift_cells(rng, IdaConfig(), cfg.depth)
    return None if drift < 1.0 else f"impulse center of mass drifted {drift:.3f} cells"


# -- augment ---------------------------------------------------------------


def bda_roundtrip_error(rng: np.random.Generator, t: Optional[BdaTransform] = None) -> float:
    b = random_box(rng)
    t = t or sample_bda(BdaConfig(), rng)
    back = apply_bda_boxes(apply_bda_boxes([b], t), t.inverse())[0]
    errs = [
        np.max(np.abs(np.subtract(back.center, b.center))),
        np.max(np.abs(np.subtract(back.dims, b.dims))),
        abs(wrap_angle(back.yaw - b.yaw)),
        np.max(np.abs(np.subtract(back.velocity, b.velocity))),
    ]
    return float(max(errs))


def bda_impulse_offset(rng: np.random.Generator, grid: BevGrid = BevGrid(), mode: str = "bilinear") -> float:
    """Cell-index distance (Chebyshev) between the argmax of a BDA-warped impulse and
    the cell holding the warped box center; inf when the warp drops the impulse."""
    t = sample_bda(BdaConfig(), rng)
    # keep the warped center inside the grid
    lim = 0.9 * grid.x_max / (t.scale * math.sqrt(2))
    b = replace(random_box(rng), center=(rng.uniform(-lim, lim), rng.uniform(-lim, lim), 0.0))
    ix, iy = grid.cell_index(np.array([b.center[:2]]))
    data = np.zeros((1,) + grid.shape)
    data[0, ix[0], iy[0]] = 1.0
    warped = apply_bda_feature(BevFeature(data), t, grid, mode).data[0]
    if not warped.any():
        return math.inf
    i, j = np.unravel_index(np.argmax(warped), warped.shape)
    moved = apply_bda_boxes([b], t)[0]
    mi, mj = grid.cell_index(np.array([moved.center[:2]]))
    return float(max(abs(i - mi[0]), abs(j - mj[0])))


@check("augment", "bda_group_roundtrip")
def _bda_rt(rng, cfg):
    err = bda_roundtrip_error(rng)
    return None if err < 1e-9 else f"BDA inverse round trip off by {err:.3e}"


@check("augment", "bda_joint_consistency")
def _bda_joint(rng, cfg):
    off = bda_impulse_offset(rng, cfg.grid)
    return None if off <= 1.0 else f"warped impulse peak {off:g} cells from the warped box center cell"


@check("augment", "bda_yaw_matches_heading")
def _bda_yaw(rng, cfg):
    t = sample_bda(BdaConfig(), rng)
    b = random_box(rng)
    heading = t.matrix @ np.array([math.cos(b.yaw), math.sin(b.yaw)])
    yaw = apply_bda_boxes([b], t)[0].yaw
    err = abs(wrap_angle(math.atan2(heading[1], heading[0]) - yaw))
    return None if err < 1e-9 else f"transformed yaw off the transformed heading by {err:.3e} rad"


@check("augment", "ida_crop_window")
def _ida_window(rng, cfg):
    ida = IdaConfig()
    A = sample_ida(ida, rng)
    if not A.crop[0] == int(A.crop[0]) or not A.crop[1] == int(A.crop[1]):
        return f"crop offset {A.crop} is not integral"
    s = A.scale
    if ida.crop_vertical_mode == "fixed" and A.crop[1] != max(0, math.floor(s * ida.source_size[1] - ida.crop_size[1] + 1e-6)):
        return f"fixed vertical crop {A.crop[1]} is not the bottom-aligned row"
    return None


# -- head ---------------------------------------------------------------


def codec_roundtrip_errors(rng: np.random.Generator, grid: BevGrid = BevGrid()) -> tuple[float, float, float]:
    """(center m, dims relative, yaw rad) errors of encode -> decode for one box."""
    b = random_box(rng, radius=48.0)
    raster = encode_targets([b], grid, 4)
    dets = decode(raster, grid, max_dets=10, score_thresh=0.5)
    if len(dets) != 1:
        return math.inf, math.inf, math.inf
    d = dets[0]
    return (
        float(np.max(np.abs(np.subtract(d.center, b.center)))),
        float(np.max(np.abs(np.subtract(d.dims, b.dims)) / np.asarray(b.dims))),
        abs(wrap_angle(d.yaw - b.yaw)),
    )


@check("head", "codec_roundtrip")
def _codec(rng, cfg):
    c, s, y = codec_roundtrip_errors(rng, cfg.grid)
    if c < cfg.grid.cell / 1000 and s < 1e-6 and y < 1e-6:
        return None
    return f"decoded box off by center {c:.3e} m, dims {s:.3e}, yaw {y:.3e}"


@check("head", "nms_idempotent")
def _nms(rng, cfg):
    dets = [random_box(rng, radius=5.0) for _ in range(int(rng.integers(0, 12)))]
    once = nms_distance(dets, 1.5)
    twice = nms_distance(once, 1.5)
    if once != twice:
        return "NMS is not idempotent"
    for a, b in itertools.combinations(once, 2):
        if a.class_id == b.class_id and math.hypot(a.center[0] - b.center[0], a.center[1] - b.center[1]) < 1.5:
            return "NMS kept two same-class detections closer than the radius"
    return None


# -- metrics ---------------------------------------------------------------


def brute_force_match(preds: Sequence[Box3D], gts: Sequence[Box3D], threshold: float) -> list[tuple[int, int]]:
    """Greedy matching re-implemented with explicit scans and no shared helpers."""
    order = sorted(range(len(preds)), key=lambda i: (-preds[i].score, preds[i].center, preds[i].dims, preds[i].yaw, preds[i].velocity, preds[i].attribute_id, i))
    used: set[int] = set()
    pairs = []
    for i in order:
        cands = []
        for j, g in enumerate(gts):
            if j in used:
                continue
            dist = math.sqrt((preds[i].center[0] - g.center[0]) ** 2 + (preds[i].center[1] - g.center[1]) ** 2)
            cands.append((dist, j))
        if cands:
            dist, j = min(cands)
            if dist < threshold:
                used.add(j)
                pairs.append((i, j))
    return pairs


def random_match_instance(rng: np.random.Generator, max_boxes: int = 6) -> tuple[list[Box3D], list[Box3D], float]:
    gts = [replace(random_box(rng, radius=4.0), class_id=0) for _ in range(int(rng.integers(0, max_boxes + 1)))]
    preds = [replace(random_box(rng, radius=4.0), class_id=0) for _ in range(int(rng.integers(0, max_boxes + 1)))]
    if preds and rng.random() < 0.5:
        # force score ties
        preds = [p.with_score(round(p.score, 1)) for p in preds]
    return preds, gts, float(rng.choice([0.5, 1.0, 2.0, 4.0]))


@check("metrics", "matcher_vs_brute_force")
def _match(rng, cfg):
    preds, gts, th = random_match_instance(rng)
    got = [(i, j) for i, j, _ in match_detections(preds, gts, th).pairs]
    want = brute_force_match(preds, gts, th)
    return None if got == want else f"greedy matcher {got} != oracle {want}"


@check("metrics", "self_evaluation_perfect")
def _self_eval(rng, cfg):
    gts = {f"s{k}": [replace(random_box(rng), score=1.0) for _ in range(int(rng.integers(1, 5)))] for k in range(3)}
    r = evaluate(gts, gts, MetricConfig())
    if abs(r.mean_ap - 1.0) > 1e-9 or abs(r.nds - 1.0) > 1e-9 or any(v != 0.0 for v in r.tp.values()):
        return f"self evaluation gave mAP {r.mean_ap}, NDS {r.nds}, TP {r.tp}"
    return None


@check("metrics", "ap_monotone_in_false_positives")
def _ap_fp(rng, cfg):
    preds, gts, th = random_match_instance(rng)
    if not gts:
        return None
    base = average_precision(match_detections(preds, gts, th))
    fp = Box3D(center=(100.0, 100.0, 0.0), dims=(1, 1, 1), score=float(rng.uniform(0, 1)))
    more = average_precision(match_detections(preds + [fp], gts, th))
    return None if more <= base + 1e-12 else f"adding a false positive raised AP {base} -> {more}"


@check("metrics", "nds_in_range")
def _nds(rng, cfg):
    m = float(rng.uniform(0, 1))
    errs = rng.uniform(0, 3, 5)
    v = nds(m, errs)
    return None if 0.0 <= v <= 1.0 else f"NDS {v} outside [0, 1]"


# -- scenegen ---------------------------------------------------------------

SMALL_SCENE = SceneConfig(
    n_cameras=4,
    fov_deg=100.0,
    image_size=(320, 176),
    n_boxes=(0, 4),
    spawn_radius=(6.0, 25.0),
    min_visible_pixels=20,
    visibility_view=None,
)


def _footprints_disjoint(boxes: Sequence[Box3D]) -> bool:
    """Separating-axis test over every pair of box footprints."""
    for a, b in itertools.combinations(boxes, 2):
        pa, pb = a.footprint(), b.footprint()
        separated = False
        for poly in (pa, pb):
            for k in range(4):
                e = poly[(k + 1) % 4] - poly[k]
                n = np.array([-e[1], e[0]])
                if (pa @ n).max() < (pb @ n).min() or (pb @ n).max() < (pa @ n).min():
                    separated = True
                    break
            if separated:
                break
        if not separated:
            return False
    return True


@check("scenegen", "footprints_disjoint")
def _disjoint(rng, cfg):
    scene = generate_scene(SMALL_SCENE, int(rng.integers(2**31)))
    return None if _footprints_disjoint(scene.boxes) else "two box footprints overlap"


def silhouette_outliers(scene, grid: BevGrid = BevGrid()) -> int:
    """Silhouette pixels whose pinhole unprojection falls outside the owner's footprint dilated by one cell."""
    bad = 0
    for sc in scene.cameras:
        _, depth, inst = render_camera(scene.boxes, sc.camera)
        rows, cols = np.nonzero(inst >= 0)
        if rows.size == 0:
            continue
        p = np.column_stack([cols + 0.5, rows + 0.5])
        ego = sc.pose.apply(pixel_to_camera(p, depth[rows, cols].astype(np.float64), sc.intrinsics))
        for n, b in enumerate(scene.boxes):
            sel = inst[rows, cols] == n
            if not sel.any():
                continue
            c, s = math.cos(b.yaw), math.sin(b.yaw)
            dx = ego[sel, 0] - b.center[0]
            dy = ego[sel, 1] - b.center[1]
            along = np.abs(c * dx + s * dy)
            across = np.abs(-s * dx + c * dy)
            bad += int(np.count_nonzero((along > b.dims[1] / 2 + grid.cell) | (across > b.dims[0] / 2 + grid.cell)))
    return bad


@check("scenegen", "silhouettes_reproject_into_boxes")
def _silhouettes(rng, cfg):
    scene = generate_scene(SMALL_SCENE, int(rng.integers(2**31)))
    bad = silhouette_outliers(scene, cfg.grid)
    return None if bad == 0 else f"{bad} silhouette pixels unproject outside their box"


@check("scenegen", "deterministic")
def _scene_det(rng, cfg):
    seed = int(rng.integers(2**31))
    a, b = generate_scene(SMALL_SCENE, seed), generate_scene(SMALL_SCENE, seed)
    same = a.boxes == b.boxes and all(np.array_equal(x.image, y.image) and np.array_equal(x.depth, y.depth) for x, y in zip(a.cameras, b.cameras))
    return None if same else "same seed produced different scenes"


# -- pipeline ---------------------------------------------------------------


def identity_aug_config(base: PipelineConfig, scene: SceneConfig = SMALL_SCENE) -> tuple[PipelineConfig, PipelineConfig]:
    """(collapsed-identity IDA+BDA replay, augmentation disabled) configs over `scene`."""
    w, h = scene.image_size
    ida = IdaConfig(flip_prob=0.0, scale_range=(1.0, 1.0), rot_range=(0.0, 0.0), crop_size=(w, h), source_size=(w, h))
    bda = BdaConfig(flip_prob=0.0, rot_range=(0.0, 0.0), scale_range=(1.0, 1.0))
    on = replace(base, scene=scene, ida=ida, ida_test=ida, ida_enabled=True, bda=bda, bda_enabled=True, mode="train")
    off = replace(on, ida_enabled=False, bda_enabled=False)
    return on, off


@check("pipeline", "identity_augmentation_bitwise")
def _identity(rng, cfg):
    from .pipeline import infer  # deferred: pipeline imports config, which this module also needs

    on, off = identity_aug_config(cfg)
    scene = generate_scene(on.scene, int(rng.integers(2**31)))
    a, b = infer(scene, on), infer(scene, off)
    return None if a == b else "collapsed-identity augmentation changed the detections"


# -- runner ---------------------------------------------------------------


def run_checks(
    cfg: PipelineConfig,
    seed: int,
    trials: int,
    names: Optional[Iterable[str]] = None,
) -> list[CheckResult]:
    """Run every registered check (or those in `names`) for `trials` seeds."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    wanted = set(names) if names is not None else None
    results = []
    for c in REGISTRY:
        if wanted is not None and c.name not in wanted:
            continue
        failures = []
        for t in range(trials):
            trial_seed = seed + t
            try:
                msg = c.fn(np.random.default_rng(trial_seed), cfg)
            except Exception as e:  # a crash is a failure of that invariant
                msg = f"raised {type(e).__name__}: {e}"
            if msg is not None:
                failures.append((trial_seed, msg))
        results.append(CheckResult(c.name, c.module, trials, failures))
    return results
