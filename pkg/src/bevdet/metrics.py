"""nuScenes-style detection metrics: center-distance matching, AP, TP errors, NDS."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from .boxes import Box3D
from .errors import ConfigError, InvalidParameterError

TP_METRICS = ("trans_err", "scale_err", "orient_err", "vel_err", "attr_err")
TP_LABELS = {"trans_err": "mATE", "scale_err": "mASE", "orient_err": "mAOE", "vel_err": "mAVE", "attr_err": "mAAE"}
RECALL_SAMPLES = 101


@dataclass(frozen=True)
class MetricConfig:
    dist_thresholds: tuple[float, ...] = (0.5, 1.0, 2.0, 4.0)
    tp_threshold: float = 2.0
    min_recall: float = 0.1
    min_precision: float = 0.1
    # class ids whose orientation is ambiguous by pi (e.g. barriers); empty keeps the 2*pi period everywhere
    orientation_period_pi: tuple[int, ...] = ()
    # class ids without velocity / attribute annotations; their AVE / AAE are left out of the means
    skip_velocity: tuple[int, ...] = ()
    skip_attribute: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        th = tuple(float(t) for t in self.dist_thresholds)
        if not th or any(t <= 0 for t in th) or list(th) != sorted(th):
            raise ConfigError(f"distance thresholds must be positive and ascending, got {th}")
        if self.tp_threshold <= 0:
            raise ConfigError("tp_threshold must be positive")
        if not (0 <= self.min_recall < 1 and 0 <= self.min_precision < 1):
            raise ConfigError("min_recall and min_precision must be in [0, 1)")
        object.__setattr__(self, "dist_thresholds", th)


@dataclass
class MatchResult:
    """Outcome of greedy matching for one class and threshold.

    ``pairs`` holds (pred index, gt index, center distance) in processing
    order; ``order`` is the processing order of all predictions and
    ``is_tp`` the matching flag of each processed prediction.
    """

    pairs: list[tuple[int, int, float]]
    unmatched_preds: list[int]
    unmatched_gts: list[int]
    order: list[int]
    is_tp: list[bool]
    num_gts: int


def center_distance(a: Box3D, b: Box3D) -> float:
    return math.hypot(a.center[0] - b.center[0], a.center[1] - b.center[1])


def _pred_sort_key(i: int, b: Box3D, sample: Any) -> tuple:
    # Ties in score fall back to box content, so permuting equal-score inputs
    # does not change the processing order.
    return (-b.score, str(sample), b.center, b.dims, b.yaw, b.velocity, b.attribute_id, i)


def match_detections(
    preds: Sequence[Box3D],
    gts: Sequence[Box3D],
    threshold: float,
    pred_samples: Optional[Sequence[Any]] = None,
    gt_samples: Optional[Sequence[Any]] = None,
) -> MatchResult:
    """Greedy matching in descending score order.

    Each prediction takes the nearest unmatched ground truth of its own
    sample whose center distance is below ``threshold``; equal distances go to
    the lower ground-truth index. Callers pass single-class pools.
    """
    pred_samples = list(pred_samples) if pred_samples is not None else [None] * len(preds)
    gt_samples = list(gt_samples) if gt_samples is not None else [None] * len(gts)
    if len(pred_samples) != len(preds) or len(gt_samples) != len(gts):
        raise InvalidParameterError("sample id lists must match the box lists")
    by_sample: dict[Any, list[int]] = {}
    for j, s in enumerate(gt_samples):
        by_sample.setdefault(s, []).append(j)
    taken = [False] * len(gts)
    order = sorted(range(len(preds)), key=lambda i: _pred_sort_key(i, preds[i], pred_samples[i]))
    pairs, unmatched, is_tp = [], [], []
    for i in order:
        p = preds[i]
        best_j, best_d = -1, math.inf
        for j in by_sample.get(pred_samples[i], ()):
            if taken[j]:
                continue
            d = center_distance(p, gts[j])
            if d < best_d:
                best_j, best_d = j, d
        if best_j >= 0 and best_d < threshold:
            taken[best_j] = True
            pairs.append((i, best_j, best_d))
            is_tp.append(True)
        else:
            unmatched.append(i)
            is_tp.append(False)
    return MatchResult(
        pairs=pairs,
        unmatched_preds=unmatched,
        unmatched_gts=[j for j in range(len(gts)) if not taken[j]],
        order=order,
        is_tp=is_tp,
        num_gts=len(gts),
    )


def precision_recall(is_tp: Sequence[bool], num_gts: int) -> tuple[np.ndarray, np.ndarray]:
    tp = np.cumsum(np.asarray(is_tp, dtype=np.float64))
    fp = np.cumsum(1.0 - np.asarray(is_tp, dtype=np.float64))
    if tp.size == 0:
        return np.zeros(0), np.zeros(0)
    return tp / (tp + fp), tp / num_gts


def interpolated_precision(is_tp: Sequence[bool], num_gts: int) -> np.ndarray:
    """Precision at recall levels 0, 0.01, ..., 1 (step rule).

    Each recall level takes the precision of the first operating point whose
    recall reaches it; levels never reached get precision 0.
    """
    levels = np.linspace(0.0, 1.0, RECALL_SAMPLES)
    prec, rec = precision_recall(is_tp, num_gts)
    out = np.zeros(RECALL_SAMPLES)
    if rec.size == 0:
        return out
    # tolerate rounding in k/num_gts against the level grid
    idx = np.searchsorted(rec, levels - 1e-12, side="left")
    ok = idx < rec.size
    out[ok] = prec[idx[ok]]
    return out


def average_precision(match: MatchResult, min_recall: float = 0.1, min_precision: float = 0.1) -> float:
    """Clipped, normalized area under the precision-recall curve.

    Recall levels at or below ``min_recall`` are dropped, ``min_precision`` is
    subtracted (floored at zero) and the mean is rescaled so a perfect
    detector scores 1.
    """
    if match.num_gts == 0:
        raise InvalidParameterError("AP is undefined for a class without ground truth")
    prec = interpolated_precision(match.is_tp, match.num_gts)
    prec = prec[round(100 * min_recall) + 1 :] - min_precision
    prec[prec < 0] = 0.0
    # clip the rounding excess of a perfect curve
    return min(1.0, float(np.mean(prec)) / (1.0 - min_precision))


def yaw_difference(a: float, b: float, period: float = 2 * math.pi) -> float:
    """Smallest absolute angle between two yaws, in [0, period/2]."""
    d = math.fmod(a - b, period)
    d = abs(d)
    return min(d, period - d)


def scale_iou(pred: Box3D, gt: Box3D) -> float:
    """IoU of the two boxes after aligning centers and orientation."""
    return float(np.prod([min(p, g) / max(p, g) for p, g in zip(pred.dims, gt.dims)]))


@dataclass
class TpErrors:
    trans_err: float
    scale_err: float
    orient_err: float
    vel_err: float
    attr_err: float
    empty: bool = False

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.trans_err, self.scale_err, self.orient_err, self.vel_err, self.attr_err)


def tp_errors(
    pairs: Sequence[tuple[Box3D, Box3D]],
    orientation_period: float = 2 * math.pi,
) -> TpErrors:
    """Mean true-positive errors over (prediction, ground truth) pairs.

    An empty pair list yields the worst value 1.0 for every error with
    ``empty=True``.
    """
    if not pairs:
        return TpErrors(1.0, 1.0, 1.0, 1.0, 1.0, empty=True)
    ate = np.mean([center_distance(p, g) for p, g in pairs])
    ase = np.mean([1.0 - scale_iou(p, g) for p, g in pairs])
    aoe = np.mean([yaw_difference(p.yaw, g.yaw, orientation_period) for p, g in pairs])
    ave = np.mean([math.hypot(p.velocity[0] - g.velocity[0], p.velocity[1] - g.velocity[1]) for p, g in pairs])
    aae = 1.0 - np.mean([float(p.attribute_id == g.attribute_id) for p, g in pairs])
    return TpErrors(float(ate), float(ase), float(aoe), float(ave), float(aae))


def nds(mean_ap: float, errors: Sequence[float]) -> float:
    """Composite score: (5 mAP + sum(1 - min(1, err))) / 10."""
    errors = list(errors)
    if len(errors) != 5:
        raise InvalidParameterError(f"NDS needs five TP errors, got {len(errors)}")
    if not 0.0 <= mean_ap <= 1.0 or any(e < 0 for e in errors):
        raise InvalidParameterError("mAP must be in [0, 1] and errors non-negative")
    return (5.0 * mean_ap + sum(1.0 - min(1.0, e) for e in errors)) / 10.0


@dataclass
class EvalResult:
    class_ap: dict[int, dict[float, float]] = field(default_factory=dict)
    class_tp: dict[int, TpErrors] = field(default_factory=dict)
    mean_ap: float = 0.0
    tp: dict[str, float] = field(default_factory=dict)
    nds: float = 0.0
    absent_classes: list[int] = field(default_factory=list)

    def to_dict(self, class_names: Optional[Mapping[int, str]] = None) -> dict[str, Any]:
        def name(c: int) -> str:
            return class_names.get(c, str(c)) if class_names else str(c)

        return {
            "mAP": self.mean_ap,
            "NDS": self.nds,
            **{TP_LABELS[k]: v for k, v in self.tp.items()},
            "per_class": {
                name(c): {
                    "AP": {f"{t:g}": ap for t, ap in self.class_ap[c].items()},
                    **{k: getattr(self.class_tp[c], k) for k in TP_METRICS},
                    "tp_empty": self.class_tp[c].empty,
                }
                for c in sorted(self.class_ap)
            },
            "absent_classes": [name(c) for c in self.absent_classes],
        }


def evaluate(
    preds: Mapping[str, Sequence[Box3D]],
    gts: Mapping[str, Sequence[Box3D]],
    cfg: MetricConfig = MetricConfig(),
    classes: Optional[Sequence[int]] = None,
) -> EvalResult:
    """Evaluate per-sample predictions against per-sample ground truth.

    Classes without ground truth are reported in ``absent_classes`` and left
    out of every mean.
    """
    if classes is None:
        classes = sorted({b.class_id for boxes in gts.values() for b in boxes} | {b.class_id for boxes in preds.values() for b in boxes})
    result = EvalResult()
    for c in classes:
        gt_boxes, gt_ids, pr_boxes, pr_ids = [], [], [], []
        for sid in sorted(gts):
            for b in gts[sid]:
                if b.class_id == c:
                    gt_boxes.append(b)
                    gt_ids.append(sid)
        for sid in sorted(preds):
            for b in preds[sid]:
                if b.class_id == c:
                    pr_boxes.append(b)
                    pr_ids.append(sid)
        if not gt_boxes:
            result.absent_classes.append(c)
            continue
        result.class_ap[c] = {}
        for th in cfg.dist_thresholds:
            m = match_detections(pr_boxes, gt_boxes, th, pr_ids, gt_ids)
            result.class_ap[c][th] = average_precision(m, cfg.min_recall, cfg.min_precision)
        m = match_detections(pr_boxes, gt_boxes, cfg.tp_threshold, pr_ids, gt_ids)
        period = math.pi if c in cfg.orientation_period_pi else 2 * math.pi
        result.class_tp[c] = tp_errors([(pr_boxes[i], gt_boxes[j]) for i, j, _ in m.pairs], period)
    evaluated = sorted(result.class_ap)
    if evaluated:
        result.mean_ap = float(np.mean([np.mean(list(result.class_ap[c].values())) for c in evaluated]))
        for k in TP_METRICS:
            skip = cfg.skip_velocity if k == "vel_err" else cfg.skip_attribute if k == "attr_err" else ()
            vals = [getattr(result.class_tp[c], k) for c in evaluated if c not in skip]
            result.tp[k] = float(np.mean(vals)) if vals else 1.0
    else:
        result.tp = {k: 1.0 for k in TP_METRICS}
    result.nds = nds(result.mean_ap, [result.tp[k] for k in TP_METRICS])
    return result
