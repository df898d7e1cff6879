"""Evaluation mathematics.

Region similarity J is mask IoU. Contour accuracy F is the boundary
F-measure: one-pixel boundaries are matched within a pixel tolerance
(default: ceil of 0.8% of the image diagonal, the convention of the DAVIS
benchmark lineage). The cross-shot score jt averages, over annotated shots,
the mean of IoU at the shot's first frame and IoU at the frame where the
object first appears in the shot.

Empty-vs-empty masks score 1.0 everywhere: a correct empty prediction on a
shot without the object is a success, not a degenerate case.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .dataset import ShotAnnotation, TransitionType
from .errors import DimensionMismatch, EmptyShotList, MissingTypeLabel

_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def _as_bool(mask: np.ndarray) -> np.ndarray:
    return np.asarray(mask) > 0


def iou(pred_mask: np.ndarray, gt_mask: np.ndarray) -> float:
    """Intersection over union; 1.0 when both masks are empty."""
    pred, gt = _as_bool(pred_mask), _as_bool(gt_mask)
    if pred.shape != gt.shape:
        raise DimensionMismatch(f"pred {pred.shape} vs gt {gt.shape}")
    union = np.count_nonzero(pred | gt)
    if union == 0:
        return 1.0
    inter = np.count_nonzero(pred & gt)
    return inter / union


def default_boundary_tolerance(shape: tuple[int, int]) -> int:
    h, w = shape
    return int(np.ceil(0.008 * np.hypot(h, w)))


def mask_boundary(mask: np.ndarray) -> np.ndarray:
    """One-pixel inner boundary: foreground pixels with a background or
    out-of-canvas 4-neighbor."""
    m = _as_bool(mask)
    if not m.any():
        return np.zeros_like(m)
    eroded = ndimage.binary_erosion(m, structure=_CROSS, border_value=0)
    return m & ~eroded


def boundary_f(
    pred_mask: np.ndarray, gt_mask: np.ndarray, tolerance_px: int | None = None
) -> float:
    """Boundary F-measure with Euclidean distance matching.

    Precision is the fraction of predicted boundary pixels within
    tolerance_px of the ground-truth boundary; recall is symmetric;
    F = 2PR/(P+R) with F = 0 when P + R = 0 and 1.0 when both masks
    are empty.
    """
    pred, gt = _as_bool(pred_mask), _as_bool(gt_mask)
    if pred.shape != gt.shape:
        raise DimensionMismatch(f"pred {pred.shape} vs gt {gt.shape}")
    if tolerance_px is None:
        tolerance_px = default_boundary_tolerance(pred.shape)
    if tolerance_px < 0:
        raise ValueError("tolerance_px must be >= 0")
    if not pred.any() and not gt.any():
        return 1.0
    pred_b, gt_b = mask_boundary(pred), mask_boundary(gt)
    if pred_b.any() and gt_b.any():
        dist_to_gt = ndimage.distance_transform_edt(~gt_b)
        dist_to_pred = ndimage.distance_transform_edt(~pred_b)
        precision = float(np.mean(dist_to_gt[pred_b] <= tolerance_px))
        recall = float(np.mean(dist_to_pred[gt_b] <= tolerance_px))
    else:
        # one side has no boundary: nothing can match
        precision = 1.0 if not pred_b.any() else 0.0
        recall = 1.0 if not gt_b.any() else 0.0
        if pred_b.any() or gt_b.any():
            return 0.0
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def first_appearance(gt_track: list[np.ndarray], start: int, end: int) -> int:
    """First frame index in [start, end) with a non-empty gt mask, or `start`
    when the object never appears in the shot."""
    for t in range(start, end):
        if _as_bool(gt_track[t]).any():
            return t
    return start


def jt(
    pred_track: list[np.ndarray],
    gt_track: list[np.ndarray],
    shots: ShotAnnotation,
) -> tuple[float, list[tuple[float, float]]]:
    """Cross-shot score: per shot, mean of IoU at the shot start and IoU at
    the first-appearance frame; averaged over shots.

    Returns (jt, per-shot (iou_tr, iou_app) terms).
    """
    if shots is None or not shots.segments:
        raise EmptyShotList("no shots to evaluate")
    shots.validate_length(len(gt_track))
    if len(pred_track) != len(gt_track):
        raise DimensionMismatch(
            f"pred track {len(pred_track)} frames vs gt {len(gt_track)}"
        )
    terms = []
    for seg in shots.segments:
        iou_tr = iou(pred_track[seg.start], gt_track[seg.start])
        app = first_appearance(gt_track, seg.start, seg.end)
        iou_app = iou(pred_track[app], gt_track[app])
        terms.append((iou_tr, iou_app))
    value = float(np.mean([(a + b) / 2.0 for a, b in terms]))
    return value, terms


@dataclass(frozen=True)
class TransitionAccuracyReport:
    """Per-transition-type tallies plus the distribution-weighted mean."""

    per_type: dict[str, tuple[int, int, float]]  # type -> (n_correct, n_total, acc)
    expected_accuracy: float

    def to_json_dict(self) -> dict:
        return {
            "per_type": {
                name: {
                    "n_correct": c,
                    "n_total": n,
                    "accuracy": round(a, 6),
                }
                for name, (c, n, a) in sorted(self.per_type.items())
            },
            "expected_accuracy": round(self.expected_accuracy, 6),
        }


def _transition_correct(
    pred_track, gt_track, prev_seg, seg, context_frames: int = 2
) -> bool:
    boundary = seg.start
    before = range(max(prev_seg.start, boundary - context_frames), boundary)
    after = range(boundary, min(seg.end, boundary + context_frames))
    checked = list(before) + list(after)
    if seg.presence is TransitionType.DELAYED_CUT_IN:
        app = None
        for t in range(seg.start, seg.end):
            if _as_bool(gt_track[t]).any():
                app = t
                break
        if app is not None and app not in checked:
            checked.append(app)
    return all(iou(pred_track[t], gt_track[t]) > 0.5 for t in checked)


def transition_accuracy(
    pred_track: list[np.ndarray],
    gt_track: list[np.ndarray],
    shots: ShotAnnotation,
) -> TransitionAccuracyReport:
    """Score each transition by the protocol: IoU must exceed 0.5 on the up
    to two frames before and after the boundary (clipped at shot bounds),
    plus the first reappearance frame for delayed cut-ins. A transition
    carrying both a presence and a view type counts toward both tallies.
    """
    if shots is None or not shots.segments:
        raise EmptyShotList("no shots to evaluate")
    shots.validate_length(len(gt_track))
    tallies: dict[str, list[int]] = {}
    for prev_seg, seg in zip(shots.segments, shots.segments[1:]):
        types = seg.types
        if not types:
            raise MissingTypeLabel(
                f"segment starting at {seg.start} has no transition type"
            )
        ok = _transition_correct(pred_track, gt_track, prev_seg, seg)
        for t in types:
            correct, total = tallies.get(t.value, [0, 0])
            tallies[t.value] = [correct + int(ok), total + 1]
    per_type = {
        name: (c, n, c / n if n else 0.0) for name, (c, n) in tallies.items()
    }
    total = sum(n for _, n, _ in per_type.values())
    if total:
        expected = sum(c for c, _, _ in per_type.values()) / total
    else:
        expected = 0.0
    return TransitionAccuracyReport(per_type=per_type, expected_accuracy=expected)


def shot_detection_pr(
    detected: list[int], gt: list[int], tolerance_frames: int = 1
) -> tuple[float, float, float]:
    """Greedy nearest-first one-to-one matching within +-tolerance_frames.

    Precision is matched/len(detected) (vacuously 1.0 with no detections),
    recall matched/len(gt) (1.0 with no ground truth).
    """
    pairs = sorted(
        (abs(d - g), gi, di)
        for di, d in enumerate(detected)
        for gi, g in enumerate(gt)
        if abs(d - g) <= tolerance_frames
    )
    used_d: set[int] = set()
    used_g: set[int] = set()
    matched = 0
    for _, gi, di in pairs:
        if di in used_d or gi in used_g:
            continue
        used_d.add(di)
        used_g.add(gi)
        matched += 1
    precision = matched / len(detected) if detected else 1.0
    recall = matched / len(gt) if gt else 1.0
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


@dataclass(frozen=True)
class EvalReport:
    """Per-frame and aggregate scores for one object track."""

    per_frame_j: list[float]
    per_frame_f: list[float]
    mean_j: float
    mean_f: float
    j_and_f: float
    jt: float
    per_shot_jt_terms: list[tuple[float, float]]

    def to_json_dict(self) -> dict:
        return {
            "per_frame_j": [round(v, 6) for v in self.per_frame_j],
            "per_frame_f": [round(v, 6) for v in self.per_frame_f],
            "mean_j": round(self.mean_j, 6),
            "mean_f": round(self.mean_f, 6),
            "j_and_f": round(self.j_and_f, 6),
            "jt": round(self.jt, 6),
            "per_shot_jt_terms": [
                [round(a, 6), round(b, 6)] for a, b in self.per_shot_jt_terms
            ],
        }


def evaluate_track(
    pred_track: list[np.ndarray],
    gt_track: list[np.ndarray],
    shots: ShotAnnotation | None = None,
    boundary_tolerance: int | None = None,
) -> EvalReport:
    """Full J/F/J&F/jt report for one object track.

    Without a shot annotation the whole track is treated as a single shot.
    """
    if len(pred_track) != len(gt_track) or not gt_track:
        raise DimensionMismatch(
            f"pred track {len(pred_track)} frames vs gt {len(gt_track)}"
        )
    if shots is None:
        shots = ShotAnnotation.single_shot(len(gt_track))
    per_j = [iou(p, g) for p, g in zip(pred_track, gt_track)]
    per_f = [
        boundary_f(p, g, boundary_tolerance) for p, g in zip(pred_track, gt_track)
    ]
    mean_j, mean_f = float(np.mean(per_j)), float(np.mean(per_f))
    jt_value, terms = jt(pred_track, gt_track, shots)
    return EvalReport(
        per_frame_j=per_j,
        per_frame_f=per_f,
        mean_j=mean_j,
        mean_f=mean_f,
        j_and_f=(mean_j + mean_f) / 2.0,
        jt=jt_value,
        per_shot_jt_terms=terms,
    )
