"""Metric tests, each frozen against an independent hand or brute-force oracle."""

from __future__ import annotations

import numpy as np
import pytest

from cutvos import metrics as mt
from cutvos.dataset import ShotAnnotation, ShotSegment, TransitionType
from cutvos.errors import DimensionMismatch, EmptyShotList, MissingTypeLabel

from .conftest import square_mask


def brute_force_iou(pred, gt):
    """Set-based IoU, independent of the numpy path."""
    p = {(r, c) for r, c in zip(*np.nonzero(np.asarray(pred) > 0))}
    g = {(r, c) for r, c in zip(*np.nonzero(np.asarray(gt) > 0))}
    if not p and not g:
        return 1.0
    return len(p & g) / len(p | g)


def brute_force_jt(pred_track, gt_track, shots):
    """Term-by-term cross-shot evaluator used as the oracle."""
    terms = []
    for seg in shots.segments:
        iou_tr = brute_force_iou(pred_track[seg.start], gt_track[seg.start])
        app = seg.start
        for t in range(seg.start, seg.end):
            if np.asarray(gt_track[t]).any():
                app = t
                break
        iou_app = brute_force_iou(pred_track[app], gt_track[app])
        terms.append((iou_tr + iou_app) / 2.0)
    return sum(terms) / len(terms)


class TestIou:
    def test_identical_masks(self):
        m = square_mask(8, 8, 1, 1, 4)
        assert mt.iou(m, m) == 1.0

    def test_both_empty_is_one(self):
        z = np.zeros((8, 8), np.uint8)
        assert mt.iou(z, z) == 1.0

    def test_partial_overlap(self):
        pred = np.zeros((8, 8), np.uint8)
        gt = np.zeros((8, 8), np.uint8)
        pred[0, 0:4] = 1  # 4 pixels
        gt[0, 2:6] = 1  # 4 pixels, overlap 2
        assert mt.iou(pred, gt) == pytest.approx(2 / 6)

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a = (rng.random((10, 10)) < 0.4).astype(np.uint8)
            b = (rng.random((10, 10)) < 0.4).astype(np.uint8)
            assert mt.iou(a, b) == mt.iou(b, a)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            mt.iou(np.zeros((4, 4)), np.zeros((4, 5)))


class TestBoundaryF:
    def test_identical_masks(self):
        m = square_mask(32, 32, 8, 8, 10)
        assert mt.boundary_f(m, m) == 1.0
        assert mt.boundary_f(m, m, tolerance_px=0) == 1.0

    def test_both_empty(self):
        z = np.zeros((16, 16), np.uint8)
        assert mt.boundary_f(z, z) == 1.0

    def test_far_boundaries_score_zero(self):
        pred = square_mask(64, 64, 2, 2, 4)
        gt = square_mask(64, 64, 50, 50, 4)
        assert mt.boundary_f(pred, gt, tolerance_px=3) == 0.0

    def test_one_pixel_shift_within_tolerance_one(self):
        gt = square_mask(32, 32, 10, 10, 8)
        pred = square_mask(32, 32, 10, 11, 8)
        # brute-force check: every boundary pixel of one mask is within
        # Euclidean distance 1 of the other's boundary
        pb = np.argwhere(mt.mask_boundary(pred))
        gb = np.argwhere(mt.mask_boundary(gt))
        for src, dst in ((pb, gb), (gb, pb)):
            for p in src:
                d = np.min(np.hypot(*(dst - p).T))
                assert d <= 1.0
        assert mt.boundary_f(pred, gt, tolerance_px=1) == 1.0

    def test_empty_pred_nonempty_gt_is_zero(self):
        assert mt.boundary_f(np.zeros((16, 16)), square_mask(16, 16, 4, 4, 5)) == 0.0

    def test_monotone_in_tolerance(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            a = (rng.random((24, 24)) < 0.3).astype(np.uint8)
            b = (rng.random((24, 24)) < 0.3).astype(np.uint8)
            scores = [mt.boundary_f(a, b, tol) for tol in (0, 1, 2, 4, 8)]
            assert all(x <= y + 1e-12 for x, y in zip(scores, scores[1:]))

    def test_symmetry(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            a = (rng.random((20, 20)) < 0.35).astype(np.uint8)
            b = (rng.random((20, 20)) < 0.35).astype(np.uint8)
            assert mt.boundary_f(a, b, 2) == pytest.approx(mt.boundary_f(b, a, 2))

    def test_default_tolerance_follows_diagonal(self):
        assert mt.default_boundary_tolerance((480, 854)) == int(
            np.ceil(0.008 * np.hypot(480, 854))
        )


class TestJt:
    def test_perfect_prediction_is_one(self):
        track = [square_mask(8, 8, 2, 2, 3) for _ in range(10)]
        shots = ShotAnnotation((ShotSegment(0, 4), ShotSegment(4, 10)))
        value, terms = mt.jt(track, track, shots)
        assert value == 1.0 and terms == [(1.0, 1.0), (1.0, 1.0)]

    def test_delayed_appearance_term(self):
        # shot 2 starts empty; object appears at frame 5 where pred gets 0.5
        t = 8
        gt = [np.zeros((8, 8), np.uint8) for _ in range(t)]
        pred = [np.zeros((8, 8), np.uint8) for _ in range(t)]
        shots = ShotAnnotation((ShotSegment(0, 3), ShotSegment(3, 8)))
        for i in range(0, 3):  # shot 1 perfect
            gt[i][2:4, 2:4] = 1
            pred[i][2:4, 2:4] = 1
        gt[5][0, 0:2] = 1  # first appearance in shot 2
        gt[6][0, 0:2] = 1
        pred[5][0, 0:4] = 1  # inter 2, union 4 -> IoU 0.5
        value, terms = mt.jt(pred, gt, shots)
        # shot 2: start empty on both sides -> iou_tr 1.0; app frame 0.5
        assert terms[0] == (1.0, 1.0)
        assert terms[1] == (1.0, 0.5)
        assert value == pytest.approx((1.0 + 0.75) / 2)

    def test_total_miss_is_zero(self):
        gt = [square_mask(8, 8, 1, 1, 3) for _ in range(4)]
        pred = [np.zeros((8, 8), np.uint8) for _ in range(4)]
        value, _ = mt.jt(pred, gt, ShotAnnotation.single_shot(4))
        assert value == 0.0

    def test_empty_shot_list(self):
        with pytest.raises(EmptyShotList):
            mt.jt([np.zeros((4, 4))], [np.zeros((4, 4))], None)

    def test_matches_brute_force_oracle_on_random_instances(self):
        rng = np.random.default_rng(42)
        for _ in range(300):
            t = int(rng.integers(1, 21))
            n_shots = int(rng.integers(1, min(t, 5) + 1))
            cuts = sorted(
                rng.choice(np.arange(1, t), size=n_shots - 1, replace=False).tolist()
            ) if n_shots > 1 else []
            shots = ShotAnnotation.from_boundaries(cuts, t)
            gt = [(rng.random((8, 8)) < rng.random() * 0.5).astype(np.uint8) for _ in range(t)]
            pred = [(rng.random((8, 8)) < rng.random() * 0.5).astype(np.uint8) for _ in range(t)]
            value, _ = mt.jt(pred, gt, shots)
            assert abs(value - brute_force_jt(pred, gt, shots)) < 1e-12


def _three_shot_tracks():
    """gt/pred pair over three shots with a delayed cut-in in shot 2."""
    t = 12
    gt = [np.zeros((12, 12), np.uint8) for _ in range(t)]
    pred = [np.zeros((12, 12), np.uint8) for _ in range(t)]
    for i in range(0, 4):  # shot 1: object present
        gt[i][2:6, 2:6] = 1
        pred[i][2:6, 2:6] = 1
    # shot 2 (4..8): delayed cut in, object visible only at frame 5, so the
    # reappearance frame is outside the next transition's context window
    gt[5][8:11, 8:11] = 1
    pred[5][8:11, 8:11] = 1
    for i in range(8, 12):  # shot 3: object present
        gt[i][0:3, 0:3] = 1
        pred[i][0:3, 0:3] = 1
    shots = ShotAnnotation((
        ShotSegment(0, 4),
        ShotSegment(4, 8, presence=TransitionType.DELAYED_CUT_IN),
        ShotSegment(8, 12, presence=TransitionType.CUT_IN, view=TransitionType.SCENE_CHANGE),
    ))
    return pred, gt, shots


class TestTransitionAccuracy:
    def test_perfect_prediction_scores_one_everywhere(self):
        pred, gt, shots = _three_shot_tracks()
        report = mt.transition_accuracy(gt, gt, shots)
        for name, (c, n, acc) in report.per_type.items():
            assert acc == 1.0, name
        assert report.expected_accuracy == 1.0
        # dual-labeled transition counts toward both types
        assert report.per_type["CutIn"][1] == 1
        assert report.per_type["SceneChange"][1] == 1

    def test_empty_prediction_fails_transition(self):
        pred, gt, shots = _three_shot_tracks()
        empty = [np.zeros_like(m) for m in gt]
        report = mt.transition_accuracy(empty, gt, shots)
        # boundary frames around shot 3 have gt foreground, IoU 0 fails
        assert report.per_type["CutIn"][0] == 0
        assert report.per_type["SceneChange"][0] == 0

    def test_delayed_cut_in_requires_reappearance_frame(self):
        pred, gt, shots = _three_shot_tracks()
        # boundary frames of shot 2 are empty in gt and pred (IoU 1 there),
        # but missing the reappearance at frame 5 must fail the transition
        bad = [m.copy() for m in pred]
        bad[5][:] = 0
        report = mt.transition_accuracy(bad, gt, shots)
        assert report.per_type["DelayedCutIn"] == (0, 1, 0.0)
        good = mt.transition_accuracy(pred, gt, shots)
        assert good.per_type["DelayedCutIn"] == (1, 1, 1.0)

    def test_missing_type_raises(self):
        pred, gt, _ = _three_shot_tracks()
        shots = ShotAnnotation((ShotSegment(0, 6), ShotSegment(6, 12)))
        with pytest.raises(MissingTypeLabel):
            mt.transition_accuracy(pred, gt, shots)

    def test_expected_accuracy_is_count_weighted(self):
        pred, gt, shots = _three_shot_tracks()
        bad = [m.copy() for m in pred]
        bad[5][:] = 0  # fail only the delayed cut-in
        report = mt.transition_accuracy(bad, gt, shots)
        # tallies: DelayedCutIn 0/1, CutIn 1/1, SceneChange 1/1
        assert report.expected_accuracy == pytest.approx(2 / 3)


class TestShotDetectionPr:
    def test_exact_match(self):
        assert mt.shot_detection_pr([3, 7], [3, 7]) == (1.0, 1.0, 1.0)

    def test_nothing_detected_with_gt(self):
        p, r, f1 = mt.shot_detection_pr([], [4])
        assert (p, r, f1) == (1.0, 0.0, 0.0)

    def test_nothing_detected_no_gt(self):
        assert mt.shot_detection_pr([], []) == (1.0, 1.0, 1.0)

    def test_greedy_matching_example(self):
        p, r, f1 = mt.shot_detection_pr([3, 9], [4], tolerance_frames=1)
        assert p == 0.5 and r == 1.0 and f1 == pytest.approx(2 / 3)

    def test_one_to_one_matching(self):
        # two detections near one gt: only one can match
        p, r, _ = mt.shot_detection_pr([4, 5], [4], tolerance_frames=1)
        assert p == 0.5 and r == 1.0


class TestEvalReport:
    def test_j_and_f_is_mean_of_means(self):
        rng = np.random.default_rng(3)
        gt = [(rng.random((16, 16)) < 0.3).astype(np.uint8) for _ in range(6)]
        pred = [(rng.random((16, 16)) < 0.3).astype(np.uint8) for _ in range(6)]
        report = mt.evaluate_track(pred, gt)
        assert report.j_and_f == (report.mean_j + report.mean_f) / 2
        assert all(0.0 <= v <= 1.0 for v in report.per_frame_j + report.per_frame_f)
        assert 0.0 <= report.jt <= 1.0

    def test_perfect_track(self):
        gt = [square_mask(16, 16, 4, 4, 6) for _ in range(5)]
        shots = ShotAnnotation((ShotSegment(0, 2), ShotSegment(2, 5)))
        report = mt.evaluate_track(gt, gt, shots)
        assert report.mean_j == report.mean_f == report.j_and_f == report.jt == 1.0
