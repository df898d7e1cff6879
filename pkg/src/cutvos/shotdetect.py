"""Online shot-transition detection.

A scorer looks at the current frame plus a short window of previous frames
and emits a probability-like score in [0, 1]; the detector thresholds the
per-frame scores online and suppresses re-fires inside a minimum shot
length. The shipped baseline is deterministic (histogram intersection
blended with mean pixel difference); learned scorers integrate either
through the same callable contract or through a sidecar file of
precomputed per-frame scores.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import ShotAnnotation
from .errors import DimensionMismatch, EmptyWindow, OutOfRange

DEFAULT_TAU_TR = 0.5
DEFAULT_WINDOW = 2
DEFAULT_MIN_SHOT_LEN = 2
_BINS = 32


@dataclass(frozen=True)
class DetectorConfig:
    tau_tr: float = DEFAULT_TAU_TR
    min_shot_len: int = DEFAULT_MIN_SHOT_LEN

    def __post_init__(self):
        if not 0.0 <= self.tau_tr <= 1.0:
            raise OutOfRange(f"tau_tr {self.tau_tr} outside [0, 1]")
        if self.min_shot_len < 1:
            raise OutOfRange(f"min_shot_len {self.min_shot_len} must be >= 1")


def _channel_histograms(frame: np.ndarray) -> np.ndarray:
    hists = np.empty((3, _BINS), dtype=np.float64)
    n = frame.shape[0] * frame.shape[1]
    for c in range(3):
        hists[c] = np.bincount(frame[..., c].reshape(-1) >> 3, minlength=_BINS)[:_BINS]
    return hists / n


def histogram_scorer(current: np.ndarray, previous_window: list[np.ndarray]) -> float:
    """Dissimilarity of the current frame against the most recent previous
    frame: 1 - mean 32-bin histogram intersection, blended 0.5/0.5 with the
    normalized mean absolute pixel difference.
    """
    if not previous_window:
        raise EmptyWindow("scorer needs at least one previous frame")
    prev = previous_window[-1]
    if current.shape != prev.shape:
        raise DimensionMismatch(f"{current.shape} vs {prev.shape}")
    inter = np.minimum(_channel_histograms(current), _channel_histograms(prev))
    hist_term = 1.0 - float(inter.sum() / 3.0)
    pixel_term = float(
        np.mean(np.abs(current.astype(np.int16) - prev.astype(np.int16))) / 255.0
    )
    return float(np.clip(0.5 * hist_term + 0.5 * pixel_term, 0.0, 1.0))


class HistogramScorer:
    """Callable wrapper satisfying the scorer contract."""

    def __init__(self, window_size: int = DEFAULT_WINDOW):
        if window_size < 1:
            raise OutOfRange(f"window_size {window_size} must be >= 1")
        self.window_size = window_size

    def score(self, current: np.ndarray, previous: list[np.ndarray]) -> float:
        return histogram_scorer(current, previous)


class ConstantScorer:
    """Degenerate scorer for harness/routing tests."""

    def __init__(self, value: float, window_size: int = 1):
        self.value = float(value)
        self.window_size = window_size

    def score(self, current, previous) -> float:
        return self.value


def compute_scores(frames: list[np.ndarray], scorer) -> list[float]:
    """One online score per frame; frame 0 scores 0.0 (no previous frame)."""
    scores = [0.0]
    n = scorer.window_size
    for t in range(1, len(frames)):
        scores.append(float(scorer.score(frames[t], frames[max(0, t - n) : t])))
    return scores


def threshold_scores(
    scores: list[float], config: DetectorConfig = DetectorConfig()
) -> list[int]:
    """Online thresholding with earliest-wins suppression.

    Frame t >= 1 is emitted iff score[t] >= tau_tr and the previous emission
    is at least min_shot_len frames back. Frame 0 is never emitted.
    """
    out: list[int] = []
    last = None
    for t in range(1, len(scores)):
        if scores[t] >= config.tau_tr and (last is None or t - last >= config.min_shot_len):
            out.append(t)
            last = t
    return out


def detect_transitions(
    frames: list[np.ndarray], scorer, config: DetectorConfig = DetectorConfig()
) -> list[int]:
    """Score then threshold; returns a strictly increasing index list."""
    return threshold_scores(compute_scores(frames, scorer), config)


def scores_to_shots(transition_indices: list[int], n_frames: int) -> ShotAnnotation:
    """Split [0, n_frames) at each index; resulting segments carry no types."""
    prev = 0
    for idx in transition_indices:
        if not 1 <= idx < n_frames:
            raise OutOfRange(f"transition index {idx} outside [1, {n_frames})")
        if idx <= prev:
            raise OutOfRange(f"indices must be strictly increasing, got {idx} after {prev}")
        prev = idx
    return ShotAnnotation.from_boundaries(list(transition_indices), n_frames)


def scores_csv_text(scores: list[float]) -> str:
    lines = ["frame_index,score"]
    lines.extend(f"{i},{s:.6f}" for i, s in enumerate(scores))
    return "\n".join(lines) + "\n"


def write_scores_csv(path: str | Path, scores: list[float]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(scores_csv_text(scores))


def read_scores_file(path: str | Path) -> list[float]:
    """Read sidecar scores: either one float per line or a scores.csv with a
    frame_index,score header."""
    scores: list[float] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if cells[-1].strip().lower() == "score":
                continue  # header row
            scores.append(float(cells[-1]))
    return scores
