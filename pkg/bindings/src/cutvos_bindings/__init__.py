"""In-process bindings over contiguous uint8 buffers.

Exports the pure, deterministic toolkit entry points for training pipelines
and notebooks: `apply_tma`, `evaluate`, `detect_transitions`, and
`mst_partition`. Inputs are borrowed, never copied: conforming arrays pass
straight through to the core (per-frame views share the caller's memory)
and non-conforming ones raise `ShapeError` before any native call. Config
mappings mirror the toolkit's config file schema, flat dotted keys or
nested, and unknown keys raise `ConfigKeyError`.

Results are bit-identical to the toolkit CLI given the same seed and
fixtures; the stateful tracker harness stays CLI-only.
"""

from __future__ import annotations

import numpy as np

from cutvos import dataset as _ds
from cutvos import localcues as _lc
from cutvos import metrics as _mt
from cutvos import shotdetect as _sd
from cutvos import tma as _tma
from cutvos.errors import ConfigKeyError as _CoreConfigKeyError
from cutvos.errors import EmptyShotList as _EmptyShotList
from cutvos.imgops import spawn_rng as _spawn_rng

__version__ = "0.1.0"  # lockstep with the cutvos core

__all__ = [
    "ShapeError",
    "ConfigKeyError",
    "apply_tma",
    "evaluate",
    "detect_transitions",
    "mst_partition",
]


class ShapeError(ValueError):
    """Buffer does not satisfy the dtype/shape/contiguity contract."""


class ConfigKeyError(KeyError):
    """Config mapping holds an unknown or invalid key."""


def _require_buffer(arr, ndim: int, name: str, dtype=np.uint8) -> np.ndarray:
    if not isinstance(arr, np.ndarray):
        raise ShapeError(f"{name} must be a numpy array, got {type(arr).__name__}")
    if arr.dtype != np.dtype(dtype):
        raise ShapeError(f"{name} must be {np.dtype(dtype)}, got {arr.dtype}")
    if arr.ndim != ndim:
        raise ShapeError(f"{name} must have {ndim} dims, got shape {arr.shape}")
    if not arr.flags["C_CONTIGUOUS"]:
        raise ShapeError(f"{name} must be C-contiguous (no hidden copies are made)")
    return arr


def _frame_list(frames: np.ndarray, name: str) -> list[np.ndarray]:
    # per-frame views borrowing the caller's memory
    return [frames[i] for i in range(frames.shape[0])]


def _track_pair(frames, masks, name: str) -> tuple[list[np.ndarray], list[np.ndarray]]:
    frames = _require_buffer(frames, 4, f"{name} frames")
    masks = _require_buffer(masks, 3, f"{name} masks")
    if frames.shape[3] != 3:
        raise ShapeError(f"{name} frames must be T x H x W x 3, got {frames.shape}")
    if frames.shape[:3] != masks.shape:
        raise ShapeError(
            f"{name} frames {frames.shape} and masks {masks.shape} disagree"
        )
    return _frame_list(frames, name), _frame_list(masks, name)


def _single_label(masks: list[np.ndarray], name: str) -> int:
    top = max(int(m.max(initial=0)) for m in masks)
    if top == 0:
        return 1
    for m in masks:
        if not np.logical_or(m == 0, m == top).all():
            raise ShapeError(f"{name} masks must carry a single object label")
    return top


def _config(config) -> _tma.TmaConfig:
    try:
        cfg, _ = _tma.config_from_mapping(dict(config or {}))
    except _CoreConfigKeyError as exc:
        raise ConfigKeyError(str(exc)) from None
    return cfg


def _sample_from(frames, masks, video_id: str, object_id: int) -> _ds.FrameSequenceSample:
    return _ds.FrameSequenceSample(
        video_id=video_id, frames=frames, masks=masks, object_id=object_id
    )


def apply_tma(
    frames: np.ndarray,
    masks: np.ndarray,
    donors=(),
    config=None,
    seed: int = 0,
    *,
    timeline: tuple[np.ndarray, np.ndarray] | None = None,
    timeline_start: int = 0,
    sample_index: int = 0,
    video_id: str = "buffer",
    donor_ids=None,
):
    """Augment one clip; returns (frames, masks, label_indices, provenance).

    `frames` is T x H x W x 3 uint8, `masks` T x H x W uint8 with a single
    object label. `donors` is a sequence of foreign frame stacks (their
    masks are empty by construction); `timeline` is the optional
    (frames, masks) pair of the full source video for same-video cuts, with
    `timeline_start` the clip's offset inside it. `video_id`/`donor_ids`
    only name the provenance entries. The per-sample generator is derived
    from (seed, sample_index) exactly as the CLI derives it, so equal seeds
    give bit-identical outputs across both surfaces.
    """
    frame_list, mask_list = _track_pair(frames, masks, "input")
    object_id = _single_label(mask_list, "input")
    sample = _sample_from(frame_list, mask_list, video_id, object_id)
    donor_samples = []
    for di, donor in enumerate(donors):
        donor = _require_buffer(donor, 4, f"donor[{di}]")
        if donor.shape[3] != 3:
            raise ShapeError(f"donor[{di}] must be T x H x W x 3, got {donor.shape}")
        h, w = donor.shape[1:3]
        donor_samples.append(
            _sample_from(
                _frame_list(donor, "donor"),
                [np.zeros((h, w), np.uint8) for _ in range(donor.shape[0])],
                donor_ids[di] if donor_ids else f"donor{di}", 1,
            )
        )
    timeline_sample = None
    if timeline is not None:
        t_frames, t_masks = _track_pair(timeline[0], timeline[1], "timeline")
        timeline_sample = _sample_from(t_frames, t_masks, video_id, object_id)
    pool = _tma.DonorPool(
        donors=donor_samples, timeline=timeline_sample, current_start=timeline_start
    )
    outcome = _tma.apply_tma(
        sample, pool, _config(config), _spawn_rng(seed, sample_index)
    )
    return (
        np.stack(outcome.sample.frames, axis=0),
        np.stack(outcome.sample.masks, axis=0),
        outcome.label_indices(),
        outcome.provenance,
    )


def evaluate(
    pred: np.ndarray, gt: np.ndarray, shots, boundary_tolerance: int | None = None
) -> dict:
    """Full track report (J, F, J&F, jt) as the eval_report per-object mapping.

    `pred` and `gt` are T x H x W uint8 stacks; `shots` is the shot list in
    the annotation file schema: [{"start", "end", "presence", "view"}, ...].
    """
    pred = _require_buffer(pred, 3, "pred")
    gt = _require_buffer(gt, 3, "gt")
    if pred.shape != gt.shape:
        raise ShapeError(f"pred {pred.shape} vs gt {gt.shape}")
    annotation = None
    if shots is not None:
        shots = list(shots)
        if not shots:
            raise _EmptyShotList("shots list is empty")
        annotation = _ds.ShotAnnotation.from_json_obj(shots)
    report = _mt.evaluate_track(
        _frame_list(pred, "pred"), _frame_list(gt, "gt"), annotation,
        boundary_tolerance,
    )
    return report.to_json_dict()


def detect_transitions(
    frames: np.ndarray,
    tau: float = _sd.DEFAULT_TAU_TR,
    window: int = _sd.DEFAULT_WINDOW,
    min_shot_len: int = _sd.DEFAULT_MIN_SHOT_LEN,
    scores=None,
) -> list[int]:
    """Online transition indices for a T x H x W x 3 stack.

    With `scores` given (one float per frame), thresholding runs on them
    instead of the histogram baseline.
    """
    config = _sd.DetectorConfig(tau_tr=tau, min_shot_len=min_shot_len)
    if scores is not None:
        return _sd.threshold_scores([float(s) for s in scores], config)
    frames = _require_buffer(frames, 4, "frames")
    return _sd.detect_transitions(
        _frame_list(frames, "frames"), _sd.HistogramScorer(window), config
    )


def mst_partition(features: np.ndarray, mask: np.ndarray, k: int):
    """Partition a masked feature grid; returns (labels, centers).

    `features` is h x w x c float32, `mask` h x w (uint8 or bool). Labels
    are 0 outside the mask and 1..k inside; centers are per-region poles of
    inaccessibility in grid coordinates.
    """
    features = _require_buffer(features, 3, "features", dtype=np.float32)
    if not isinstance(mask, np.ndarray) or mask.ndim != 2:
        raise ShapeError(f"mask must be a 2-d array, got {getattr(mask, 'shape', None)}")
    if mask.shape != features.shape[:2]:
        raise ShapeError(f"mask {mask.shape} does not match features {features.shape}")
    grid = _lc.FeatureGrid(values=features, scale=1.0)
    nodes, edges = _lc.build_mask_graph(grid, mask > 0)
    part = _lc.mst_partition(nodes, edges, k, mask.shape)
    return part.labels, part.centers
