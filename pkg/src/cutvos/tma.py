"""Transition-mimicking augmentation of single-shot clips.

Given a T-frame (frame, mask) clip, the engine either keeps the clip
untouched (probability 1 - p_trans) or injects one or two synthetic shot
transitions into a fixed edit window:

    single transition:    window [T//2, T)
    multiple transitions: window [T//3, T//3*2 + 1)

Inside the window, one of two edits happens. With probability p_cut the
window is replaced by donor footage: a distant segment of the same video
(probability p_same, favoring temporally far offsets), or a foreign video
whose masks become empty (the object leaves the clip). When a foreign cut
fires copy mode (probability p_copy), the original object is composited on
top of the donor background with a translation that decays linearly to zero
over the window, so the object slides toward its true position while the
background has changed. Without a cut, each window frame gets its own
strong affine, which changes the apparent viewpoint. Finally the window may
be mirrored (probability p_hflip).

Every random draw follows this fixed order, so a seeded run can be audited
draw by draw against the provenance log:

    1. transition gate          rng.random() > p_trans
    2. single vs multiple       rng.random() < p_once
    3. cut vs strong affine     rng.random() < p_cut
    if cut:
        4. same vs foreign      rng.random() < p_same
        5. copy mode            rng.random() < p_copy
        6. donor draws          same video: window length then offset;
                                foreign: donor index, then window offset
                                when the donor is longer than needed
        7. moderate affine      rotation, scale, dx, dy, shear
        8. copy translation     base dx, dy in (-1, 1)  [copy mode only]
    else:
        per frame in window:    strong affine (rotation, scale, dx, dy, shear)
    9. mirror gate              rng.random() < p_hflip

The outcome records per-frame transition labels (true = first frame of a
new synthetic shot) plus a provenance log whose first entry summarizes all
control draws and whose remaining entries list the applied operations in
order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dataset import FrameSequenceSample
from .errors import (
    ConfigKeyError,
    DonorUnavailable,
    IncompatibleDonorSize,
    TimelineTooShort,
)
from .imgops import (
    MODERATE_AFFINE,
    STRONG_AFFINE,
    AffineParams,
    AffineRanges,
    affine_transform,
    copy_foreground,
    gradual_translation,
    hflip,
    resize_pair,
)

# Balanced default probabilities: transitions fire often enough to matter
# without drowning the untouched clips.
DEFAULT_PROBS = {
    "p_trans": 0.60,
    "p_once": 0.60,
    "p_cut": 0.70,
    "p_same": 0.40,
    "p_copy": 0.75,
    "p_hflip": 0.55,
}
DEFAULT_CLIP_LENGTH = 8


@dataclass(frozen=True)
class TmaConfig:
    p_trans: float = DEFAULT_PROBS["p_trans"]
    p_once: float = DEFAULT_PROBS["p_once"]
    p_cut: float = DEFAULT_PROBS["p_cut"]
    p_same: float = DEFAULT_PROBS["p_same"]
    p_copy: float = DEFAULT_PROBS["p_copy"]
    p_hflip: float = DEFAULT_PROBS["p_hflip"]
    clip_length: int = DEFAULT_CLIP_LENGTH
    moderate: AffineRanges = MODERATE_AFFINE
    strong: AffineRanges = STRONG_AFFINE
    resample_limit: int = 0
    distance_exponent: float = 1.0
    resize_donors: bool = True

    def __post_init__(self):
        for name in DEFAULT_PROBS:
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigKeyError(f"{name}={v} outside [0, 1]")
        if self.clip_length < 2:
            raise ConfigKeyError(f"clip_length must be >= 2, got {self.clip_length}")
        if self.resample_limit < 0:
            raise ConfigKeyError("resample_limit must be >= 0")

    def windows(self) -> tuple[tuple[int, int], tuple[int, int]]:
        t = self.clip_length
        return (t // 2, t), (t // 3, t // 3 * 2 + 1)


_RANGE_KEYS = ("rotation", "scale", "translate", "shear")
_SCALAR_KEYS = set(DEFAULT_PROBS) | {"clip_length", "resample_limit", "seed",
                                     "distance_exponent", "resize_donors"}


def _ranges_from_mapping(prefix: str, flat: dict, base: AffineRanges) -> AffineRanges:
    kwargs = {}
    for key in _RANGE_KEYS:
        dotted = f"{prefix}.{key}"
        if dotted in flat:
            lo, hi = flat.pop(dotted)
            kwargs[key] = (float(lo), float(hi))
    return replace(base, **kwargs) if kwargs else base


def _flatten(mapping: dict, prefix: str = "") -> dict:
    flat = {}
    for key, value in mapping.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, prefix=f"{name}."))
        else:
            flat[name] = value
    return flat


def config_from_mapping(mapping: dict) -> tuple[TmaConfig, int | None]:
    """Build a config from a nested or dotted-key mapping.

    Returns (config, seed) where seed is the optional `seed` entry. Unknown
    keys are rejected so typos cannot silently fall back to defaults.
    """
    flat = _flatten(dict(mapping))
    seed = flat.pop("seed", None)
    moderate = _ranges_from_mapping("affine.moderate", flat, MODERATE_AFFINE)
    strong = _ranges_from_mapping("affine.strong", flat, STRONG_AFFINE)
    kwargs = {}
    for key in list(flat):
        if key not in _SCALAR_KEYS or key == "seed":
            raise ConfigKeyError(f"unknown config key {key!r}")
        kwargs[key] = flat.pop(key)
    if "clip_length" in kwargs:
        kwargs["clip_length"] = int(kwargs["clip_length"])
    if "resample_limit" in kwargs:
        kwargs["resample_limit"] = int(kwargs["resample_limit"])
    if "resize_donors" in kwargs:
        kwargs["resize_donors"] = bool(kwargs["resize_donors"])
    cfg = TmaConfig(moderate=moderate, strong=strong, **kwargs)
    return cfg, (int(seed) if seed is not None else None)


def load_config(path: str | Path) -> tuple[TmaConfig, int | None]:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_mapping(json.load(fh))


def config_to_mapping(cfg: TmaConfig) -> dict:
    return {
        **{name: getattr(cfg, name) for name in DEFAULT_PROBS},
        "clip_length": cfg.clip_length,
        "resample_limit": cfg.resample_limit,
        "distance_exponent": cfg.distance_exponent,
        "resize_donors": cfg.resize_donors,
        "affine": {
            "moderate": {k: list(getattr(cfg.moderate, k)) for k in _RANGE_KEYS},
            "strong": {k: list(getattr(cfg.strong, k)) for k in _RANGE_KEYS},
        },
    }


@dataclass
class DonorPool:
    """Foreign donor clips plus the current video's own timeline.

    `timeline` is the full track the clip under augmentation was cut from,
    and `current_start` is the clip's offset inside it; both are needed only
    when p_same * p_cut * p_trans > 0.
    """

    donors: list[FrameSequenceSample] = field(default_factory=list)
    timeline: FrameSequenceSample | None = None
    current_start: int = 0


@dataclass
class TmaOutcome:
    sample: FrameSequenceSample
    transition_labels: list[bool]
    provenance: list[dict]

    def __post_init__(self):
        t = len(self.sample)
        assert len(self.transition_labels) == t
        assert not self.transition_labels[0]
        assert sum(self.transition_labels) <= 2

    def label_indices(self) -> list[int]:
        return [i for i, flag in enumerate(self.transition_labels) if flag]

    def provenance_json(self) -> str:
        return json.dumps(self.provenance, sort_keys=True)


def sample_same_video_segment(
    timeline: FrameSequenceSample,
    current_range: tuple[int, int],
    clip_length: int,
    rng: np.random.Generator,
    min_len: int = 0,
    distance_exponent: float = 1.0,
) -> tuple[FrameSequenceSample, int]:
    """Pick a window of the same video, favoring temporally distant offsets.

    The window length is drawn uniformly from [max(clip_length//2, min_len),
    clip_length] (clamped to the timeline), then the start offset is drawn
    with weight proportional to the window's gap distance from
    current_range raised to distance_exponent; offsets overlapping the
    current range have weight zero and can never be selected.

    Returns (window, offset).
    """
    n = len(timeline)
    lo = max(clip_length // 2, min_len, 1)
    hi = min(clip_length, n)
    if n <= clip_length or lo > hi:
        raise TimelineTooShort(
            f"timeline of {n} frames cannot host a window of [{lo}, {hi}]"
        )
    length = int(rng.integers(lo, hi + 1))
    c0, c1 = current_range
    offsets = np.arange(0, n - length + 1)
    ends = offsets + length
    gap_after = np.maximum(offsets - c1 + 1, 0)  # window starts after range
    gap_before = np.maximum(c0 - ends + 1, 0)  # window ends before range
    overlap = (offsets < c1) & (ends > c0)
    dist = np.where(overlap, 0, np.maximum(gap_after, gap_before)).astype(np.float64)
    weights = dist ** distance_exponent
    total = weights.sum()
    if total <= 0:
        raise TimelineTooShort(
            f"no window of {length} frames clears the current range {current_range}"
        )
    u = rng.random()
    pick = int(np.searchsorted(np.cumsum(weights) / total, u, side="right"))
    pick = min(pick, len(offsets) - 1)
    offset = int(offsets[pick])
    return timeline.window(offset, length), offset


def _pick_foreign_donor(
    pool: DonorPool, span: int, shape: tuple[int, int], resize: bool,
    rng: np.random.Generator,
) -> tuple[list[np.ndarray], str]:
    if not pool.donors:
        raise DonorUnavailable("donor pool is empty")
    idx = int(rng.integers(0, len(pool.donors)))
    donor = pool.donors[idx]
    if donor.shape != shape and not resize:
        raise IncompatibleDonorSize(
            f"donor {donor.video_id} is {donor.shape}, sample is {shape}"
        )
    if len(donor) > span:
        off = int(rng.integers(0, len(donor) - span + 1))
    else:
        off = 0
    frames = []
    for j in range(span):
        src = donor.frames[min(off + j, len(donor) - 1)]
        if donor.shape != shape:
            src, _ = resize_pair(src, np.zeros(donor.shape, np.uint8), shape)
        frames.append(src)
    return frames, donor.video_id


def _params_dict(p: AffineParams) -> dict:
    return {
        "rotation": p.rotation,
        "scale": p.scale,
        "translate": [p.translate[0], p.translate[1]],
        "shear": p.shear,
    }


def _apply_once(
    sample: FrameSequenceSample,
    pool: DonorPool,
    config: TmaConfig,
    rng: np.random.Generator,
) -> TmaOutcome:
    t = len(sample)
    h, w = sample.shape
    frames = [f.copy() for f in sample.frames]
    masks = [m.copy() for m in sample.masks]
    labels = [False] * t
    plan: dict = {"op": "plan", "transition": False}
    prov: list[dict] = [plan]

    if rng.random() > config.p_trans:
        return TmaOutcome(
            sample=replace_buffers(sample, frames, masks), transition_labels=labels,
            provenance=prov,
        )

    if_once = rng.random() < config.p_once
    (s, e) = config.windows()[0] if if_once else config.windows()[1]
    if_cut = rng.random() < config.p_cut
    plan.update(transition=True, single=if_once, window=[s, e], cut=if_cut)
    span = e - s

    if if_cut:
        if_same = rng.random() < config.p_same
        if_copy = rng.random() < config.p_copy
        plan.update(same_video=if_same, copy=if_copy)
        if if_same:
            if pool.timeline is None:
                raise DonorUnavailable("same-video cut drawn but no timeline in pool")
            window, offset = sample_same_video_segment(
                pool.timeline, (pool.current_start, pool.current_start + t),
                t, rng, min_len=span, distance_exponent=config.distance_exponent,
            )
            donor_frames = [f for f in window.frames[:span]]
            donor_masks = [m for m in window.masks[:span]]
            donor_id = pool.timeline.video_id
            prov.append({
                "op": "cut_same_video", "frames": [s, e], "donor": donor_id,
                "offset": offset, "length": len(window),
            })
        else:
            donor_frames, donor_id = _pick_foreign_donor(
                pool, span, (h, w), config.resize_donors, rng
            )
            donor_masks = [np.zeros((h, w), np.uint8) for _ in range(span)]
            prov.append({
                "op": "cut_foreign_video", "frames": [s, e], "donor": donor_id,
            })
        m_params = config.moderate.sample(rng)
        prov.append({
            "op": "affine_moderate", "frames": [s, e],
            "params": _params_dict(m_params), "donor": donor_id,
        })
        for j in range(span):
            donor_frames[j], donor_masks[j] = affine_transform(
                donor_frames[j], donor_masks[j], m_params
            )
        if (not if_same) and if_copy:
            base = (float(rng.uniform(-1.0, 1.0)), float(rng.uniform(-1.0, 1.0)))
            horizon = t // 2
            prov.append({
                "op": "gradual_copy", "frames": [s, e],
                "base_translate": [base[0], base[1]], "horizon": horizon,
                "donor": donor_id,
            })
            for i in range(s, e):
                moved_f, moved_m = gradual_translation(
                    frames[i], masks[i], i - s, horizon, base
                )
                frames[i] = copy_foreground(donor_frames[i - s], moved_f, moved_m)
                masks[i] = moved_m
        else:
            for i in range(s, e):
                frames[i] = donor_frames[i - s]
                masks[i] = donor_masks[i - s]
    else:
        for i in range(s, e):
            p = config.strong.sample(rng)
            frames[i], masks[i] = affine_transform(frames[i], masks[i], p)
            prov.append({
                "op": "affine_strong", "frames": [i, i + 1],
                "params": _params_dict(p),
            })

    if_flip = rng.random() < config.p_hflip
    plan["hflip"] = if_flip
    if if_flip:
        for i in range(s, e):
            frames[i], masks[i] = hflip(frames[i], masks[i])
        prov.append({"op": "hflip", "frames": [s, e]})

    if s >= 1:
        labels[s] = True
    if e < t:
        labels[e] = True
    return TmaOutcome(
        sample=replace_buffers(sample, frames, masks),
        transition_labels=labels, provenance=prov,
    )


def replace_buffers(
    sample: FrameSequenceSample, frames: list[np.ndarray], masks: list[np.ndarray]
) -> FrameSequenceSample:
    return FrameSequenceSample(
        video_id=sample.video_id, frames=frames, masks=masks,
        object_id=sample.object_id, fps=sample.fps,
    )


def apply_tma(
    sample: FrameSequenceSample,
    pool: DonorPool,
    config: TmaConfig,
    rng: np.random.Generator,
) -> TmaOutcome:
    """Run the augmentation once (plus optional empty-foreground retries).

    With resample_limit > 0, an outcome whose masks are empty on every
    frame is re-drawn (continuing the same rng stream) up to the limit;
    the final attempt is returned regardless.
    """
    if len(sample) != config.clip_length:
        raise ConfigKeyError(
            f"sample has {len(sample)} frames, config.clip_length is {config.clip_length}"
        )
    outcome = _apply_once(sample, pool, config, rng)
    attempts = 0
    while (
        attempts < config.resample_limit
        and not any(m.any() for m in outcome.sample.masks)
    ):
        attempts += 1
        outcome = _apply_once(sample, pool, config, rng)
    if attempts:
        outcome.provenance.append({"op": "resample", "attempts": attempts})
    return outcome
