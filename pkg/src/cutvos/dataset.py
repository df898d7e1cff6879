"""Dataset ingestion: frame/mask directories, shot annotations, statistics.

Directory layout follows the DAVIS/YTVOS convention:

    <root>/JPEGImages/<video>/<nnnnn>.jpg     zero-padded 5-digit frame index
    <root>/Annotations/<video>/<nnnnn>.png    palette-indexed object labels
    <root>/shots/<video>.json                 shot segments with type labels
    <root>/meta/<video>.json                  optional: fps, object categories

Mask files are palette PNGs; object identity is the palette index and 0 is
background.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    DimensionMismatch,
    EmptyTrack,
    GapOrOverlap,
    MissingFrame,
    OutOfRangeIndex,
    UnknownTransitionType,
    ZeroDuration,
)

DEFAULT_FPS = 24.0

# Fixed 12-color palette used for mask PNGs and overlays (label 1 -> entry 0).
OBJECT_PALETTE = [
    (230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200),
    (245, 130, 48), (145, 30, 180), (70, 240, 240), (240, 50, 230),
    (210, 245, 60), (0, 128, 128), (220, 190, 255), (170, 110, 40),
]


class TransitionType(enum.Enum):
    CUT_IN = "CutIn"
    CUT_AWAY = "CutAway"
    DELAYED_CUT_IN = "DelayedCutIn"
    CLOSE_UP_VIEW = "CloseUpView"
    DISTANT_VIEW = "DistantView"
    PITCH_TRANSFORMATION = "PitchTransformation"
    HORIZON_TRANSFORMATION = "HorizonTransformation"
    SCENE_CHANGE = "SceneChange"
    INSIGNIFICANCE = "Insignificance"


PRESENCE_TYPES = frozenset(
    {TransitionType.CUT_IN, TransitionType.CUT_AWAY, TransitionType.DELAYED_CUT_IN}
)
VIEW_TYPES = frozenset(set(TransitionType) - PRESENCE_TYPES)


def parse_transition_type(name: str) -> TransitionType:
    try:
        return TransitionType(name)
    except ValueError:
        raise UnknownTransitionType(f"unknown transition type {name!r}") from None


@dataclass(frozen=True)
class ShotSegment:
    """One shot: frames [start, end), plus the transition that opened it.

    A segment carries at most one presence type and at most one view type;
    the first segment of a video normally carries neither.
    """

    start: int
    end: int
    presence: TransitionType | None = None
    view: TransitionType | None = None

    def __post_init__(self):
        if self.presence is not None and self.presence not in PRESENCE_TYPES:
            raise UnknownTransitionType(
                f"{self.presence.value} is not a presence type"
            )
        if self.view is not None and self.view not in VIEW_TYPES:
            raise UnknownTransitionType(f"{self.view.value} is not a view type")

    @property
    def types(self) -> list[TransitionType]:
        return [t for t in (self.presence, self.view) if t is not None]


@dataclass(frozen=True)
class ShotAnnotation:
    """Ordered, contiguous shot segments covering frames [0, T)."""

    segments: tuple[ShotSegment, ...]

    def __post_init__(self):
        if not self.segments:
            raise GapOrOverlap("annotation has no segments")
        if self.segments[0].start != 0:
            raise OutOfRangeIndex(
                f"first segment starts at {self.segments[0].start}, expected 0"
            )
        prev_end = 0
        for seg in self.segments:
            if seg.start < 0 or seg.end < 0:
                raise OutOfRangeIndex(f"negative index in segment {seg}")
            if seg.end <= seg.start:
                raise GapOrOverlap(f"zero-length or inverted segment {seg}")
            if seg.start != prev_end:
                raise GapOrOverlap(
                    f"segment starting at {seg.start} does not continue from {prev_end}"
                )
            prev_end = seg.end

    @property
    def n_frames(self) -> int:
        return self.segments[-1].end

    @property
    def n_shots(self) -> int:
        return len(self.segments)

    def starts(self) -> list[int]:
        return [seg.start for seg in self.segments]

    def transition_indices(self) -> list[int]:
        return [seg.start for seg in self.segments[1:]]

    def validate_length(self, n_frames: int) -> None:
        if self.n_frames != n_frames:
            raise OutOfRangeIndex(
                f"annotation covers {self.n_frames} frames, video has {n_frames}"
            )

    def to_json_obj(self) -> list[dict]:
        return [
            {
                "start": seg.start,
                "end": seg.end,
                "presence": seg.presence.value if seg.presence else None,
                "view": seg.view.value if seg.view else None,
            }
            for seg in self.segments
        ]

    @classmethod
    def from_json_obj(cls, obj) -> "ShotAnnotation":
        if not isinstance(obj, list):
            raise GapOrOverlap("shot annotation must be a JSON array")
        segs = []
        for entry in obj:
            presence = entry.get("presence")
            view = entry.get("view")
            segs.append(
                ShotSegment(
                    start=int(entry["start"]),
                    end=int(entry["end"]),
                    presence=parse_transition_type(presence) if presence else None,
                    view=parse_transition_type(view) if view else None,
                )
            )
        return cls(segments=tuple(segs))

    @classmethod
    def single_shot(cls, n_frames: int) -> "ShotAnnotation":
        return cls(segments=(ShotSegment(0, n_frames),))

    @classmethod
    def from_boundaries(cls, indices: list[int], n_frames: int) -> "ShotAnnotation":
        bounds = [0] + list(indices) + [n_frames]
        return cls(
            segments=tuple(ShotSegment(a, b) for a, b in zip(bounds, bounds[1:]))
        )


def load_shot_annotation(path: str | Path) -> ShotAnnotation:
    """Parse and validate a shots/<video>.json file."""
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    return ShotAnnotation.from_json_obj(obj)


@dataclass
class FrameSequenceSample:
    """T aligned (frame, mask) pairs for one object track.

    Frames are HxWx3 uint8, masks HxW uint8 where every nonzero pixel equals
    `object_id`.
    """

    video_id: str
    frames: list[np.ndarray]
    masks: list[np.ndarray]
    object_id: int
    fps: float = DEFAULT_FPS

    def __post_init__(self):
        if len(self.frames) != len(self.masks) or not self.frames:
            raise MissingFrame(
                f"{self.video_id}: {len(self.frames)} frames vs {len(self.masks)} masks"
            )
        if self.object_id <= 0:
            raise OutOfRangeIndex(f"object_id must be positive, got {self.object_id}")
        shape = self.frames[0].shape
        for i, (f, m) in enumerate(zip(self.frames, self.masks)):
            if f.shape != shape or m.shape != shape[:2]:
                raise DimensionMismatch(
                    f"{self.video_id}[{i}]: frame {f.shape}, mask {m.shape}, "
                    f"expected {shape}"
                )
            if not np.logical_or(m == 0, m == self.object_id).all():
                raise OutOfRangeIndex(
                    f"{self.video_id}[{i}]: mask labels {np.unique(m).tolist()} "
                    f"not in {{0, {self.object_id}}}"
                )

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames[0].shape[:2]

    def copy(self) -> "FrameSequenceSample":
        return FrameSequenceSample(
            video_id=self.video_id,
            frames=[f.copy() for f in self.frames],
            masks=[m.copy() for m in self.masks],
            object_id=self.object_id,
            fps=self.fps,
        )

    def window(self, start: int, length: int) -> "FrameSequenceSample":
        return FrameSequenceSample(
            video_id=self.video_id,
            frames=self.frames[start : start + length],
            masks=self.masks[start : start + length],
            object_id=self.object_id,
            fps=self.fps,
        )

    def frame_array(self) -> np.ndarray:
        return np.stack(self.frames, axis=0)

    def mask_array(self) -> np.ndarray:
        return np.stack(self.masks, axis=0)


def load_frame(path: str | Path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("RGB"), dtype=np.uint8)


def load_mask(path: str | Path) -> np.ndarray:
    """Load a palette-indexed mask PNG as an HxW uint8 label map."""
    img = Image.open(path)
    if img.mode not in ("P", "L"):
        img = img.convert("P")
    return np.asarray(img, dtype=np.uint8)


def save_mask(path: str | Path, mask: np.ndarray) -> None:
    """Write an HxW label map as a palette PNG (index 0 black)."""
    with open(path, "wb") as fh:
        fh.write(encode_mask_png(mask))


def save_frame(path: str | Path, frame: np.ndarray) -> None:
    Image.fromarray(frame, mode="RGB").save(path, format="JPEG", quality=95)


def encode_frame_jpeg(frame: np.ndarray) -> bytes:
    """JPEG bytes produced exactly as `save_frame` writes them."""
    import io

    buf = io.BytesIO()
    Image.fromarray(frame, mode="RGB").save(buf, format="JPEG", quality=95)
    return buf.getvalue()


def encode_mask_png(mask: np.ndarray) -> bytes:
    """PNG bytes produced exactly as `save_mask` writes them."""
    import io

    img = Image.fromarray(mask.astype(np.uint8), mode="P")
    palette = [0, 0, 0]
    for i in range(255):
        palette.extend(OBJECT_PALETTE[i % len(OBJECT_PALETTE)])
    img.putpalette(palette[: 256 * 3])
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def load_sample(
    frames_dir: str | Path, masks_dir: str | Path, object_id: int, fps: float = DEFAULT_FPS
) -> FrameSequenceSample:
    """Load one object track; mask pixels not equal to object_id are zeroed."""
    frames_dir, masks_dir = Path(frames_dir), Path(masks_dir)
    frame_paths = sorted(p for p in frames_dir.iterdir() if p.suffix.lower() in (".jpg", ".jpeg", ".png"))
    mask_paths = sorted(p for p in masks_dir.iterdir() if p.suffix.lower() == ".png")
    if len(frame_paths) != len(mask_paths):
        raise MissingFrame(
            f"{frames_dir.name}: {len(frame_paths)} frames vs {len(mask_paths)} masks"
        )
    if not frame_paths:
        raise MissingFrame(f"{frames_dir} is empty")
    frames, masks = [], []
    for fp, mp in zip(frame_paths, mask_paths):
        frame = load_frame(fp)
        mask = load_mask(mp)
        mask = np.where(mask == object_id, np.uint8(object_id), np.uint8(0))
        frames.append(frame)
        masks.append(mask)
    if not any(m.any() for m in masks):
        raise EmptyTrack(f"object {object_id} never appears in {masks_dir.name}")
    return FrameSequenceSample(
        video_id=frames_dir.name, frames=frames, masks=masks,
        object_id=object_id, fps=fps,
    )


@dataclass
class VideoEntry:
    """Index record for one video in a dataset root."""

    video_id: str
    frame_paths: list[Path]
    mask_paths: list[Path]
    fps: float = DEFAULT_FPS
    shots: ShotAnnotation | None = None
    categories: dict[int, str] = field(default_factory=dict)
    object_ids: list[int] = field(default_factory=list)
    n_valid_masks: int = 0

    @property
    def n_frames(self) -> int:
        return len(self.frame_paths)

    @property
    def duration_s(self) -> float:
        return self.n_frames / self.fps


@dataclass
class DatasetIndex:
    root: Path
    videos: list[VideoEntry]

    def video(self, video_id: str) -> VideoEntry:
        for v in self.videos:
            if v.video_id == video_id:
                return v
        raise MissingFrame(f"no video named {video_id!r} in {self.root}")


def load_dataset_index(root: str | Path, scan_masks: bool = True) -> DatasetIndex:
    """Scan a dataset root into an index.

    With scan_masks, every annotation PNG is read once to collect object ids
    and the valid (non-empty) mask count per video.
    """
    root = Path(root)
    frames_root = root / "JPEGImages"
    masks_root = root / "Annotations"
    if not frames_root.is_dir():
        raise MissingFrame(f"{frames_root} does not exist")
    videos = []
    for vdir in sorted(p for p in frames_root.iterdir() if p.is_dir()):
        vid = vdir.name
        frame_paths = sorted(vdir.glob("*.jpg")) + sorted(vdir.glob("*.jpeg"))
        mask_dir = masks_root / vid
        mask_paths = sorted(mask_dir.glob("*.png")) if mask_dir.is_dir() else []
        fps = DEFAULT_FPS
        categories: dict[int, str] = {}
        meta_path = root / "meta" / f"{vid}.json"
        if meta_path.exists():
            with open(meta_path, "r", encoding="utf-8") as fh:
                meta = json.load(fh)
            fps = float(meta.get("fps", DEFAULT_FPS))
            categories = {int(k): str(v) for k, v in meta.get("categories", {}).items()}
        shots = None
        shots_path = root / "shots" / f"{vid}.json"
        if shots_path.exists():
            shots = load_shot_annotation(shots_path)
        object_ids: set[int] = set()
        n_valid = 0
        if scan_masks:
            for mp in mask_paths:
                labels = np.unique(load_mask(mp))
                nonzero = [int(x) for x in labels if x != 0]
                object_ids.update(nonzero)
                n_valid += len(nonzero)
        videos.append(
            VideoEntry(
                video_id=vid,
                frame_paths=frame_paths,
                mask_paths=mask_paths,
                fps=fps,
                shots=shots,
                categories=categories,
                object_ids=sorted(object_ids),
                n_valid_masks=n_valid,
            )
        )
    return DatasetIndex(root=root, videos=videos)


@dataclass(frozen=True)
class DatasetStats:
    """Aggregate benchmark statistics.

    `n_shots` counts shots per video; `n_shots_per_object` repeats each
    video's shot count once per annotated object, since both conventions
    appear in benchmark tables and they differ.
    """

    n_videos: int
    n_objects: int
    n_masks: int
    n_shots: int
    n_shots_per_object: int
    avg_shots_per_video: float
    avg_duration_s: float
    transition_frequency: float
    category_histogram: dict[str, int]

    def to_json_dict(self) -> dict:
        return {
            "n_videos": self.n_videos,
            "n_objects": self.n_objects,
            "n_masks": self.n_masks,
            "n_shots": self.n_shots,
            "n_shots_per_object": self.n_shots_per_object,
            "avg_shots_per_video": round(self.avg_shots_per_video, 6),
            "avg_duration_s": round(self.avg_duration_s, 6),
            "transition_frequency": round(self.transition_frequency, 6),
            "category_histogram": dict(sorted(self.category_histogram.items())),
        }


def compute_stats(index: DatasetIndex) -> DatasetStats:
    """Exact counts plus the per-video transition frequency average.

    transition_frequency is the mean over videos of
    (n_shots - 1) / duration_seconds; a single-shot video contributes 0.
    """
    if not index.videos:
        raise ZeroDuration("dataset has no videos")
    freqs, shots_counts, durations = [], [], []
    n_objects = 0
    n_masks = 0
    n_shots_per_object = 0
    histogram: dict[str, int] = {}
    for v in index.videos:
        if v.shots is None:
            raise GapOrOverlap(f"{v.video_id} has no shot annotation")
        if v.duration_s <= 0:
            raise ZeroDuration(f"{v.video_id} has non-positive duration")
        v.shots.validate_length(v.n_frames)
        n_shots = v.shots.n_shots
        shots_counts.append(n_shots)
        durations.append(v.duration_s)
        freqs.append((n_shots - 1) / v.duration_s)
        n_objects += len(v.object_ids)
        n_masks += v.n_valid_masks
        n_shots_per_object += n_shots * len(v.object_ids)
        for oid in v.object_ids:
            cat = v.categories.get(oid, "unknown")
            histogram[cat] = histogram.get(cat, 0) + 1
    return DatasetStats(
        n_videos=len(index.videos),
        n_objects=n_objects,
        n_masks=n_masks,
        n_shots=sum(shots_counts),
        n_shots_per_object=n_shots_per_object,
        avg_shots_per_video=float(np.mean(shots_counts)),
        avg_duration_s=float(np.mean(durations)),
        transition_frequency=float(np.mean(freqs)),
        category_histogram=histogram,
    )
