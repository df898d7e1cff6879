"""Shared synthetic fixtures: frames, masks, and on-disk dataset roots."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from cutvos import dataset as ds


def gradient_frame(h: int, w: int, base: int = 0, step: int = 3) -> np.ndarray:
    """Deterministic smooth frame: horizontal gradient offset by `base`."""
    col = (base + step * np.arange(w)) % 256
    frame = np.broadcast_to(col[None, :, None], (h, w, 3))
    return frame.astype(np.uint8).copy()


def solid_frame(h: int, w: int, color: tuple[int, int, int]) -> np.ndarray:
    return np.broadcast_to(np.array(color, np.uint8), (h, w, 3)).copy()


def square_mask(h: int, w: int, r0: int, c0: int, size: int, label: int = 1) -> np.ndarray:
    mask = np.zeros((h, w), np.uint8)
    mask[r0 : r0 + size, c0 : c0 + size] = label
    return mask


def moving_square_clip(
    t: int, h: int, w: int, start_rc: tuple[int, int], step_rc: tuple[int, int],
    size: int = 6, label: int = 1, bg_base: int = 0,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Rigid-motion clip: a colored square slides over a gradient background."""
    frames, masks = [], []
    for i in range(t):
        r = start_rc[0] + step_rc[0] * i
        c = start_rc[1] + step_rc[1] * i
        frame = gradient_frame(h, w, base=bg_base + i)
        mask = square_mask(h, w, r, c, size, label)
        frame[mask > 0] = (200, 40, 40)
        frames.append(frame)
        masks.append(mask)
    return frames, masks


def make_sample(
    t: int = 8, h: int = 32, w: int = 32, video_id: str = "vid", object_id: int = 1,
    start_rc: tuple[int, int] = (4, 4), step_rc: tuple[int, int] = (1, 1),
    bg_base: int = 0, fps: float = 24.0,
) -> ds.FrameSequenceSample:
    frames, masks = moving_square_clip(
        t, h, w, start_rc, step_rc, label=object_id, bg_base=bg_base
    )
    return ds.FrameSequenceSample(
        video_id=video_id, frames=frames, masks=masks, object_id=object_id, fps=fps
    )


def write_video(
    root: Path, video_id: str, frames: list[np.ndarray], masks: list[np.ndarray],
    shots: list[dict] | None = None, fps: float | None = None,
    categories: dict[int, str] | None = None,
) -> None:
    fdir = root / "JPEGImages" / video_id
    mdir = root / "Annotations" / video_id
    fdir.mkdir(parents=True, exist_ok=True)
    mdir.mkdir(parents=True, exist_ok=True)
    for i, (frame, mask) in enumerate(zip(frames, masks)):
        ds.save_frame(fdir / f"{i:05d}.jpg", frame)
        ds.save_mask(mdir / f"{i:05d}.png", mask)
    if shots is not None:
        sdir = root / "shots"
        sdir.mkdir(exist_ok=True)
        (sdir / f"{video_id}.json").write_text(json.dumps(shots))
    meta = {}
    if fps is not None:
        meta["fps"] = fps
    if categories is not None:
        meta["categories"] = {str(k): v for k, v in categories.items()}
    if meta:
        mdir2 = root / "meta"
        mdir2.mkdir(exist_ok=True)
        (mdir2 / f"{video_id}.json").write_text(json.dumps(meta))


@pytest.fixture
def small_root(tmp_path: Path) -> Path:
    """Two 12-frame videos with distinct looks, shots, and meta."""
    root = tmp_path / "root"
    f1, m1 = moving_square_clip(12, 32, 40, (4, 4), (1, 1), bg_base=0)
    write_video(
        root, "alpha", f1, m1,
        shots=[
            {"start": 0, "end": 6, "presence": None, "view": None},
            {"start": 6, "end": 12, "presence": None, "view": "SceneChange"},
        ],
        fps=6.0, categories={1: "toy"},
    )
    f2 = [solid_frame(32, 40, (10, 180, 60)) for _ in range(12)]
    m2 = [square_mask(32, 40, 10, 10, 8, label=1) for _ in range(12)]
    for frame, mask in zip(f2, m2):
        frame[mask > 0] = (240, 240, 20)
    write_video(
        root, "beta", f2, m2,
        shots=[{"start": 0, "end": 12, "presence": None, "view": None}],
        fps=6.0, categories={1: "block"},
    )
    return root
