"""Fixture builders shared by the bindings tests."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from cutvos import dataset as ds


def gradient_frame(h, w, base=0, step=3):
    col = (base + step * np.arange(w)) % 256
    return np.broadcast_to(col[None, :, None], (h, w, 3)).astype(np.uint8).copy()


def square_mask(h, w, r0, c0, size, label=1):
    mask = np.zeros((h, w), np.uint8)
    mask[r0 : r0 + size, c0 : c0 + size] = label
    return mask


def colored_clip(t, h, w, bg, color, r0=6, c0=6, size=8, step=(0, 0)):
    frames, masks = [], []
    for i in range(t):
        frame = gradient_frame(h, w, base=bg + i)
        mask = square_mask(h, w, r0 + step[0] * i, c0 + step[1] * i, size)
        frame[mask > 0] = color
        frames.append(frame)
        masks.append(mask)
    return frames, masks


def write_video(root: Path, video_id, frames, masks, shots=None, fps=None):
    fdir = root / "JPEGImages" / video_id
    mdir = root / "Annotations" / video_id
    fdir.mkdir(parents=True, exist_ok=True)
    mdir.mkdir(parents=True, exist_ok=True)
    for i, (frame, mask) in enumerate(zip(frames, masks)):
        ds.save_frame(fdir / f"{i:05d}.jpg", frame)
        ds.save_mask(mdir / f"{i:05d}.png", mask)
    if shots is not None:
        (root / "shots").mkdir(exist_ok=True)
        (root / "shots" / f"{video_id}.json").write_text(json.dumps(shots))
    if fps is not None:
        (root / "meta").mkdir(exist_ok=True)
        (root / "meta" / f"{video_id}.json").write_text(json.dumps({"fps": fps}))


@pytest.fixture
def golden_root(tmp_path):
    """Three-video root matching the toolkit dataset layout."""
    root = tmp_path / "root"
    specs = {
        "v0": (0, (200, 40, 40)),
        "v1": (90, (30, 200, 220)),
        "v2": (180, (180, 40, 160)),
    }
    for vid, (bg, color) in specs.items():
        frames, masks = colored_clip(20, 24, 24, bg, color)
        write_video(root, vid, frames, masks, shots=[
            {"start": 0, "end": 20, "presence": None, "view": None},
        ], fps=10.0)
    return root
