"""Joint frame/mask image primitives.

Every operation applies the identical geometric map to the frame and its
mask: frames are sampled bilinearly, masks nearest-neighbor, and anything
mapped from outside the canvas fills with 0 (black frame, background mask).
All functions are pure; inputs are never mutated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import cv2
import numpy as np

from .errors import DimensionMismatch, InvalidHorizon, NonFiniteParams

# Seeding: all randomness in the toolkit flows through numpy PCG64 generators,
# which produce identical draw sequences for identical seeds on every platform.


def make_rng(seed: int) -> np.random.Generator:
    """Return the toolkit's deterministic generator for a 64-bit seed."""
    return np.random.Generator(np.random.PCG64(seed))


def spawn_rng(master_seed: int, index: int) -> np.random.Generator:
    """Derive the per-sample generator for sample `index` under a master seed.

    Batch drivers use this split so per-sample streams are independent and
    reproducible regardless of scheduling order.
    """
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class AffineParams:
    """One concrete joint affine: rotation/scale about the pixel-center of the
    image, an x-shear, then a translation in width/height fractions."""

    rotation: float = 0.0  # degrees
    scale: float = 1.0
    translate: tuple[float, float] = (0.0, 0.0)  # (dx, dy), fractions of (W, H)
    shear: float = 0.0  # degrees, x direction

    def validate(self) -> None:
        vals = (self.rotation, self.scale, self.translate[0], self.translate[1], self.shear)
        if not all(math.isfinite(v) for v in vals):
            raise NonFiniteParams(f"non-finite affine parameters: {self}")
        if self.scale <= 0:
            raise NonFiniteParams(f"scale must be positive, got {self.scale}")


@dataclass(frozen=True)
class AffineRanges:
    """Uniform sampling bounds for each affine component.

    `translate` bounds apply to both axes. Draw order is fixed (rotation,
    scale, dx, dy, shear) so seeded runs are auditable.
    """

    rotation: tuple[float, float]
    scale: tuple[float, float]
    translate: tuple[float, float]
    shear: tuple[float, float]

    def sample(self, rng: np.random.Generator) -> AffineParams:
        rot = rng.uniform(*self.rotation)
        sc = rng.uniform(*self.scale)
        dx = rng.uniform(*self.translate)
        dy = rng.uniform(*self.translate)
        sh = rng.uniform(*self.shear)
        return AffineParams(rotation=rot, scale=sc, translate=(dx, dy), shear=sh)


# Default ranges. The moderate variant keeps the donor clip recognizable;
# the strong variant must plausibly mimic close-up/distant view changes,
# hence the much wider scale excursion. Both are config-overridable.
MODERATE_AFFINE = AffineRanges(
    rotation=(-10.0, 10.0), scale=(0.9, 1.1), translate=(-0.05, 0.05), shear=(-5.0, 5.0)
)
STRONG_AFFINE = AffineRanges(
    rotation=(-25.0, 25.0), scale=(0.5, 1.6), translate=(-0.2, 0.2), shear=(-15.0, 15.0)
)


def affine_matrix(params: AffineParams, shape: tuple[int, int]) -> np.ndarray:
    """Forward 2x3 matrix for `params` on an (H, W) canvas.

    The map is F(p) = R(rot) @ (scale * Shx(shear)) @ (p - c) + c + t with
    c the pixel-center of the canvas and t the translation in pixels.
    """
    h, w = shape
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    th = math.radians(params.rotation)
    cos_t, sin_t = math.cos(th), math.sin(th)
    tan_sh = math.tan(math.radians(params.shear))
    s = params.scale
    # linear part: rotate @ scale @ shear_x
    a11 = s * (cos_t * 1.0 + (-sin_t) * 0.0)
    a12 = s * (cos_t * tan_sh + (-sin_t) * 1.0)
    a21 = s * (sin_t * 1.0 + cos_t * 0.0)
    a22 = s * (sin_t * tan_sh + cos_t * 1.0)
    tx = params.translate[0] * w
    ty = params.translate[1] * h
    b1 = cx + tx - (a11 * cx + a12 * cy)
    b2 = cy + ty - (a21 * cx + a22 * cy)
    return np.array([[a11, a12, b1], [a21, a22, b2]], dtype=np.float64)


def _warp_pair(
    frame: np.ndarray, mask: np.ndarray, matrix: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    h, w = mask.shape
    frame_out = cv2.warpAffine(
        frame, matrix, (w, h), flags=cv2.INTER_LINEAR,
        borderMode=cv2.BORDER_CONSTANT, borderValue=0,
    )
    mask_out = cv2.warpAffine(
        mask, matrix, (w, h), flags=cv2.INTER_NEAREST,
        borderMode=cv2.BORDER_CONSTANT, borderValue=0,
    )
    return frame_out, mask_out


def _check_pair(frame: np.ndarray, mask: np.ndarray) -> None:
    if frame.shape[:2] != mask.shape[:2]:
        raise DimensionMismatch(
            f"frame {frame.shape[:2]} and mask {mask.shape[:2]} differ"
        )


def affine_transform(
    frame: np.ndarray, mask: np.ndarray, params: AffineParams
) -> tuple[np.ndarray, np.ndarray]:
    """Apply one affine jointly to a frame and its mask."""
    _check_pair(frame, mask)
    params.validate()
    m = affine_matrix(params, mask.shape)
    return _warp_pair(frame, mask, m)


def hflip(frame: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Horizontal mirror of both buffers."""
    return np.ascontiguousarray(frame[:, ::-1]), np.ascontiguousarray(mask[:, ::-1])


def copy_foreground(
    dst_frame: np.ndarray, src_frame: np.ndarray, src_mask: np.ndarray
) -> np.ndarray:
    """Composite the masked pixels of `src_frame` onto a copy of `dst_frame`."""
    if dst_frame.shape != src_frame.shape or dst_frame.shape[:2] != src_mask.shape[:2]:
        raise DimensionMismatch(
            f"buffers disagree: dst {dst_frame.shape}, src {src_frame.shape}, "
            f"mask {src_mask.shape}"
        )
    out = dst_frame.copy()
    sel = src_mask > 0
    out[sel] = src_frame[sel]
    return out


def gradual_translation(
    frame: np.ndarray,
    mask: np.ndarray,
    elapsed: int,
    horizon: int,
    base_translate: tuple[float, float],
) -> tuple[np.ndarray, np.ndarray]:
    """Translate both buffers by base_translate * (horizon - elapsed) / horizon.

    `base_translate` is in (dx, dy) width/height fractions; the displacement
    shrinks linearly as `elapsed` approaches `horizon` and is zero at
    elapsed == horizon.
    """
    if horizon <= 0:
        raise InvalidHorizon(f"horizon must be positive, got {horizon}")
    if not 0 <= elapsed <= horizon:
        raise InvalidHorizon(f"elapsed {elapsed} outside [0, {horizon}]")
    _check_pair(frame, mask)
    h, w = mask.shape
    factor = (horizon - elapsed) / horizon
    tx = base_translate[0] * factor * w
    ty = base_translate[1] * factor * h
    m = np.array([[1.0, 0.0, tx], [0.0, 1.0, ty]], dtype=np.float64)
    return _warp_pair(frame, mask, m)


def resize_pair(
    frame: np.ndarray, mask: np.ndarray, shape: tuple[int, int]
) -> tuple[np.ndarray, np.ndarray]:
    """Resize to (H, W): frames bilinear, masks nearest."""
    h, w = shape
    if frame.shape[:2] == (h, w):
        return frame, mask
    frame_out = cv2.resize(frame, (w, h), interpolation=cv2.INTER_LINEAR)
    mask_out = cv2.resize(mask, (w, h), interpolation=cv2.INTER_NEAREST)
    return frame_out, mask_out
