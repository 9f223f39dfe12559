"""Seeded on-the-fly training-set augmentation: flip, rotation, shear.

Transforms are sampled from counter-based streams keyed by
(global_seed, fold, epoch, sample_index), so the augmented stream for an
epoch is reproducible in any execution order.  Validation and test
images are never augmented.
"""

import math
from dataclasses import dataclass

import numpy as np

from .imaging import GrayImage
from .seeding import STREAM_AUGMENT, keyed_rng


@dataclass(frozen=True)
class AugmentParams:
    max_rotation_deg: float = 20.0
    shear_range: float = 0.2
    hflip_probability: float = 0.5

    def __post_init__(self):
        if self.max_rotation_deg < 0 or self.shear_range < 0:
            raise ValueError("rotation and shear bounds must be non-negative")
        if not 0.0 <= self.hflip_probability <= 1.0:
            raise ValueError("hflip_probability must be in [0, 1]")


@dataclass(frozen=True)
class AugmentSpec:
    """One sampled, replayable transform."""

    flip: bool
    rotation_deg: float
    shear: float


def sample_augment(
    params: AugmentParams, seed_tuple: tuple[int, int, int, int]
) -> AugmentSpec:
    """Draw a transform from the stream keyed by (seed, fold, epoch, sample)."""
    rng = keyed_rng(STREAM_AUGMENT, *seed_tuple)
    flip = bool(rng.random() < params.hflip_probability)
    rotation = float(rng.uniform(-params.max_rotation_deg, params.max_rotation_deg))
    shear = float(rng.uniform(-params.shear_range, params.shear_range))
    return AugmentSpec(flip=flip, rotation_deg=rotation, shear=shear)


def _inverse_matrix(spec: AugmentSpec) -> np.ndarray:
    # Forward transform is flip . rotate . shear about the center; the
    # sampler inverse-maps, so compose the analytic inverses in reverse:
    # shear^-1 . rotate^-1 . flip^-1.
    theta = math.radians(spec.rotation_deg)
    shear_inv = np.array([[1.0, -spec.shear], [0.0, 1.0]])
    cos_t, sin_t = math.cos(-theta), math.sin(-theta)
    rot_inv = np.array([[cos_t, -sin_t], [sin_t, cos_t]])
    flip_inv = np.array([[-1.0, 0.0], [0.0, 1.0]]) if spec.flip else np.eye(2)
    return shear_inv @ rot_inv @ flip_inv


def apply_affine(img: GrayImage, spec: AugmentSpec) -> GrayImage:
    """Resample through the inverse transform with bilinear interpolation.

    Source lookups outside the image contribute 0 (black fill); output
    dimensions match the input.  The identity spec reproduces the input
    bit-exactly, and a pure horizontal flip is an involution on the
    pixel grid.
    """
    h, w = img.height, img.width
    m = _inverse_matrix(spec)
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    dx = (np.arange(w, dtype=np.float64) - cx)[None, :]
    dy = (np.arange(h, dtype=np.float64) - cy)[:, None]
    sx = m[0, 0] * dx + m[0, 1] * dy + cx
    sy = m[1, 0] * dx + m[1, 1] * dy + cy
    return GrayImage(_sample_bilinear_zero(img.pixels, sx, sy))


def _sample_bilinear_zero(pixels: np.ndarray, sx: np.ndarray, sy: np.ndarray) -> np.ndarray:
    h, w = pixels.shape
    x0 = np.floor(sx)
    y0 = np.floor(sy)
    fx = sx - x0
    fy = sy - y0
    # A one-pixel zero ring implements the black fill: every neighbor
    # index outside the image clamps onto the ring.
    padded = np.zeros((h + 2, w + 2), dtype=np.float64)
    padded[1:-1, 1:-1] = pixels
    x0 = x0.astype(np.intp)
    y0 = y0.astype(np.intp)

    def clamp(idx, hi):
        return np.minimum(np.maximum(idx, 0), hi)

    x0p = clamp(x0 + 1, w + 1)
    x1p = clamp(x0 + 2, w + 1)
    y0p = clamp(y0 + 1, h + 1)
    y1p = clamp(y0 + 2, h + 1)
    flat = padded.ravel()
    stride = w + 2
    row0 = y0p * stride
    row1 = y1p * stride
    top = _lerp(flat.take(row0 + x0p), flat.take(row0 + x1p), fx)
    bottom = _lerp(flat.take(row1 + x0p), flat.take(row1 + x1p), fx)
    return np.minimum(np.maximum(_lerp(top, bottom, fy), 0.0), 1.0)


def _lerp(a, b, t):
    return a + t * (b - a)
