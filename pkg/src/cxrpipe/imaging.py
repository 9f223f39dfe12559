"""Grayscale radiograph loading, resizing, and contrast enhancement.

Images are real-valued rasters in [0, 1].  The contrast stage is a
contrast-limited adaptive histogram equalization: per-tile clipped
histograms are turned into cumulative distributions, each tile maps a
gray level f to

    p = (p_max - p_min) * G(f) + p_min

with p_min / p_max the tile's minimum / maximum input intensity, and the
per-tile mappings are blended per pixel by bilinear weights between the
four nearest tile centers.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, PgmError

_WHITESPACE = b" \t\r\n"


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Normalized grayscale raster: shape (height, width), float64 in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        pix = np.array(self.pixels, dtype=np.float64)
        if pix.ndim != 2 or pix.size == 0:
            raise ValueError("GrayImage requires a non-empty 2-D array")
        if not np.all(np.isfinite(pix)) or pix.min() < 0.0 or pix.max() > 1.0:
            raise ValueError("GrayImage intensities must be finite and in [0, 1]")
        pix.setflags(write=False)
        object.__setattr__(self, "pixels", pix)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class ClaheParams:
    """Tiled, clip-limited equalization parameters.

    clip_factor is a multiplier over the uniform histogram bin height:
    the effective bin limit is clip_factor * tile_pixels / n_bins.
    """

    tile_rows: int = 8
    tile_cols: int = 8
    clip_factor: float = 2.0
    n_bins: int = 256

    def __post_init__(self):
        if self.tile_rows < 1 or self.tile_cols < 1:
            raise ConfigError("tile grid must be at least 1x1")
        if self.n_bins < 2:
            raise ConfigError("n_bins must be at least 2")
        if self.clip_factor < 1.0:
            raise ConfigError("clip_factor must be >= 1")


def _read_header_ints(data: bytes, start: int, count: int) -> tuple[list[int], int]:
    """Read `count` whitespace-separated decimal tokens, honoring # comments."""
    values = []
    pos = start
    while len(values) < count:
        while pos < len(data):
            if data[pos] in _WHITESPACE:
                pos += 1
            elif data[pos] == ord("#"):
                nl = data.find(b"\n", pos)
                if nl < 0:
                    raise PgmError(f"unterminated header comment at offset {pos}")
                pos = nl + 1
            else:
                break
        tok_start = pos
        while pos < len(data) and data[pos] not in _WHITESPACE and data[pos] != ord("#"):
            pos += 1
        token = data[tok_start:pos]
        if not token:
            raise PgmError(f"truncated header at offset {tok_start}")
        try:
            values.append(int(token))
        except ValueError:
            raise PgmError(f"non-numeric header token at offset {tok_start}") from None
    return values, pos


def load_pgm(data: bytes) -> GrayImage:
    """Decode a binary PGM ("P5") payload into a normalized image.

    Raises PgmError naming the byte offset of the defect for malformed
    magic, non-numeric or missing header fields, maxval 0 or > 65535,
    and truncated rasters.
    """
    if data[:2] != b"P5":
        raise PgmError("unsupported magic at offset 0 (binary PGM 'P5' required)")
    (width, height, maxval), pos = _read_header_ints(data, 2, 3)
    if width <= 0 or height <= 0:
        raise PgmError(f"non-positive dimensions in header ending at offset {pos}")
    if maxval <= 0 or maxval > 65535:
        raise PgmError(f"maxval {maxval} out of range at offset {pos}")
    if pos >= len(data) or data[pos] not in _WHITESPACE:
        raise PgmError(f"missing whitespace before raster at offset {pos}")
    pos += 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    expected = width * height * dtype.itemsize
    raster = data[pos : pos + expected]
    if len(raster) < expected:
        raise PgmError(
            f"truncated raster at offset {pos + len(raster)}: "
            f"expected {expected} bytes, found {len(raster)}"
        )
    values = np.frombuffer(raster, dtype=dtype).astype(np.float64).reshape(height, width)
    return GrayImage(values / maxval)


def save_pgm(img: GrayImage, maxval: int = 65535) -> bytes:
    """Encode as binary PGM; intensities quantize round-half-up to maxval."""
    if maxval not in (255, 65535):
        raise ConfigError(f"maxval must be 255 or 65535, got {maxval}")
    header = f"P5\n{img.width} {img.height}\n{maxval}\n".encode("ascii")
    quantized = np.floor(img.pixels * maxval + 0.5).astype(np.uint32)
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    return header + quantized.astype(dtype).tobytes()


def _lerp(a, b, t):
    # a + t*(b - a) keeps endpoints and constants bit-exact, unlike the
    # (1-t)*a + t*b form.
    return a + t * (b - a)


def _bilinear_grid(pixels: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resample to (out_h, out_w) with half-pixel-center bilinear sampling."""
    in_h, in_w = pixels.shape
    sy = np.clip((np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5, 0.0, in_h - 1.0)
    sx = np.clip((np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5, 0.0, in_w - 1.0)
    y0 = np.floor(sy).astype(np.intp)
    x0 = np.floor(sx).astype(np.intp)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    fy = (sy - y0)[:, None]
    fx = (sx - x0)[None, :]
    top = _lerp(pixels[np.ix_(y0, x0)], pixels[np.ix_(y0, x1)], fx)
    bottom = _lerp(pixels[np.ix_(y1, x0)], pixels[np.ix_(y1, x1)], fx)
    return np.clip(_lerp(top, bottom, fy), 0.0, 1.0)


def resize_preserve_aspect(img: GrayImage, target: int) -> GrayImage:
    """Scale to fit a target x target square, padding with exact black.

    Both dimensions shrink (or grow) by the same factor target/max(w, h),
    so content is never distorted; the scaled content is centered and an
    odd leftover row/column of border goes to the bottom/right.
    """
    if target < 1:
        raise ConfigError("target side must be >= 1")
    w, h = img.width, img.height
    if w >= h:
        content_w = target
        content_h = max(1, int(round(h * target / w)))
    else:
        content_h = target
        content_w = max(1, int(round(w * target / h)))
    content = _bilinear_grid(img.pixels, content_h, content_w)
    out = np.zeros((target, target), dtype=np.float64)
    top = (target - content_h) // 2
    left = (target - content_w) // 2
    out[top : top + content_h, left : left + content_w] = content
    return GrayImage(out)


def clip_histogram(hist: np.ndarray, limit: float) -> np.ndarray:
    """Clip bins at `limit` and spread the excess uniformly in one pass.

    Total mass is conserved; bins may end slightly above the limit
    because redistribution is not iterated.
    """
    h = np.asarray(hist, dtype=np.float64)
    if limit <= 0:
        raise ValueError("limit must be positive")
    if h.size == 0 or h.min() < 0:
        raise ValueError("histogram must be non-empty with non-negative counts")
    excess = np.maximum(h - limit, 0.0).sum()
    return np.minimum(h, limit) + excess / h.size


def _tile_bounds(extent: int, tiles: int) -> np.ndarray:
    return (np.arange(tiles + 1) * extent) // tiles


def _level_index(pixels: np.ndarray, n_bins: int) -> np.ndarray:
    return np.minimum((pixels * n_bins).astype(np.intp), n_bins - 1)


def clahe(img: GrayImage, params: ClaheParams) -> GrayImage:
    """Contrast-limited adaptive histogram equalization.

    Each tile builds an n_bins histogram, clips it at
    clip_factor * tile_pixels / n_bins, and forms the cumulative
    distribution G; the tile maps level f to
    (p_max - p_min) * G(f) + p_min.  Every pixel blends the mappings of
    its up-to-four nearest tile centers with bilinear weights, clamped
    at the borders.  A constant image is a fixed point: p_max == p_min
    collapses the mapping to the constant itself.
    """
    h, w = img.height, img.width
    if h < params.tile_rows or w < params.tile_cols:
        raise ConfigError(
            f"image {w}x{h} too small for a {params.tile_cols}x{params.tile_rows} tile grid"
        )
    row_bounds = _tile_bounds(h, params.tile_rows)
    col_bounds = _tile_bounds(w, params.tile_cols)

    luts = np.empty((params.tile_rows, params.tile_cols, params.n_bins), dtype=np.float64)
    for r in range(params.tile_rows):
        for c in range(params.tile_cols):
            tile = img.pixels[row_bounds[r] : row_bounds[r + 1], col_bounds[c] : col_bounds[c + 1]]
            levels = _level_index(tile, params.n_bins)
            hist = np.bincount(levels.ravel(), minlength=params.n_bins).astype(np.float64)
            limit = params.clip_factor * tile.size / params.n_bins
            hist = clip_histogram(hist, limit)
            cdf = np.cumsum(hist) / hist.sum()
            p_min = tile.min()
            p_max = tile.max()
            luts[r, c] = (p_max - p_min) * cdf + p_min

    row_lo, row_hi, wy = _center_weights(np.arange(h), row_bounds)
    col_lo, col_hi, wx = _center_weights(np.arange(w), col_bounds)
    levels = _level_index(img.pixels, params.n_bins)

    r0 = row_lo[:, None]
    r1 = row_hi[:, None]
    c0 = col_lo[None, :]
    c1 = col_hi[None, :]
    wy = wy[:, None]
    wx = wx[None, :]
    top = _lerp(luts[r0, c0, levels], luts[r0, c1, levels], wx)
    bottom = _lerp(luts[r1, c0, levels], luts[r1, c1, levels], wx)
    return GrayImage(np.clip(_lerp(top, bottom, wy), 0.0, 1.0))


def _center_weights(coords: np.ndarray, bounds: np.ndarray):
    """Bracketing tile indices and blend weight for each pixel coordinate.

    Tile centers sit at the midpoint of each tile's pixel range; pixels
    outside the first/last center clamp to weight 0/1.
    """
    centers = (bounds[:-1] + bounds[1:] - 1) / 2.0
    tiles = len(centers)
    if tiles == 1:
        zero = np.zeros(len(coords), dtype=np.intp)
        return zero, zero, np.zeros(len(coords), dtype=np.float64)
    lo = np.clip(np.searchsorted(centers, coords, side="right") - 1, 0, tiles - 2)
    hi = lo + 1
    weight = np.clip((coords - centers[lo]) / (centers[hi] - centers[lo]), 0.0, 1.0)
    return lo, hi, weight
