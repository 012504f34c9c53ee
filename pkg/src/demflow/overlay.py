"""RGBA overlay textures, mipmap pyramids, and map tiles.

Textures are straight-alpha uint8 RGBA, capped at 8192 pixels per axis
(the compute budget the renderer guarantees).  Pyramids are built in
premultiplied-alpha space: successive levels average exact 2x2 float
premultiplied values (edge rows/columns duplicated on odd dimensions),
and each stored level quantizes alpha first, then derives the straight
color against the *quantized* alpha.  That keeps every stored texel's
premultiplied value within 0.5/255 of the exact average, so level means
stay conserved to the same bound.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np
from PIL import Image

if TYPE_CHECKING:  # pragma: no cover
    from .simulate import RunoutRaster

TEXTURE_SIZE_LIMIT = 8192

RGBA = tuple[int, int, int, int]


class TextureLimitError(ValueError):
    """Texture exceeds the supported size."""


class OverlayError(ValueError):
    pass


class TileRangeError(ValueError):
    pass


class PngError(ValueError):
    pass


@dataclass(frozen=True)
class OverlayTexture:
    """Straight-alpha RGBA image, shape (height, width, 4) uint8."""

    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 3 or p.shape[2] != 4 or p.dtype != np.uint8:
            raise OverlayError(
                f"pixels must be (height, width, 4) uint8, got {p.shape} {p.dtype}"
            )
        h, w = p.shape[:2]
        if h < 1 or w < 1:
            raise OverlayError(f"texture must be at least 1x1, got {w}x{h}")
        if w > TEXTURE_SIZE_LIMIT or h > TEXTURE_SIZE_LIMIT:
            raise TextureLimitError(
                f"texture {w}x{h} exceeds the {TEXTURE_SIZE_LIMIT}x"
                f"{TEXTURE_SIZE_LIMIT} limit"
            )
        p = np.ascontiguousarray(p)
        p.flags.writeable = False
        object.__setattr__(self, "pixels", p)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class Colormap:
    """Piecewise-linear RGBA ramp over normalized [0, 1] values."""

    stops: tuple[tuple[float, RGBA], ...]
    zero_transparent: bool = True

    def __post_init__(self):
        if len(self.stops) < 2:
            raise OverlayError("colormap needs at least two stops")
        values = [v for v, _ in self.stops]
        if values[0] != 0.0 or values[-1] != 1.0:
            raise OverlayError("colormap stops must start at 0 and end at 1")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise OverlayError("colormap stop values must be strictly increasing")
        for _, color in self.stops:
            if len(color) != 4 or any(not (0 <= c <= 255) for c in color):
                raise OverlayError(f"invalid RGBA color {color}")


DEFAULT_RUNOUT_COLORMAP = Colormap(
    stops=(
        (0.0, (33, 102, 172, 255)),
        (0.35, (103, 169, 207, 255)),
        (0.65, (253, 219, 105, 255)),
        (1.0, (178, 24, 43, 255)),
    ),
    zero_transparent=True,
)


def colorize(raster: "RunoutRaster | Any", cmap: Colormap) -> OverlayTexture:
    """Map a runout raster's max vertical drop through a colormap.

    Values are normalized by the raster maximum; with zero_transparent
    set, zero-valued cells come out fully transparent.  Rounding is
    half-up.
    """
    values = np.asarray(getattr(raster, "z_delta_max", raster), dtype=np.float64)
    if values.ndim != 2 or values.size == 0:
        raise OverlayError(f"expected a non-empty 2D raster, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise OverlayError("raster values must be finite")
    vmax = float(values.max())
    if vmax <= 0.0:
        if not cmap.zero_transparent:
            raise OverlayError("raster maximum is 0 and zeros are not transparent")
        t = np.zeros_like(values)
    else:
        t = values / vmax
    xp = np.array([v for v, _ in cmap.stops])
    pixels = np.empty(values.shape + (4,), dtype=np.uint8)
    for ch in range(4):
        fp = np.array([c[ch] for _, c in cmap.stops], dtype=np.float64)
        pixels[..., ch] = np.floor(np.interp(t, xp, fp) + 0.5).astype(np.uint8)
    if cmap.zero_transparent:
        pixels[..., 3] = np.where(values == 0.0, 0, pixels[..., 3])
    return OverlayTexture(pixels)


@dataclass(frozen=True)
class MipPyramid:
    """Texture pyramid from full resolution down to 1x1."""

    levels: tuple[OverlayTexture, ...]

    def __post_init__(self):
        if not self.levels:
            raise OverlayError("pyramid must have at least one level")
        w, h = self.levels[0].width, self.levels[0].height
        expected = 1 + math.ceil(math.log2(max(w, h))) if max(w, h) > 1 else 1
        if len(self.levels) != expected:
            raise OverlayError(
                f"pyramid for {w}x{h} must have {expected} levels, got {len(self.levels)}"
            )
        for prev, cur in zip(self.levels, self.levels[1:]):
            ew = (prev.width + 1) // 2
            eh = (prev.height + 1) // 2
            if (cur.width, cur.height) != (ew, eh):
                raise OverlayError(
                    f"level {cur.width}x{cur.height} does not halve {prev.width}x{prev.height}"
                )
        last = self.levels[-1]
        if (last.width, last.height) != (1, 1):
            raise OverlayError("pyramid must end at a 1x1 level")

    @property
    def width(self) -> int:
        return self.levels[0].width

    @property
    def height(self) -> int:
        return self.levels[0].height


def _halve(channelled: np.ndarray) -> np.ndarray:
    """Average 2x2 blocks of a float array, duplicating the last
    row/column when a dimension is odd."""
    h, w = channelled.shape[:2]
    if h % 2:
        channelled = np.concatenate([channelled, channelled[-1:]], axis=0)
    if w % 2:
        channelled = np.concatenate([channelled, channelled[:, -1:]], axis=1)
    q00 = channelled[0::2, 0::2]
    q01 = channelled[0::2, 1::2]
    q10 = channelled[1::2, 0::2]
    q11 = channelled[1::2, 1::2]
    return ((q00 + q01) + (q10 + q11)) * 0.25


def build_mipmap(texture: OverlayTexture) -> MipPyramid:
    """Build the full pyramid down to 1x1.

    Averaging runs on an exact float premultiplied chain -- each level's
    float state is the average of the previous level's float state, not
    of its quantized texels -- so quantization error never compounds
    across levels.  Stored texels quantize alpha round-half-up, then the
    straight color against the quantized alpha.
    """
    levels = [texture]
    a = texture.pixels[..., 3].astype(np.float64)
    p = texture.pixels[..., :3].astype(np.float64) * a[..., None] / 255.0
    while max(a.shape) > 1:
        p = _halve(p)
        a = _halve(a)
        a8 = np.floor(a + 0.5)
        a8 = np.clip(a8, 0.0, 255.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            straight = (p * 255.0) / a8[..., None]
        c8 = np.where(
            a8[..., None] == 0.0,
            0.0,
            np.clip(np.floor(straight + 0.5), 0.0, 255.0),
        )
        pixels = np.empty(a8.shape + (4,), dtype=np.uint8)
        pixels[..., :3] = c8.astype(np.uint8)
        pixels[..., 3] = a8.astype(np.uint8)
        levels.append(OverlayTexture(pixels))
    return MipPyramid(tuple(levels))


def max_tile_zoom(width: int, height: int, tile_px: int = 256) -> int:
    """Deepest tile zoom: the smallest z where a 2^z x 2^z grid of
    tile_px tiles covers the full-resolution texture."""
    z = 0
    m = max(width, height)
    while (tile_px << z) < m:
        z += 1
    return z


def extract_tile(
    pyramid: MipPyramid, zoom: int, tx: int, ty: int, tile_px: int = 256
) -> OverlayTexture:
    """Cut a tile_px x tile_px tile from the pyramid.

    Zoom `max_tile_zoom(...)` reads full resolution; each lower zoom
    reads one pyramid level up.  The texture anchors at the tile grid's
    top-left; uncovered tile area is transparent black.
    """
    zmax = max_tile_zoom(pyramid.width, pyramid.height, tile_px)
    if not (0 <= zoom <= zmax):
        raise TileRangeError(f"zoom {zoom} outside [0, {zmax}]")
    n = 1 << zoom
    if not (0 <= tx < n and 0 <= ty < n):
        raise TileRangeError(f"tile ({tx}, {ty}) out of range at zoom {zoom}")
    level = pyramid.levels[zmax - zoom]
    src = level.pixels[
        ty * tile_px : (ty + 1) * tile_px, tx * tile_px : (tx + 1) * tile_px
    ]
    canvas = np.zeros((tile_px, tile_px, 4), dtype=np.uint8)
    canvas[: src.shape[0], : src.shape[1]] = src
    return OverlayTexture(canvas)


def encode_png(texture: OverlayTexture) -> bytes:
    """Lossless 8-bit RGBA PNG bytes (non-interlaced)."""
    img = Image.fromarray(np.array(texture.pixels), mode="RGBA")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> OverlayTexture:
    """Decode PNG bytes back into a texture; exact inverse of encode_png."""
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except Exception as exc:
        raise PngError(f"not a decodable PNG stream: {exc}") from exc
    if img.mode != "RGBA":
        img = img.convert("RGBA")
    return OverlayTexture(np.array(img, dtype=np.uint8))


def texture_from_gray(gray: np.ndarray) -> OverlayTexture:
    """Wrap a (h, w) uint8 gray image as an opaque RGBA texture."""
    g = np.asarray(gray, dtype=np.uint8)
    pixels = np.empty(g.shape + (4,), dtype=np.uint8)
    pixels[..., 0] = g
    pixels[..., 1] = g
    pixels[..., 2] = g
    pixels[..., 3] = 255
    return OverlayTexture(pixels)
