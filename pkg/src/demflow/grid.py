"""Elevation grids in a local metric frame.

Conventions used across the package:

* coordinates are meters in a local frame: x grows east, y grows north,
  z is elevation;
* ``elevations`` is a row-major ``(nrows, ncols)`` float64 array whose
  row 0 is the *northernmost* row;
* ``origin_x``/``origin_y`` locate the *lower-left corner* of the
  lower-left cell, so cell ``(row, col)`` is centered at
  ``(origin_x + (col + 0.5) * cellsize,
  origin_y + (nrows - 1 - row + 0.5) * cellsize)``.

Arrays are frozen after construction; treat all grid objects as
immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class GridError(ValueError):
    """Malformed grid data or parameters."""


class SampleError(ValueError):
    """Sampling outside the grid or across nodata cells."""


@dataclass(frozen=True)
class RegionAABB:
    """Axis-aligned box in world meters."""

    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def __post_init__(self):
        if not (self.min_x < self.max_x and self.min_y < self.max_y):
            raise GridError(
                f"degenerate region: [{self.min_x}, {self.max_x}] x "
                f"[{self.min_y}, {self.max_y}]"
            )

    @property
    def width(self) -> float:
        return self.max_x - self.min_x

    @property
    def height(self) -> float:
        return self.max_y - self.min_y

    def intersects(self, other: "RegionAABB") -> bool:
        """Closed-interval overlap test (touching edges count)."""
        return not (
            self.max_x < other.min_x
            or self.min_x > other.max_x
            or self.max_y < other.min_y
            or self.min_y > other.max_y
        )


@dataclass(frozen=True)
class DemGrid:
    """A rectangular elevation raster with georeferencing header."""

    ncols: int
    nrows: int
    origin_x: float
    origin_y: float
    cellsize: float
    nodata: float
    elevations: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.ncols < 2 or self.nrows < 2:
            raise GridError(f"grid must be at least 2x2, got {self.ncols}x{self.nrows}")
        if not (self.cellsize > 0):
            raise GridError(f"cellsize must be positive, got {self.cellsize}")
        if not math.isfinite(self.nodata):
            raise GridError("nodata sentinel must be finite")
        elev = np.asarray(self.elevations, dtype=np.float64)
        if elev.shape != (self.nrows, self.ncols):
            raise GridError(
                f"elevation array shape {elev.shape} does not match "
                f"nrows={self.nrows}, ncols={self.ncols}"
            )
        valued = elev[elev != self.nodata]
        if valued.size and not np.all(np.isfinite(valued)):
            raise GridError("non-nodata elevations must be finite")
        elev = np.ascontiguousarray(elev)
        elev.flags.writeable = False
        object.__setattr__(self, "elevations", elev)

    # -- geometry ----------------------------------------------------

    @property
    def extent(self) -> RegionAABB:
        return RegionAABB(
            self.origin_x,
            self.origin_y,
            self.origin_x + self.ncols * self.cellsize,
            self.origin_y + self.nrows * self.cellsize,
        )

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        return (
            self.origin_x + (col + 0.5) * self.cellsize,
            self.origin_y + (self.nrows - 1 - row + 0.5) * self.cellsize,
        )

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """Cell (row, col) containing a point; boundary points clamp inward."""
        col = int(math.floor((x - self.origin_x) / self.cellsize))
        s = int(math.floor((y - self.origin_y) / self.cellsize))
        col = min(max(col, 0), self.ncols - 1)
        s = min(max(s, 0), self.nrows - 1)
        return self.nrows - 1 - s, col

    def contains(self, x: float, y: float) -> bool:
        e = self.extent
        return e.min_x <= x <= e.max_x and e.min_y <= y <= e.max_y

    def has_nodata(self) -> bool:
        return bool(np.any(self.elevations == self.nodata))


def sample_elevation(grid: DemGrid, x: float, y: float) -> float:
    """Bilinear elevation at a world position.

    Within half a cell of the border the sample clamps to the nearest
    interior patch.  Raises SampleError outside the grid extent or when
    any of the four surrounding samples is nodata.

    The arithmetic sequence here is mirrored by the vectorized sampler
    in simulate.py and the descent oracle in terrain.py; keep all three
    in lockstep.
    """
    if not grid.contains(x, y):
        raise SampleError(f"position ({x}, {y}) outside grid extent")
    e = grid.elevations
    cs = grid.cellsize
    u = (x - grid.origin_x) / cs - 0.5
    v = (y - grid.origin_y) / cs - 0.5
    u = min(max(u, 0.0), grid.ncols - 1.0)
    v = min(max(v, 0.0), grid.nrows - 1.0)
    j0 = min(int(math.floor(u)), grid.ncols - 2)
    s0 = min(int(math.floor(v)), grid.nrows - 2)
    wu = u - j0
    wv = v - s0
    i1 = grid.nrows - 1 - s0  # south row of the patch
    i0 = i1 - 1               # north row
    z00 = e[i1, j0]
    z10 = e[i1, j0 + 1]
    z01 = e[i0, j0]
    z11 = e[i0, j0 + 1]
    nd = grid.nodata
    if z00 == nd or z10 == nd or z01 == nd or z11 == nd:
        raise SampleError(f"nodata in bilinear neighborhood of ({x}, {y})")
    gx_s = z10 - z00
    gx_n = z11 - z01
    zs = z00 + gx_s * wu
    zn = z01 + gx_n * wu
    return float(zs + (zn - zs) * wv)


# -- synthetic dataset ----------------------------------------------


PARABOLA_NCOLS = 501
PARABOLA_NROWS = 151
PARABOLA_CELLSIZE = 10.0
PARABOLA_HEIGHT = 1000.0
PARABOLA_LENGTH = 4000.0
PARABOLA_RELEASE_COL = 10
_PARABOLA_NODATA = -9999.0


def parabola_profile(x: np.ndarray | float) -> np.ndarray | float:
    """Slope profile: quadratic ramp easing into a flat valley floor.

    z(x) = H * (1 - x / L)^2 for x <= L, and 0 beyond.
    """
    x = np.asarray(x, dtype=np.float64)
    t = 1.0 - x / PARABOLA_LENGTH
    z = PARABOLA_HEIGHT * t * t
    return np.where(x <= PARABOLA_LENGTH, z, 0.0)


def gen_parabola() -> tuple[DemGrid, np.ndarray]:
    """Build the bundled benchmark slope and its release-cell mask.

    501 x 151 cells of 10 m; elevation varies only along x, falling from
    1000 m at the west edge to a flat valley floor.  The origin is
    chosen so column centers land on x = 0, 10, 20, ... meters.  The
    mask marks a 3-cell column (center row and both neighbors) near the
    top of the slope.

    Returns (grid, mask) with mask a boolean (nrows, ncols) array.
    """
    col_x = np.arange(PARABOLA_NCOLS, dtype=np.float64) * PARABOLA_CELLSIZE
    profile = parabola_profile(col_x)
    elev = np.broadcast_to(profile, (PARABOLA_NROWS, PARABOLA_NCOLS)).copy()
    grid = DemGrid(
        ncols=PARABOLA_NCOLS,
        nrows=PARABOLA_NROWS,
        origin_x=-PARABOLA_CELLSIZE / 2.0,
        origin_y=-PARABOLA_CELLSIZE / 2.0,
        cellsize=PARABOLA_CELLSIZE,
        nodata=_PARABOLA_NODATA,
        elevations=elev,
    )
    mask = np.zeros((PARABOLA_NROWS, PARABOLA_NCOLS), dtype=bool)
    mid = PARABOLA_NROWS // 2
    mask[mid - 1 : mid + 2, PARABOLA_RELEASE_COL] = True
    return grid, mask
