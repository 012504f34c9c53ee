"""Surface derivatives of elevation grids.

Normals use central differences in the grid interior and one-sided
differences on border rows/columns.  With x east, y north, z up and
row 0 at the north edge, the north neighbor of cell (i, j) is row
i - 1, so the y-derivative reads south-to-north through decreasing row
index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import DemGrid, SampleError

FLAT_GRADIENT_THRESHOLD = 1e-6  # m/m; below this the surface counts as flat


class TerrainError(ValueError):
    pass


@dataclass(frozen=True)
class NormalField:
    """Per-cell unit surface normals, shape (nrows, ncols, 3)."""

    normals: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = np.asarray(self.normals, dtype=np.float64)
        if n.ndim != 3 or n.shape[2] != 3:
            raise TerrainError(f"normals must be (nrows, ncols, 3), got {n.shape}")
        n = np.ascontiguousarray(n)
        n.flags.writeable = False
        object.__setattr__(self, "normals", n)

    @property
    def nrows(self) -> int:
        return self.normals.shape[0]

    @property
    def ncols(self) -> int:
        return self.normals.shape[1]


@dataclass(frozen=True)
class SlopeField:
    """Per-cell steepness in degrees, 0 = horizontal."""

    slope_deg: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = np.ascontiguousarray(np.asarray(self.slope_deg, dtype=np.float64))
        s.flags.writeable = False
        object.__setattr__(self, "slope_deg", s)

    @property
    def nrows(self) -> int:
        return self.slope_deg.shape[0]

    @property
    def ncols(self) -> int:
        return self.slope_deg.shape[1]


def compute_normals(grid: DemGrid) -> NormalField:
    """Unit normals per cell: normalize(-dz/dx, -dz/dy, 1).

    Requires a gap-free grid (no nodata cells).
    """
    if grid.has_nodata():
        raise TerrainError("normals require a gap-free grid (nodata present)")
    e = grid.elevations
    cs = grid.cellsize

    dzdx = np.empty_like(e)
    dzdx[:, 1:-1] = (e[:, 2:] - e[:, :-2]) / (2.0 * cs)
    dzdx[:, 0] = (e[:, 1] - e[:, 0]) / cs
    dzdx[:, -1] = (e[:, -1] - e[:, -2]) / cs

    # row 0 is north; z grows northward along decreasing row index
    dzdy = np.empty_like(e)
    dzdy[1:-1, :] = (e[:-2, :] - e[2:, :]) / (2.0 * cs)
    dzdy[0, :] = (e[0, :] - e[1, :]) / cs
    dzdy[-1, :] = (e[-2, :] - e[-1, :]) / cs

    n = np.empty(e.shape + (3,), dtype=np.float64)
    n[..., 0] = -dzdx
    n[..., 1] = -dzdy
    n[..., 2] = 1.0
    length = np.sqrt(n[..., 0] ** 2 + n[..., 1] ** 2 + 1.0)
    n /= length[..., None]
    return NormalField(n)


def steepness_deg(normals: NormalField) -> SlopeField:
    """Slope angle per cell: arccos of the normal's z component."""
    nz = np.clip(normals.normals[..., 2], -1.0, 1.0)
    return SlopeField(np.degrees(np.arccos(nz)))


def downslope_dir(grid: DemGrid, x: float, y: float) -> tuple[float, float] | None:
    """Unit direction of steepest descent of the bilinear surface at
    (x, y), or None where the horizontal gradient magnitude is below
    FLAT_GRADIENT_THRESHOLD.

    Positions within half a cell of the border use the nearest interior
    patch.  Raises SampleError outside the extent or on nodata.

    Keep the arithmetic in lockstep with the batch sampler in
    simulate.py.
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
    i1 = grid.nrows - 1 - s0
    i0 = i1 - 1
    z00 = e[i1, j0]
    z10 = e[i1, j0 + 1]
    z01 = e[i0, j0]
    z11 = e[i0, j0 + 1]
    nd = grid.nodata
    if z00 == nd or z10 == nd or z01 == nd or z11 == nd:
        raise SampleError(f"nodata in bilinear neighborhood of ({x}, {y})")
    gx_s = z10 - z00
    gx_n = z11 - z01
    gy_w = z01 - z00
    gy_e = z11 - z10
    dzdx = (gx_s + (gx_n - gx_s) * wv) / cs
    dzdy = (gy_w + (gy_e - gy_w) * wu) / cs
    gx = -dzdx
    gy = -dzdy
    mag = math.sqrt(gx * gx + gy * gy)
    if mag < FLAT_GRADIENT_THRESHOLD:
        return None
    return (gx / mag, gy / mag)


def oracle_descent_path(
    grid: DemGrid,
    start: tuple[float, float],
    step: float,
    runout_angle_deg: float = 25.0,
    max_steps: int | None = None,
) -> tuple[np.ndarray, str]:
    """Reference steepest-descent walk, independent of the particle engine.

    From `start`, repeatedly advances `step` meters along the local
    downslope direction.  Terminates on flat ground, on leaving the
    grid (the exit point is clipped to the border and kept), when the
    elevation angle from the current position back up to the start
    drops below `runout_angle_deg`, or after the step cap (default
    10 * max(ncols, nrows)).

    Returns (positions, reason) with positions shaped (n, 2) and reason
    one of "RUNOUT_ANGLE", "DOMAIN_EXIT", "FLAT", "MAX_STEPS".

    This is a plain scalar implementation kept free of any code shared
    with simulate.py, but its arithmetic ordering deliberately matches
    the engine so that a jitter-free, memory-free particle follows the
    identical float sequence.
    """
    if max_steps is None:
        max_steps = 10 * max(grid.ncols, grid.nrows)
    e = grid.elevations
    cs = grid.cellsize
    ox = grid.origin_x
    oy = grid.origin_y
    ncols = grid.ncols
    nrows = grid.nrows
    xmax = ox + ncols * cs
    ymax = oy + nrows * cs
    nd = grid.nodata
    tana = math.tan(math.radians(runout_angle_deg))

    def patch(px: float, py: float):
        u = (px - ox) / cs - 0.5
        v = (py - oy) / cs - 0.5
        u = min(max(u, 0.0), ncols - 1.0)
        v = min(max(v, 0.0), nrows - 1.0)
        j0 = min(int(math.floor(u)), ncols - 2)
        s0 = min(int(math.floor(v)), nrows - 2)
        wu = u - j0
        wv = v - s0
        i1 = nrows - 1 - s0
        z00 = e[i1, j0]
        z10 = e[i1, j0 + 1]
        z01 = e[i1 - 1, j0]
        z11 = e[i1 - 1, j0 + 1]
        if z00 == nd or z10 == nd or z01 == nd or z11 == nd:
            raise SampleError(f"nodata in bilinear neighborhood of ({px}, {py})")
        return z00, z10, z01, z11, wu, wv

    def height(px: float, py: float) -> float:
        z00, z10, z01, z11, wu, wv = patch(px, py)
        gx_s = z10 - z00
        gx_n = z11 - z01
        zs = z00 + gx_s * wu
        zn = z01 + gx_n * wu
        return zs + (zn - zs) * wv

    x, y = float(start[0]), float(start[1])
    if not grid.contains(x, y):
        raise SampleError(f"start ({x}, {y}) outside grid extent")
    z_rel = height(x, y)
    z_cur = z_rel
    rx, ry = x, y
    path = [(x, y)]
    steps = 0
    reason = "MAX_STEPS"
    while True:
        if steps >= 1:
            ddx = x - rx
            ddy = y - ry
            hdist = math.sqrt(ddx * ddx + ddy * ddy)
            if (z_rel - z_cur) < tana * hdist:
                reason = "RUNOUT_ANGLE"
                break
        if steps >= max_steps:
            reason = "MAX_STEPS"
            break

        z00, z10, z01, z11, wu, wv = patch(x, y)
        gx_s = z10 - z00
        gx_n = z11 - z01
        gy_w = z01 - z00
        gy_e = z11 - z10
        dzdx = (gx_s + (gx_n - gx_s) * wv) / cs
        dzdy = (gy_w + (gy_e - gy_w) * wu) / cs
        gx = -dzdx
        gy = -dzdy
        mag = math.sqrt(gx * gx + gy * gy)
        if mag < FLAT_GRADIENT_THRESHOLD:
            reason = "FLAT"
            break
        ux = gx / mag
        uy = gy / mag
        # renormalize, mirroring the engine's direction-blend step
        bm = math.sqrt(ux * ux + uy * uy)
        if bm < 1e-9:
            reason = "FLAT"
            break
        dx = ux / bm
        dy = uy / bm

        nx = x + step * dx
        ny = y + step * dy
        if nx < ox or nx > xmax or ny < oy or ny > ymax:
            if nx < ox:
                tx = (ox - x) / (nx - x)
            elif nx > xmax:
                tx = (xmax - x) / (nx - x)
            else:
                tx = 1.0
            if ny < oy:
                ty = (oy - y) / (ny - y)
            elif ny > ymax:
                ty = (ymax - y) / (ny - y)
            else:
                ty = 1.0
            t = min(tx, ty)
            cxp = x + (nx - x) * t
            cyp = y + (ny - y) * t
            path.append((cxp, cyp))
            reason = "DOMAIN_EXIT"
            break
        x, y = nx, ny
        z_cur = height(x, y)
        path.append((x, y))
        steps += 1

    return np.array(path, dtype=np.float64), reason


def hillshade(grid: DemGrid, azimuth_deg: float = 315.0, altitude_deg: float = 45.0) -> np.ndarray:
    """Lambertian hillshade of a grid, returned as a (nrows, ncols)
    uint8 gray image (0 dark .. 255 lit)."""
    normals = compute_normals(grid).normals
    az = math.radians(azimuth_deg)
    alt = math.radians(altitude_deg)
    # light vector pointing from the surface toward the sun
    lx = math.sin(az) * math.cos(alt)
    ly = math.cos(az) * math.cos(alt)
    lz = math.sin(alt)
    dot = normals[..., 0] * lx + normals[..., 1] * ly + normals[..., 2] * lz
    shade = np.clip(dot, 0.0, 1.0)
    return np.floor(shade * 255.0 + 0.5).astype(np.uint8)
