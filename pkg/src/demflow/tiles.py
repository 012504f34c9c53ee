"""Quadtree tiling of a dataset's world box.

Zoom level 0 is a single tile covering the whole world box; each level
quarters its parent.  ``tx`` counts tile columns eastward, ``ty`` counts
tile rows southward (tile row 0 is the northernmost).  Tiles partition
the grid without overlap: a cell whose center falls exactly on a shared
tile border belongs to the tile with the lower coordinate (the western
or northern one).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grid import DemGrid, GridError, RegionAABB


class TileError(ValueError):
    """Invalid tile address or selection."""


class StitchError(ValueError):
    """Tile set cannot be assembled into a single grid."""


@dataclass(frozen=True)
class TileId:
    zoom: int
    tx: int
    ty: int

    def __post_init__(self):
        if self.zoom < 0:
            raise TileError(f"zoom must be >= 0, got {self.zoom}")
        n = 1 << self.zoom
        if not (0 <= self.tx < n and 0 <= self.ty < n):
            raise TileError(
                f"tile ({self.tx}, {self.ty}) out of range for zoom {self.zoom}"
            )


def tile_extent(world: RegionAABB, tile: TileId) -> RegionAABB:
    """World box covered by a tile."""
    n = 1 << tile.zoom
    tw = world.width / n
    th = world.height / n
    return RegionAABB(
        world.min_x + tile.tx * tw,
        world.max_y - (tile.ty + 1) * th,
        world.min_x + (tile.tx + 1) * tw,
        world.max_y - tile.ty * th,
    )


def select_tiles(region: RegionAABB, world: RegionAABB, zoom: int) -> list[TileId]:
    """Tiles at `zoom` whose extent intersects `region` (closed test).

    Ordered by (ty, tx).  Raises TileError when the region and world
    are disjoint.
    """
    if zoom < 0:
        raise TileError(f"zoom must be >= 0, got {zoom}")
    if not region.intersects(world):
        raise TileError("region does not intersect the dataset world box")
    n = 1 << zoom
    tw = world.width / n
    th = world.height / n
    # smallest tx whose right edge reaches the region, largest whose left
    # edge does not pass it; touching edges are included
    tx_min = max(0, math.ceil((region.min_x - world.min_x) / tw - 1.0))
    tx_max = min(n - 1, math.floor((region.max_x - world.min_x) / tw))
    ty_min = max(0, math.ceil((world.max_y - region.max_y) / th - 1.0))
    ty_max = min(n - 1, math.floor((world.max_y - region.min_y) / th))
    return [
        TileId(zoom, tx, ty)
        for ty in range(ty_min, ty_max + 1)
        for tx in range(tx_min, tx_max + 1)
    ]


def _col_range(grid: DemGrid, x_lo: float, x_hi: float, leftmost: bool) -> tuple[int, int]:
    """Grid columns whose centers fall in (x_lo, x_hi]; [x_lo, x_hi] when
    the tile is leftmost.  Returns an inclusive (start, stop) pair."""
    cs = grid.cellsize
    b_lo = (x_lo - grid.origin_x) / cs
    b_hi = (x_hi - grid.origin_x) / cs
    if leftmost:
        j_min = math.ceil(b_lo - 0.5)
    else:
        j_min = math.floor(b_lo - 0.5) + 1
    j_max = math.floor(b_hi - 0.5)
    return max(j_min, 0), min(j_max, grid.ncols - 1)


def _row_range(grid: DemGrid, y_lo: float, y_hi: float, topmost: bool) -> tuple[int, int]:
    """Grid rows (north-first indices) whose centers fall in [y_lo, y_hi);
    closed on both ends when the tile is topmost."""
    cs = grid.cellsize
    top = grid.origin_y + grid.nrows * cs
    # depth below the grid's north edge, in cell units
    b_lo = (top - y_hi) / cs
    b_hi = (top - y_lo) / cs
    if topmost:
        i_min = math.ceil(b_lo - 0.5)
    else:
        i_min = math.floor(b_lo - 0.5) + 1
    i_max = math.floor(b_hi - 0.5)
    return max(i_min, 0), min(i_max, grid.nrows - 1)


def extract_tile_grid(grid: DemGrid, world: RegionAABB, tile: TileId) -> DemGrid:
    """Cut the sub-grid of cells owned by a tile.

    Ownership follows cell centers; centers on a shared border go to
    the lower tile coordinate.  Raises TileError when no cells fall in
    the tile.
    """
    ext = tile_extent(world, tile)
    j0, j1 = _col_range(grid, ext.min_x, ext.max_x, tile.tx == 0)
    i0, i1 = _row_range(grid, ext.min_y, ext.max_y, tile.ty == 0)
    if j0 > j1 or i0 > i1:
        raise TileError(f"tile {tile} contains no cells of the grid")
    sub = grid.elevations[i0 : i1 + 1, j0 : j1 + 1]
    return DemGrid(
        ncols=j1 - j0 + 1,
        nrows=i1 - i0 + 1,
        origin_x=grid.origin_x + j0 * grid.cellsize,
        origin_y=grid.origin_y + (grid.nrows - 1 - i1) * grid.cellsize,
        cellsize=grid.cellsize,
        nodata=grid.nodata,
        elevations=sub.copy(),
    )


def split_grid(grid: DemGrid, world: RegionAABB, zoom: int) -> list[tuple[TileId, DemGrid]]:
    """Split a grid into all tiles of a zoom level that hold cells."""
    out = []
    n = 1 << zoom
    for ty in range(n):
        for tx in range(n):
            tile = TileId(zoom, tx, ty)
            try:
                out.append((tile, extract_tile_grid(grid, world, tile)))
            except TileError:
                continue
    return out


def stitch(tiles: Sequence[tuple[TileId, DemGrid]]) -> DemGrid:
    """Assemble tile grids back into one grid, placing by tile coordinate.

    The tile ids must form a complete rectangle at a single zoom level;
    grids in one tile row must share heights, grids in one tile column
    must share widths, and cellsize/nodata must agree everywhere.  No
    resampling happens.
    """
    if not tiles:
        raise StitchError("no tiles to stitch")
    zooms = {t.zoom for t, _ in tiles}
    if len(zooms) != 1:
        raise StitchError(f"mixed zoom levels: {sorted(zooms)}")
    seen = {}
    for t, g in tiles:
        if (t.tx, t.ty) in seen:
            raise StitchError(f"duplicate tile coordinate ({t.tx}, {t.ty})")
        seen[(t.tx, t.ty)] = g
    txs = sorted({tx for tx, _ in seen})
    tys = sorted({ty for _, ty in seen})
    missing = [
        (tx, ty) for ty in tys for tx in txs if (tx, ty) not in seen
    ]
    if missing:
        raise StitchError(f"tile rectangle incomplete, missing {missing}")

    cellsizes = {g.cellsize for g in seen.values()}
    if len(cellsizes) != 1:
        offenders = sorted(
            f"({tx},{ty})={g.cellsize}" for (tx, ty), g in seen.items()
        )
        raise StitchError("inconsistent cellsize across tiles: " + ", ".join(offenders))
    nodatas = {g.nodata for g in seen.values()}
    if len(nodatas) != 1:
        raise StitchError(f"inconsistent nodata across tiles: {sorted(nodatas)}")

    for ty in tys:
        heights = {seen[(tx, ty)].nrows for tx in txs}
        if len(heights) != 1:
            raise StitchError(
                f"tiles in tile row {ty} have differing heights: {sorted(heights)}"
            )
    for tx in txs:
        widths = {seen[(tx, ty)].ncols for ty in tys}
        if len(widths) != 1:
            raise StitchError(
                f"tiles in tile column {tx} have differing widths: {sorted(widths)}"
            )

    rows = [
        np.hstack([seen[(tx, ty)].elevations for tx in txs]) for ty in tys
    ]
    elev = np.vstack(rows)
    sw = seen[(txs[0], tys[-1])]  # south-west tile anchors the origin
    try:
        return DemGrid(
            ncols=elev.shape[1],
            nrows=elev.shape[0],
            origin_x=sw.origin_x,
            origin_y=sw.origin_y,
            cellsize=sw.cellsize,
            nodata=sw.nodata,
            elevations=elev,
        )
    except GridError as exc:
        raise StitchError(str(exc)) from exc
