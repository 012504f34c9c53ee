import numpy as np
import pytest

from demflow.grid import DemGrid, RegionAABB
from demflow.tiles import (
    StitchError,
    TileError,
    TileId,
    extract_tile_grid,
    select_tiles,
    split_grid,
    stitch,
    tile_extent,
)

from conftest import make_random_grid, make_smooth_grid

WORLD = RegionAABB(0.0, 0.0, 80.0, 40.0)


def grid_8x4(cs=10.0):
    z = np.arange(32, dtype=float).reshape(4, 8)
    return DemGrid(ncols=8, nrows=4, origin_x=0.0, origin_y=0.0, cellsize=cs,
                   nodata=-9999.0, elevations=z)


class TestTileId:
    def test_range_checks(self):
        TileId(0, 0, 0)
        TileId(2, 3, 0)
        with pytest.raises(TileError):
            TileId(0, 1, 0)
        with pytest.raises(TileError):
            TileId(1, 0, 2)
        with pytest.raises(TileError):
            TileId(-1, 0, 0)


class TestTileExtent:
    def test_zoom0_is_world(self):
        assert tile_extent(WORLD, TileId(0, 0, 0)) == WORLD

    def test_zoom1_quarters(self):
        nw = tile_extent(WORLD, TileId(1, 0, 0))
        assert (nw.min_x, nw.min_y, nw.max_x, nw.max_y) == (0.0, 20.0, 40.0, 40.0)
        se = tile_extent(WORLD, TileId(1, 1, 1))
        assert (se.min_x, se.min_y, se.max_x, se.max_y) == (40.0, 0.0, 80.0, 20.0)

    def test_ty_counts_southward(self):
        top = tile_extent(WORLD, TileId(1, 0, 0))
        bottom = tile_extent(WORLD, TileId(1, 0, 1))
        assert top.min_y > bottom.min_y


class TestSelectTiles:
    def test_whole_world_zoom0(self):
        assert select_tiles(WORLD, WORLD, 0) == [TileId(0, 0, 0)]

    def test_order_row_major_ty_then_tx(self):
        got = select_tiles(WORLD, WORLD, 1)
        assert got == [TileId(1, 0, 0), TileId(1, 1, 0), TileId(1, 0, 1), TileId(1, 1, 1)]

    def test_small_region_hits_one_tile(self):
        region = RegionAABB(1.0, 1.0, 2.0, 2.0)  # deep in the south-west
        assert select_tiles(region, WORLD, 2) == [TileId(2, 0, 3)]

    def test_region_touching_tile_border_includes_both(self):
        region = RegionAABB(39.0, 19.0, 40.0, 20.0)  # NE corner on the center cross
        got = select_tiles(region, WORLD, 1)
        assert got == [TileId(1, 0, 0), TileId(1, 1, 0), TileId(1, 0, 1), TileId(1, 1, 1)]

    def test_region_partly_outside_clips(self):
        region = RegionAABB(-100.0, -100.0, 1.0, 1.0)
        assert select_tiles(region, WORLD, 1) == [TileId(1, 0, 1)]

    def test_disjoint_region_raises(self):
        with pytest.raises(TileError):
            select_tiles(RegionAABB(1000.0, 1000.0, 1001.0, 1001.0), WORLD, 1)

    def test_negative_zoom_raises(self):
        with pytest.raises(TileError):
            select_tiles(WORLD, WORLD, -1)


class TestExtractTileGrid:
    def test_zoom0_returns_whole_grid(self):
        g = grid_8x4()
        t = extract_tile_grid(g, WORLD, TileId(0, 0, 0))
        assert np.array_equal(t.elevations, g.elevations)
        assert (t.origin_x, t.origin_y) == (0.0, 0.0)

    def test_zoom1_partition_and_border_ownership(self):
        g = grid_8x4()
        # world split at x = 40: cell centers sit at 5, 15, ..., 75 so no
        # center lies on the seam; west tile gets columns 0..3
        nw = extract_tile_grid(g, WORLD, TileId(1, 0, 0))
        assert (nw.ncols, nw.nrows) == (4, 2)
        assert np.array_equal(nw.elevations, g.elevations[:2, :4])
        se = extract_tile_grid(g, WORLD, TileId(1, 1, 1))
        assert np.array_equal(se.elevations, g.elevations[2:, 4:])
        assert (se.origin_x, se.origin_y) == (40.0, 0.0)

    def test_center_on_seam_goes_to_lower_coordinate(self):
        # 5x4 cells of 10: x-centers 5..45, world seam at x = 25 lands
        # exactly on column 2's center -> the west tile owns it
        z = np.arange(20, dtype=float).reshape(4, 5)
        g = DemGrid(ncols=5, nrows=4, origin_x=0.0, origin_y=0.0, cellsize=10.0,
                    nodata=-9999.0, elevations=z)
        world = g.extent  # 50 x 40
        west = extract_tile_grid(g, world, TileId(1, 0, 0))
        east = extract_tile_grid(g, world, TileId(1, 1, 0))
        assert west.ncols == 3
        assert east.ncols == 2
        assert np.array_equal(west.elevations, g.elevations[:2, :3])
        assert np.array_equal(east.elevations, g.elevations[:2, 3:])

    def test_row_center_on_seam_goes_to_north(self):
        # 4x5 cells of 10: y-centers 5..45, seam at y = 25 on row 2's
        # center -> the north tile (lower ty) owns it
        z = np.arange(20, dtype=float).reshape(5, 4)
        g = DemGrid(ncols=4, nrows=5, origin_x=0.0, origin_y=0.0, cellsize=10.0,
                    nodata=-9999.0, elevations=z)
        world = g.extent  # 40 x 50
        north = extract_tile_grid(g, world, TileId(1, 0, 0))
        south = extract_tile_grid(g, world, TileId(1, 0, 1))
        assert north.nrows == 3
        assert south.nrows == 2
        assert np.array_equal(north.elevations, g.elevations[:3, :2])
        assert np.array_equal(south.elevations, g.elevations[3:, :2])

    def test_every_cell_owned_exactly_once(self):
        for seed in range(6):
            g = make_smooth_grid(seed)
            world = g.extent
            for zoom in (1, 2):
                owned = np.zeros((g.nrows, g.ncols), dtype=int)
                for _, sub in split_grid(g, world, zoom):
                    j0 = round((sub.origin_x - g.origin_x) / g.cellsize)
                    i1 = g.nrows - 1 - round((sub.origin_y - g.origin_y) / g.cellsize)
                    i0 = i1 - sub.nrows + 1
                    owned[i0 : i1 + 1, j0 : j0 + sub.ncols] += 1
                assert np.all(owned == 1)

    def test_empty_tile_raises(self):
        # 2x2 grid, zoom 2: the 4x4 tile lattice has tiles holding no centers
        z = np.zeros((2, 2))
        g = DemGrid(ncols=2, nrows=2, origin_x=0.0, origin_y=0.0, cellsize=1.0,
                    nodata=-9999.0, elevations=z)
        with pytest.raises(TileError):
            extract_tile_grid(g, g.extent, TileId(2, 1, 1))


class TestStitch:
    def test_roundtrip_split_then_stitch(self):
        for seed in range(8):
            g = make_random_grid(seed)
            if g.ncols < 8 or g.nrows < 8:
                g = make_smooth_grid(seed, ncols=16, nrows=12)
            world = g.extent
            for zoom in (0, 1, 2):
                back = stitch(split_grid(g, world, zoom))
                assert np.array_equal(back.elevations, g.elevations)
                assert back.origin_x == g.origin_x and back.origin_y == g.origin_y
                assert back.cellsize == g.cellsize and back.nodata == g.nodata

    def test_single_tile(self):
        g = grid_8x4()
        back = stitch([(TileId(0, 0, 0), g)])
        assert np.array_equal(back.elevations, g.elevations)

    def test_missing_tile_rejected(self):
        g = grid_8x4()
        parts = split_grid(g, WORLD, 1)
        with pytest.raises(StitchError, match="missing"):
            stitch(parts[:-1])

    def test_duplicate_tile_rejected(self):
        g = grid_8x4()
        parts = split_grid(g, WORLD, 1)
        with pytest.raises(StitchError, match="duplicate"):
            stitch(parts + [parts[0]])

    def test_mixed_zoom_rejected(self):
        g = grid_8x4()
        with pytest.raises(StitchError, match="zoom"):
            stitch([(TileId(0, 0, 0), g), (TileId(1, 0, 0), g)])

    def test_inconsistent_cellsize_rejected(self):
        g = grid_8x4()
        parts = split_grid(g, WORLD, 1)
        t0, g0 = parts[0]
        wrong = DemGrid(ncols=g0.ncols, nrows=g0.nrows, origin_x=g0.origin_x,
                        origin_y=g0.origin_y, cellsize=g0.cellsize * 2,
                        nodata=g0.nodata, elevations=np.asarray(g0.elevations))
        with pytest.raises(StitchError, match="cellsize"):
            stitch([(t0, wrong)] + parts[1:])

    def test_ragged_heights_rejected(self):
        g = grid_8x4()
        parts = dict(
            ((t.tx, t.ty), sub) for t, sub in split_grid(g, WORLD, 1)
        )
        # shrink the north-west tile by one row
        nw = parts[(0, 0)]
        shrunk = DemGrid(ncols=nw.ncols, nrows=nw.nrows + 1,
                         origin_x=nw.origin_x, origin_y=nw.origin_y - nw.cellsize,
                         cellsize=nw.cellsize, nodata=nw.nodata,
                         elevations=np.vstack([nw.elevations, nw.elevations[-1:]]))
        bad = [(TileId(1, 0, 0), shrunk)] + [
            (TileId(1, tx, ty), sub) for (tx, ty), sub in parts.items() if (tx, ty) != (0, 0)
        ]
        with pytest.raises(StitchError, match="height"):
            stitch(bad)

    def test_empty_rejected(self):
        with pytest.raises(StitchError):
            stitch([])

    def test_stitch_preserves_parabola(self, parabola_grid):
        world = parabola_grid.extent
        back = stitch(split_grid(parabola_grid, world, 1))
        assert np.array_equal(back.elevations, parabola_grid.elevations)
