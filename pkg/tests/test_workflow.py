"""Graph construction, validation, content-addressed caching, and the
JSON wire forms.

The caching contract is the interesting part: keys are derived from the
operation name, its canonical parameters, and the content digests of
its inputs -- never from node ids or run-time knobs -- so equivalent
work is shared across graphs, across rebuilds, and across thread
counts, while any upstream content change invalidates exactly the
downstream nodes.
"""

import json

import numpy as np
import pytest

from conftest import make_smooth_grid

from demflow.grid import DemGrid, RegionAABB
from demflow.overlay import Colormap, MipPyramid
from demflow.simulate import AvalancheParams, ReleaseMask, SnowParams
from demflow.terrain import TerrainError
from demflow import workflow as wf
from demflow.workflow import (
    CACHE_HIT,
    EXECUTED,
    ExecContext,
    Executor,
    Graph,
    GraphValidationError,
    Kind,
    MaskRelease,
    NodeExecutionError,
    NodeOutput,
    SHARED_PREFIX_IDS,
    SourceRef,
    SteepnessRelease,
    WorkflowError,
    build_avalanche_graph,
    build_snow_graph,
    colormap_from_json,
    colormap_to_json,
    default_tile_zoom,
    graph_from_json,
    graph_to_json,
    params_from_json,
    params_to_json,
    region_from_json,
    region_to_json,
    source_value_from_json,
    validate,
)


QUICK = AvalancheParams(particles_per_release_cell=16, seed=3)


def small_world(seed=11):
    return make_smooth_grid(seed, ncols=24, nrows=20)


def snow_params():
    return SnowParams(snow_line_m=40.0, altitude_blend_m=30.0)


def ready_snow_graph(grid, **kw):
    g = build_snow_graph(grid.extent, snow_params(), **kw)
    g.bind("world", grid)
    return g


def ready_avalanche_graph(grid, release=None, params=QUICK, **kw):
    release = release if release is not None else SteepnessRelease(10.0, 60.0)
    g = build_avalanche_graph(grid.extent, params, release, **kw)
    g.bind("world", grid)
    return g


# -- builders ------------------------------------------------------------


def test_avalanche_builder_steepness_variant_shape():
    g = build_avalanche_graph(
        RegionAABB(0, 0, 100, 100), QUICK, SteepnessRelease(30.0, 45.0, stride=2)
    )
    assert [n.id for n in g.nodes] == list(SHARED_PREFIX_IDS) + [
        "release_points",
        "avalanche_overlay",
    ]
    assert set(g.sources) == {"region", "world", "params"}
    assert g.sources["region"].bound
    assert g.sources["params"].bound
    assert not g.sources["world"].bound
    rp = g.node("release_points")
    assert rp.params == {
        "min_steepness_deg": 30.0,
        "max_steepness_deg": 45.0,
        "stride": 2,
    }
    assert g.node("avalanche_overlay").inputs["mask"] == NodeOutput(
        "release_points", "mask"
    )


def test_avalanche_builder_mask_variant_shape():
    mask = ReleaseMask(np.zeros((4, 4), dtype=bool))
    g = build_avalanche_graph(
        RegionAABB(0, 0, 10, 10), QUICK, MaskRelease(mask), zoom=0
    )
    assert [n.id for n in g.nodes] == list(SHARED_PREFIX_IDS) + ["avalanche_overlay"]
    assert set(g.sources) == {"region", "world", "params", "mask"}
    assert g.sources["mask"].bound
    assert g.node("avalanche_overlay").inputs["mask"] == SourceRef("mask")


def test_snow_builder_shape():
    g = build_snow_graph(RegionAABB(0, 0, 10, 10), snow_params())
    assert [n.id for n in g.nodes] == list(SHARED_PREFIX_IDS) + ["snow_overlay"]
    assert set(g.sources) == {"region", "world", "params"}
    ov = g.node("snow_overlay")
    assert ov.inputs["dem"] == NodeOutput("stitch_tiles", "dem")
    assert ov.inputs["slope"] == NodeOutput("steepness", "slope")


def test_builder_zoom_parameter_lands_on_select_tiles():
    g = build_snow_graph(RegionAABB(0, 0, 10, 10), snow_params(), zoom=3)
    assert g.node("select_tiles").params == {"zoom": 3}


def test_builder_colormap_lands_on_overlay_node():
    cmap = Colormap(stops=((0.0, (0, 0, 0, 0)), (1.0, (255, 0, 0, 255))))
    g = build_avalanche_graph(
        RegionAABB(0, 0, 10, 10), QUICK, SteepnessRelease(), colormap=cmap
    )
    assert g.node("avalanche_overlay").params == {
        "colormap": colormap_to_json(cmap)
    }
    bare = build_avalanche_graph(
        RegionAABB(0, 0, 10, 10), QUICK, SteepnessRelease()
    )
    assert bare.node("avalanche_overlay").params == {"colormap": None}


def test_builder_rejects_unknown_release_source():
    with pytest.raises(WorkflowError, match="release_source"):
        build_avalanche_graph(
            RegionAABB(0, 0, 10, 10), QUICK, "thirty-to-45"
        )


def test_default_tile_zoom_splits_only_when_tiles_stay_valid():
    assert default_tile_zoom(make_smooth_grid(1, ncols=4, nrows=4)) == 1
    assert default_tile_zoom(make_smooth_grid(1, ncols=3, nrows=9)) == 0
    assert default_tile_zoom(make_smooth_grid(1, ncols=9, nrows=3)) == 0


# -- graph plumbing ------------------------------------------------------


def test_duplicate_source_name_rejected():
    g = Graph()
    g.add_source("region", Kind.REGION, RegionAABB(0, 0, 1, 1))
    with pytest.raises(WorkflowError, match="region"):
        g.add_source("region", Kind.REGION)


def test_bind_unknown_source_rejected():
    g = Graph()
    with pytest.raises(WorkflowError, match="nope"):
        g.bind("nope", 1)


def test_bind_chains():
    grid = small_world()
    g = build_snow_graph(grid.extent, snow_params())
    assert g.bind("world", grid) is g
    assert g.sources["world"].bound
    assert g.sources["world"].value is grid


def test_node_lookup_by_id():
    g = build_snow_graph(RegionAABB(0, 0, 1, 1), snow_params())
    assert g.node("steepness").op == "steepness"
    with pytest.raises(KeyError):
        g.node("ghost")


# -- validation ----------------------------------------------------------


def test_validate_accepts_stock_graphs_with_unbound_world():
    region = RegionAABB(0, 0, 50, 50)
    for g in (
        build_snow_graph(region, snow_params()),
        build_avalanche_graph(region, QUICK, SteepnessRelease()),
        build_avalanche_graph(
            region, QUICK, MaskRelease(ReleaseMask(np.zeros((3, 3), dtype=bool)))
        ),
    ):
        assert validate(g) == []


def violation_codes(g):
    return [v.code for v in validate(g)]


def test_validate_flags_duplicate_node_id():
    g = Graph()
    g.add_source("region", Kind.REGION, RegionAABB(0, 0, 1, 1))
    g.add_source("world", Kind.DEM_GRID)
    for _ in range(2):
        g.add_node(
            "pick",
            "select_tiles",
            inputs={"region": SourceRef("region"), "world": SourceRef("world")},
            params={"zoom": 0},
        )
    assert wf.DUPLICATE_ID in violation_codes(g)


def test_validate_flags_unknown_op():
    g = Graph()
    g.add_node("n", "warp_speed", inputs={})
    codes = violation_codes(g)
    assert codes == [wf.UNKNOWN_OP]


def test_validate_flags_missing_required_input():
    g = Graph()
    g.add_source("region", Kind.REGION, RegionAABB(0, 0, 1, 1))
    g.add_node("pick", "select_tiles", inputs={"region": SourceRef("region")})
    out = validate(g)
    assert [v.code for v in out] == [wf.UNBOUND_INPUT]
    assert "world" in out[0].message
    assert out[0].node_id == "pick"


def test_validate_flags_surplus_input():
    g = Graph()
    g.add_source("region", Kind.REGION, RegionAABB(0, 0, 1, 1))
    g.add_source("world", Kind.DEM_GRID)
    g.add_node(
        "pick",
        "select_tiles",
        inputs={
            "region": SourceRef("region"),
            "world": SourceRef("world"),
            "flavor": SourceRef("region"),
        },
    )
    assert violation_codes(g) == [wf.UNKNOWN_INPUT]


def test_validate_flags_unknown_source():
    g = Graph()
    g.add_source("region", Kind.REGION, RegionAABB(0, 0, 1, 1))
    g.add_node(
        "pick",
        "select_tiles",
        inputs={"region": SourceRef("region"), "world": SourceRef("planet")},
    )
    assert violation_codes(g) == [wf.UNKNOWN_SOURCE]


def test_validate_flags_unknown_upstream_node():
    g = Graph()
    g.add_node("s", "stitch_tiles", inputs={"tiles": NodeOutput("ghost", "tiles")})
    assert violation_codes(g) == [wf.UNKNOWN_NODE]


def test_validate_flags_unknown_upstream_port():
    g = Graph()
    g.add_source("region", Kind.REGION, RegionAABB(0, 0, 1, 1))
    g.add_source("world", Kind.DEM_GRID)
    g.add_node(
        "pick",
        "select_tiles",
        inputs={"region": SourceRef("region"), "world": SourceRef("world")},
    )
    g.add_node("s", "stitch_tiles", inputs={"tiles": NodeOutput("pick", "chunks")})
    assert violation_codes(g) == [wf.UNKNOWN_PORT]


def test_validate_flags_source_kind_mismatch():
    g = Graph()
    g.add_source("region", Kind.REGION, RegionAABB(0, 0, 1, 1))
    g.add_node(
        "pick",
        "select_tiles",
        inputs={"region": SourceRef("region"), "world": SourceRef("region")},
    )
    out = validate(g)
    assert [v.code for v in out] == [wf.KIND_MISMATCH]
    assert "DEM_GRID" in out[0].message and "REGION" in out[0].message


def test_validate_flags_upstream_kind_mismatch():
    g = Graph()
    g.add_source("region", Kind.REGION, RegionAABB(0, 0, 1, 1))
    g.add_source("world", Kind.DEM_GRID)
    g.add_node(
        "pick",
        "select_tiles",
        inputs={"region": SourceRef("region"), "world": SourceRef("world")},
    )
    # select_tiles emits a SCALAR tile list, not a DEM.
    g.add_node("n", "surface_normals", inputs={"dem": NodeOutput("pick", "tiles")})
    assert violation_codes(g) == [wf.KIND_MISMATCH]


def test_validate_flags_cycle():
    g = Graph()
    g.add_source("world", Kind.DEM_GRID)
    g.add_node(
        "f1",
        "fetch_tiles",
        inputs={"world": SourceRef("world"), "tiles": NodeOutput("f2", "tiles")},
    )
    g.add_node(
        "f2",
        "fetch_tiles",
        inputs={"world": SourceRef("world"), "tiles": NodeOutput("f1", "tiles")},
    )
    out = validate(g)
    assert [v.code for v in out] == [wf.CYCLE]
    assert "f1" in out[0].message and "f2" in out[0].message


def test_violation_str_names_code_and_node():
    g = Graph()
    g.add_node("n", "warp_speed", inputs={})
    text = str(validate(g)[0])
    assert text.startswith("UNKNOWN_OP at 'n':")


def test_execute_raises_grouped_validation_error():
    g = Graph()
    g.add_node("n", "warp_speed", inputs={})
    with pytest.raises(GraphValidationError) as err:
        Executor().execute(g)
    assert [v.code for v in err.value.violations] == [wf.UNKNOWN_OP]
    assert "UNKNOWN_OP" in str(err.value)
    assert isinstance(err.value, WorkflowError)


def test_execute_requires_bound_sources():
    g = build_snow_graph(RegionAABB(0, 0, 50, 50), snow_params())
    with pytest.raises(WorkflowError, match="sources without values: world"):
        Executor().execute(g)


# -- execution and results ----------------------------------------------


def test_snow_graph_runs_cold_and_reports_every_node_executed():
    grid = small_world()
    result = Executor().execute(ready_snow_graph(grid))
    report = result.report
    assert [r.node_id for r in report.records] == list(SHARED_PREFIX_IDS) + [
        "snow_overlay"
    ]
    assert report.executed == 6
    assert report.cache_hits == 0
    for r in report.records:
        assert r.status == EXECUTED
        assert r.op == r.node_id  # stock builders reuse op names as ids
        assert len(r.cache_key) == 64
        assert set(r.cache_key) <= set("0123456789abcdef")
        assert r.elapsed_ms >= 0.0


def test_result_exposes_terminal_outputs_and_arbitrary_ports():
    grid = small_world()
    result = Executor().execute(ready_snow_graph(grid))
    assert set(result.outputs) == {"snow_overlay.overlay"}
    pyramid = result.outputs["snow_overlay.overlay"]
    assert isinstance(pyramid, MipPyramid)
    assert result.value("snow_overlay", "overlay") is pyramid
    stitched = result.value("stitch_tiles", "dem")
    assert isinstance(stitched, DemGrid)
    assert np.array_equal(stitched.elevations, grid.elevations)
    with pytest.raises(KeyError, match="ghost"):
        result.value("ghost", "overlay")


def test_avalanche_graph_exposes_runout_overlay_and_stats():
    grid = small_world()
    result = Executor().execute(ready_avalanche_graph(grid))
    assert set(result.outputs) == {
        "avalanche_overlay.runout",
        "avalanche_overlay.overlay",
        "avalanche_overlay.stats",
    }
    stats = result.outputs["avalanche_overlay.stats"]
    assert set(stats) == {
        "released_particles",
        "particle_steps",
        "cells_hit",
        "z_delta_max_global",
    }
    runout = result.value("avalanche_overlay", "runout")
    assert stats["cells_hit"] == int(np.count_nonzero(runout.hit_count))
    assert stats["z_delta_max_global"] == pytest.approx(
        float(runout.z_delta_max.max())
    )
    mask = result.value("release_points", "mask")
    assert stats["released_particles"] == int(
        mask.mask.sum() * QUICK.particles_per_release_cell
    )


def test_reexecution_is_fully_cached():
    grid = small_world()
    ex = Executor()
    first = ex.execute(ready_snow_graph(grid))
    again = ex.execute(ready_snow_graph(grid))
    assert again.report.cache_hits == 6
    assert again.report.executed == 0
    for r in again.report.records:
        assert r.status == CACHE_HIT
        assert r.elapsed_ms == 0.0
    assert [r.cache_key for r in first.report.records] == [
        r.cache_key for r in again.report.records
    ]


def test_changing_snow_params_reexecutes_only_the_overlay_node():
    grid = small_world()
    ex = Executor()
    ex.execute(ready_snow_graph(grid))
    g2 = build_snow_graph(grid.extent, SnowParams(snow_line_m=55.0))
    g2.bind("world", grid)
    rerun = ex.execute(g2)
    assert rerun.report.status_of("snow_overlay") == EXECUTED
    for nid in SHARED_PREFIX_IDS:
        assert rerun.report.status_of(nid) == CACHE_HIT


def test_changing_avalanche_params_reexecutes_only_the_fused_overlay_node():
    grid = small_world()
    mask = ReleaseMask(
        np.asarray(
            np.arange(grid.nrows * grid.ncols).reshape(grid.nrows, grid.ncols) % 37
            == 0
        )
    )
    ex = Executor()
    ex.execute(ready_avalanche_graph(grid, release=MaskRelease(mask)))
    bumped = AvalancheParams(particles_per_release_cell=16, seed=3, persistence=0.5)
    rerun = ex.execute(
        ready_avalanche_graph(grid, release=MaskRelease(mask), params=bumped)
    )
    assert rerun.report.status_of("avalanche_overlay") == EXECUTED
    assert rerun.report.cache_hits == 5


def test_changing_release_band_reexecutes_release_and_overlay():
    grid = small_world()
    ex = Executor()
    ex.execute(ready_avalanche_graph(grid, release=SteepnessRelease(10.0, 60.0)))
    rerun = ex.execute(
        ready_avalanche_graph(grid, release=SteepnessRelease(5.0, 60.0))
    )
    assert rerun.report.status_of("release_points") == EXECUTED
    assert rerun.report.status_of("avalanche_overlay") == EXECUTED
    for nid in SHARED_PREFIX_IDS:
        assert rerun.report.status_of(nid) == CACHE_HIT


def test_changing_world_grid_invalidates_everything():
    ex = Executor()
    ex.execute(ready_snow_graph(small_world(1)))
    rerun = ex.execute(ready_snow_graph(small_world(2)))
    assert rerun.report.executed == 6


def test_cache_keys_ignore_node_ids():
    grid = small_world()
    ex = Executor()
    ex.execute(ready_snow_graph(grid))

    g = Graph()
    g.add_source("region", Kind.REGION, grid.extent)
    g.add_source("world", Kind.DEM_GRID, grid)
    g.add_source("params", Kind.PARAMS, snow_params())
    g.add_node(
        "a",
        "select_tiles",
        inputs={"region": SourceRef("region"), "world": SourceRef("world")},
        params={"zoom": 1},
    )
    g.add_node(
        "b",
        "fetch_tiles",
        inputs={"world": SourceRef("world"), "tiles": NodeOutput("a", "tiles")},
    )
    g.add_node("c", "stitch_tiles", inputs={"tiles": NodeOutput("b", "tiles")})
    g.add_node("d", "surface_normals", inputs={"dem": NodeOutput("c", "dem")})
    g.add_node("e", "steepness", inputs={"normals": NodeOutput("d", "normals")})
    g.add_node(
        "f",
        "snow_overlay",
        inputs={
            "dem": NodeOutput("c", "dem"),
            "slope": NodeOutput("e", "slope"),
            "params": SourceRef("params"),
        },
    )
    renamed = ex.execute(g)
    assert renamed.report.cache_hits == 6
    assert set(renamed.outputs) == {"f.overlay"}


def test_cache_keys_ignore_thread_count():
    grid = small_world()
    ex = Executor()
    cold = ex.execute(ready_avalanche_graph(grid), ExecContext(threads=1))
    warm = ex.execute(ready_avalanche_graph(grid), ExecContext(threads=4))
    assert warm.report.cache_hits == len(warm.report.records)
    assert [r.cache_key for r in cold.report.records] == [
        r.cache_key for r in warm.report.records
    ]


def test_avalanche_and_snow_graphs_share_the_terrain_prefix():
    grid = small_world()
    ex = Executor()
    ex.execute(ready_avalanche_graph(grid))
    snow = ex.execute(ready_snow_graph(grid))
    for nid in SHARED_PREFIX_IDS:
        assert snow.report.status_of(nid) == CACHE_HIT
    assert snow.report.status_of("snow_overlay") == EXECUTED


def test_zoom_changes_tiling_but_not_downstream_work():
    # Different tilings produce byte-identical stitched DEMs over the
    # full extent, so everything fed by stitched content replays from
    # cache even though the tile nodes themselves must rerun.
    grid = small_world()
    ex = Executor()
    ex.execute(ready_snow_graph(grid, zoom=1))
    rerun = ex.execute(ready_snow_graph(grid, zoom=0))
    assert rerun.report.status_of("select_tiles") == EXECUTED
    assert rerun.report.status_of("fetch_tiles") == EXECUTED
    assert rerun.report.status_of("stitch_tiles") == EXECUTED
    assert rerun.report.status_of("surface_normals") == CACHE_HIT
    assert rerun.report.status_of("steepness") == CACHE_HIT
    assert rerun.report.status_of("snow_overlay") == CACHE_HIT


def test_executors_do_not_share_caches():
    grid = small_world()
    Executor().execute(ready_snow_graph(grid))
    fresh = Executor().execute(ready_snow_graph(grid))
    assert fresh.report.executed == 6


def test_clear_empties_the_cache():
    grid = small_world()
    ex = Executor()
    ex.execute(ready_snow_graph(grid))
    assert len(ex) == 6
    ex.clear()
    assert len(ex) == 0
    assert ex.execute(ready_snow_graph(grid)).report.executed == 6


def tile_chain_graph(grid):
    g = Graph()
    g.add_source("region", Kind.REGION, grid.extent)
    g.add_source("world", Kind.DEM_GRID, grid)
    g.add_node(
        "select_tiles",
        "select_tiles",
        inputs={"region": SourceRef("region"), "world": SourceRef("world")},
        params={"zoom": 1},
    )
    g.add_node(
        "fetch_tiles",
        "fetch_tiles",
        inputs={
            "world": SourceRef("world"),
            "tiles": NodeOutput("select_tiles", "tiles"),
        },
    )
    g.add_node(
        "stitch_tiles",
        "stitch_tiles",
        inputs={"tiles": NodeOutput("fetch_tiles", "tiles")},
    )
    return g


def test_lru_bound_keeps_a_graph_sized_working_set():
    grid = small_world()
    ex = Executor(max_entries=3)
    ex.execute(tile_chain_graph(grid))
    assert len(ex) == 3
    assert ex.execute(tile_chain_graph(grid)).report.cache_hits == 3


def test_lru_bound_smaller_than_graph_evicts_in_execution_order():
    grid = small_world()
    ex = Executor(max_entries=2)
    ex.execute(tile_chain_graph(grid))
    assert len(ex) == 2
    # Each rerun of the three-node chain re-evicts its own head before
    # reaching it again, so nothing ever replays.
    assert ex.execute(tile_chain_graph(grid)).report.cache_hits == 0
    assert len(ex) == 2


def select_only_graph(grid, zoom):
    g = Graph()
    g.add_source("region", Kind.REGION, grid.extent)
    g.add_source("world", Kind.DEM_GRID, grid)
    g.add_node(
        "select_tiles",
        "select_tiles",
        inputs={"region": SourceRef("region"), "world": SourceRef("world")},
        params={"zoom": zoom},
    )
    return g


def test_lru_refreshes_entries_on_hit():
    grid = small_world()
    ex = Executor(max_entries=3)
    ex.execute(tile_chain_graph(grid))  # cache: select, fetch, stitch
    # Touching the oldest entry must promote it, so the next insertion
    # evicts fetch_tiles instead.  A FIFO cache would fail this: the
    # untouched select entry would be the one to go.
    assert ex.execute(select_only_graph(grid, 1)).report.cache_hits == 1
    assert ex.execute(select_only_graph(grid, 0)).report.executed == 1
    report = ex.execute(tile_chain_graph(grid)).report
    assert report.status_of("select_tiles") == CACHE_HIT
    assert report.status_of("fetch_tiles") == EXECUTED


def test_executor_rejects_nonpositive_bound():
    with pytest.raises(WorkflowError, match="max_entries"):
        Executor(max_entries=0)


def test_node_failures_carry_node_identity():
    elev = np.full((8, 8), 5.0)
    elev[3, 3] = -9999.0
    grid = DemGrid(
        ncols=8, nrows=8, origin_x=0.0, origin_y=0.0, cellsize=1.0,
        elevations=elev, nodata=-9999.0,
    )
    with pytest.raises(NodeExecutionError) as err:
        Executor().execute(ready_snow_graph(grid))
    assert err.value.node_id == "surface_normals"
    assert isinstance(err.value.cause, TerrainError)
    assert "surface_normals" in str(err.value)
    assert isinstance(err.value, WorkflowError)


def test_results_are_deterministic_across_executors():
    grid = small_world(29)
    a = Executor().execute(ready_avalanche_graph(grid))
    b = Executor().execute(ready_avalanche_graph(grid))
    assert a.outputs["avalanche_overlay.stats"] == b.outputs[
        "avalanche_overlay.stats"
    ]
    pa = a.outputs["avalanche_overlay.overlay"]
    pb = b.outputs["avalanche_overlay.overlay"]
    assert np.array_equal(pa.levels[0].pixels, pb.levels[0].pixels)


def test_report_status_of_unknown_node():
    grid = small_world()
    result = Executor().execute(ready_snow_graph(grid))
    with pytest.raises(KeyError):
        result.report.status_of("ghost")


# -- JSON forms ----------------------------------------------------------


def test_graph_json_round_trip_replays_from_cache():
    grid = small_world()
    cmap = Colormap(stops=((0.0, (10, 20, 30, 0)), (1.0, (200, 100, 0, 255))))
    g = build_avalanche_graph(
        grid.extent, QUICK, SteepnessRelease(12.0, 55.0), colormap=cmap
    )
    doc = json.loads(json.dumps(graph_to_json(g)))  # must be pure JSON

    g2 = graph_from_json(doc)
    assert not g2.sources["world"].bound  # bulky kinds never inline
    assert g2.sources["region"].bound
    assert g2.sources["params"].bound

    ex = Executor()
    g.bind("world", grid)
    g2.bind("world", grid)
    first = ex.execute(g)
    again = ex.execute(g2)
    assert again.report.cache_hits == 7
    assert [r.cache_key for r in first.report.records] == [
        r.cache_key for r in again.report.records
    ]


def test_graph_json_mask_source_serializes_unbound():
    grid = small_world()
    mask = ReleaseMask(np.eye(5, dtype=bool))
    g = build_avalanche_graph(grid.extent, QUICK, MaskRelease(mask))
    doc = graph_to_json(g)
    assert doc["sources"]["mask"] == {"kind": "RELEASE_MASK", "value": None}
    g2 = graph_from_json(doc)
    assert not g2.sources["mask"].bound
    g2.bind("world", grid)
    with pytest.raises(WorkflowError, match="sources without values: mask"):
        Executor().execute(g2)
    g2.bind("mask", ReleaseMask(np.zeros((grid.nrows, grid.ncols), dtype=bool)))
    Executor().execute(g2)  # now complete


def test_graph_from_json_rejects_malformed_documents():
    with pytest.raises(WorkflowError, match="must be an object"):
        graph_from_json([1, 2])
    with pytest.raises(WorkflowError, match="kind"):
        graph_from_json({"sources": {"x": {}}})
    with pytest.raises(WorkflowError, match="unknown kind"):
        graph_from_json({"sources": {"x": {"kind": "BLOB"}}})
    with pytest.raises(WorkflowError, match="'id' and 'op'"):
        graph_from_json({"nodes": [{"op": "steepness"}]})
    with pytest.raises(WorkflowError, match="reference"):
        graph_from_json(
            {"nodes": [{"id": "n", "op": "steepness", "inputs": {"normals": 7}}]}
        )
    with pytest.raises(WorkflowError, match="'source' or 'node'"):
        graph_from_json(
            {"nodes": [{"id": "n", "op": "steepness", "inputs": {"normals": {}}}]}
        )


def test_source_value_round_trips_by_kind():
    region = RegionAABB(-3.5, 2.0, 10.0, 20.25)
    assert region_from_json(region_to_json(region)) == region
    with pytest.raises(WorkflowError, match="min_x"):
        region_from_json({"min_x": 0})

    av = AvalancheParams(persistence=0.7, seed=42)
    doc = params_to_json(av)
    assert doc["model"] == "avalanche"
    assert params_from_json(doc) == av
    sp = SnowParams(snow_line_m=1800.0)
    doc = params_to_json(sp)
    assert doc["model"] == "snow"
    assert params_from_json(doc) == sp


def test_params_from_json_rejects_bad_documents():
    with pytest.raises(WorkflowError, match="model"):
        params_from_json({"persistence": 0.5})
    with pytest.raises(WorkflowError, match="unknown params model"):
        params_from_json({"model": "lava"})
    with pytest.raises(WorkflowError, match="bad params fields"):
        params_from_json({"model": "avalanche", "speed": 3})


def test_colormap_round_trip():
    cmap = Colormap(
        stops=((0.0, (1, 2, 3, 4)), (0.5, (5, 6, 7, 8)), (1.0, (9, 10, 11, 12))),
        zero_transparent=False,
    )
    assert colormap_from_json(colormap_to_json(cmap)) == cmap
    with pytest.raises(WorkflowError, match="stops"):
        colormap_from_json({"zero_transparent": True})


def test_dataset_references_resolve_through_the_callback():
    seen = []

    def resolver(name, kind):
        seen.append((name, kind))
        return small_world()

    value = source_value_from_json(Kind.DEM_GRID, "dataset:alps", resolver)
    assert isinstance(value, DemGrid)
    assert seen == [("alps", Kind.DEM_GRID)]
    with pytest.raises(WorkflowError, match="resolver"):
        source_value_from_json(Kind.DEM_GRID, "dataset:alps")
    with pytest.raises(WorkflowError, match="dataset:"):
        source_value_from_json(Kind.DEM_GRID, {"rows": []})
