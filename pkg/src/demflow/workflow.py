"""Typed node graphs over terrain data, with content-addressed caching.

A graph wires operation nodes through kinded ports.  External inputs
(the region of interest, the world DEM, simulation parameters, an
optional hand-drawn release mask) enter as named sources declared on
the graph; a source may carry its value from construction or be bound
later, but every referenced source must be bound before execution.

The executor walks the graph in dependency order and skips any node
whose operation, parameters, and exact input values it has produced
before: cache keys are sha256 digests (256-bit; collisions are treated
as impossible) of content, never of node identity, so two graphs
sharing a prefix share its results.  The thread count lives on the
execution context and stays out of cache keys -- results are bitwise
thread-invariant, so threading is not identity.
"""

from __future__ import annotations

import hashlib
import json
import struct
import threading
import time
from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Callable, Mapping

import numpy as np

from .grid import DemGrid, RegionAABB
from .overlay import (
    DEFAULT_RUNOUT_COLORMAP,
    Colormap,
    MipPyramid,
    OverlayTexture,
    build_mipmap,
    colorize,
)
from .simulate import (
    AvalancheParams,
    ReleaseMask,
    RunoutRaster,
    SnowParams,
    compute_snow_from_slope,
    detect_release_points,
    released_particles,
    run_avalanche,
    total_particle_steps,
)
from .terrain import NormalField, SlopeField, compute_normals, steepness_deg
from .tiles import TileId, extract_tile_grid
from .tiles import select_tiles as select_region_tiles
from .tiles import stitch as stitch_tile_grids


class WorkflowError(ValueError):
    pass


class GraphValidationError(WorkflowError):
    def __init__(self, violations: list["Violation"]):
        self.violations = violations
        lines = "; ".join(str(v) for v in violations)
        super().__init__(f"invalid graph: {lines}")


class NodeExecutionError(WorkflowError):
    def __init__(self, node_id: str, op: str, cause: Exception):
        self.node_id = node_id
        self.cause = cause
        super().__init__(f"node '{node_id}' ({op}) failed: {cause}")


class Kind(str, Enum):
    """Port/value vocabulary of the graph type system."""

    REGION = "REGION"
    DEM_GRID = "DEM_GRID"
    NORMAL_FIELD = "NORMAL_FIELD"
    SLOPE_FIELD = "SLOPE_FIELD"
    RELEASE_MASK = "RELEASE_MASK"
    RUNOUT_RASTER = "RUNOUT_RASTER"
    TEXTURE = "TEXTURE"
    PYRAMID = "PYRAMID"
    SCALAR = "SCALAR"
    PARAMS = "PARAMS"


_KIND_TYPES: dict[Kind, type | tuple[type, ...]] = {
    Kind.REGION: RegionAABB,
    Kind.DEM_GRID: DemGrid,
    Kind.NORMAL_FIELD: NormalField,
    Kind.SLOPE_FIELD: SlopeField,
    Kind.RELEASE_MASK: ReleaseMask,
    Kind.RUNOUT_RASTER: RunoutRaster,
    Kind.TEXTURE: OverlayTexture,
    Kind.PYRAMID: MipPyramid,
    Kind.PARAMS: (AvalancheParams, SnowParams),
}


def check_kind(kind: Kind, value: Any, where: str) -> None:
    expected = _KIND_TYPES.get(kind)
    if expected is not None and not isinstance(value, expected):
        raise WorkflowError(
            f"{where}: kind {kind.value} expects "
            f"{expected.__name__ if isinstance(expected, type) else expected}, "
            f"got {type(value).__name__}"
        )


# -- references, sources, nodes ------------------------------------------


@dataclass(frozen=True)
class NodeOutput:
    """Reference to another node's output port."""

    node_id: str
    port: str


@dataclass(frozen=True)
class SourceRef:
    """Reference to a named graph source."""

    name: str


Ref = NodeOutput | SourceRef

_UNSET = object()


@dataclass
class SourceSlot:
    kind: Kind
    value: Any = _UNSET

    @property
    def bound(self) -> bool:
        return self.value is not _UNSET


@dataclass(frozen=True)
class Node:
    id: str
    op: str
    params: dict[str, Any] = field(default_factory=dict)
    inputs: dict[str, Ref] = field(default_factory=dict)


@dataclass
class Graph:
    """Ordered node list plus declared (and possibly pre-bound) sources."""

    nodes: list[Node] = field(default_factory=list)
    sources: dict[str, SourceSlot] = field(default_factory=dict)

    def add_source(self, name: str, kind: Kind, value: Any = _UNSET) -> SourceRef:
        if name in self.sources:
            raise WorkflowError(f"source '{name}' declared twice")
        if value is not _UNSET:
            check_kind(kind, value, f"source '{name}'")
        self.sources[name] = SourceSlot(kind, value)
        return SourceRef(name)

    def bind(self, name: str, value: Any) -> "Graph":
        slot = self.sources.get(name)
        if slot is None:
            raise WorkflowError(f"no source named '{name}'")
        check_kind(slot.kind, value, f"source '{name}'")
        slot.value = value
        return self

    def add_node(
        self,
        node_id: str,
        op: str,
        inputs: Mapping[str, Ref] | None = None,
        params: Mapping[str, Any] | None = None,
    ) -> NodeOutput:
        self.nodes.append(Node(node_id, op, dict(params or {}), dict(inputs or {})))
        return NodeOutput(node_id, "")

    def node(self, node_id: str) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)


# -- operations ---------------------------------------------------------


@dataclass(frozen=True)
class OpSpec:
    name: str
    inputs: dict[str, Kind]
    outputs: dict[str, Kind]
    fn: Callable[["ExecContext", dict[str, Any], dict[str, Any]], dict[str, Any]]


def _op_select_tiles(ctx, params, inputs):
    region: RegionAABB = inputs["region"]
    world: DemGrid = inputs["world"]
    tiles = select_region_tiles(region, world.extent, int(params["zoom"]))
    return {"tiles": tiles}


def _op_fetch_tiles(ctx, params, inputs):
    world: DemGrid = inputs["world"]
    extent = world.extent
    fetched = [(t, extract_tile_grid(world, extent, t)) for t in inputs["tiles"]]
    return {"tiles": fetched}


def _op_stitch_tiles(ctx, params, inputs):
    return {"dem": stitch_tile_grids(inputs["tiles"])}


def _op_surface_normals(ctx, params, inputs):
    return {"normals": compute_normals(inputs["dem"])}


def _op_steepness(ctx, params, inputs):
    return {"slope": steepness_deg(inputs["normals"])}


def _op_release_points(ctx, params, inputs):
    mask = detect_release_points(
        inputs["slope"],
        float(params["min_steepness_deg"]),
        float(params["max_steepness_deg"]),
        int(params.get("stride", 1)),
    )
    return {"mask": mask}


def _op_avalanche_overlay(ctx, params, inputs):
    sim: AvalancheParams = inputs["params"]
    if not isinstance(sim, AvalancheParams):
        raise WorkflowError(
            f"avalanche_overlay needs AvalancheParams, got {type(sim).__name__}"
        )
    dem: DemGrid = inputs["dem"]
    mask: ReleaseMask = inputs["mask"]
    raster = run_avalanche(dem, mask, sim, threads=ctx.threads)
    cmap = (
        colormap_from_json(params["colormap"])
        if params.get("colormap")
        else DEFAULT_RUNOUT_COLORMAP
    )
    pyramid = build_mipmap(colorize(raster, cmap))
    released = released_particles(mask, sim)
    stats = {
        "released_particles": released,
        "particle_steps": total_particle_steps(raster, released),
        "cells_hit": int(np.count_nonzero(raster.hit_count)),
        "z_delta_max_global": float(raster.z_delta_max.max()),
    }
    return {"runout": raster, "overlay": pyramid, "stats": stats}


def _op_snow_overlay(ctx, params, inputs):
    snow: SnowParams = inputs["params"]
    if not isinstance(snow, SnowParams):
        raise WorkflowError(
            f"snow_overlay needs SnowParams, got {type(snow).__name__}"
        )
    texture = compute_snow_from_slope(inputs["dem"], inputs["slope"], snow)
    return {"overlay": build_mipmap(texture)}


OPS: dict[str, OpSpec] = {
    spec.name: spec
    for spec in (
        OpSpec(
            "select_tiles",
            {"region": Kind.REGION, "world": Kind.DEM_GRID},
            {"tiles": Kind.SCALAR},
            _op_select_tiles,
        ),
        OpSpec(
            "fetch_tiles",
            {"world": Kind.DEM_GRID, "tiles": Kind.SCALAR},
            {"tiles": Kind.SCALAR},
            _op_fetch_tiles,
        ),
        OpSpec(
            "stitch_tiles",
            {"tiles": Kind.SCALAR},
            {"dem": Kind.DEM_GRID},
            _op_stitch_tiles,
        ),
        OpSpec(
            "surface_normals",
            {"dem": Kind.DEM_GRID},
            {"normals": Kind.NORMAL_FIELD},
            _op_surface_normals,
        ),
        OpSpec(
            "steepness",
            {"normals": Kind.NORMAL_FIELD},
            {"slope": Kind.SLOPE_FIELD},
            _op_steepness,
        ),
        OpSpec(
            "release_points",
            {"slope": Kind.SLOPE_FIELD},
            {"mask": Kind.RELEASE_MASK},
            _op_release_points,
        ),
        OpSpec(
            "avalanche_overlay",
            {"dem": Kind.DEM_GRID, "mask": Kind.RELEASE_MASK, "params": Kind.PARAMS},
            {
                "runout": Kind.RUNOUT_RASTER,
                "overlay": Kind.PYRAMID,
                "stats": Kind.SCALAR,
            },
            _op_avalanche_overlay,
        ),
        OpSpec(
            "snow_overlay",
            {"dem": Kind.DEM_GRID, "slope": Kind.SLOPE_FIELD, "params": Kind.PARAMS},
            {"overlay": Kind.PYRAMID},
            _op_snow_overlay,
        ),
    )
}


# -- validation ---------------------------------------------------------

DUPLICATE_ID = "DUPLICATE_ID"
UNKNOWN_OP = "UNKNOWN_OP"
UNKNOWN_NODE = "UNKNOWN_NODE"
UNKNOWN_PORT = "UNKNOWN_PORT"
UNKNOWN_SOURCE = "UNKNOWN_SOURCE"
UNKNOWN_INPUT = "UNKNOWN_INPUT"
UNBOUND_INPUT = "UNBOUND_INPUT"
KIND_MISMATCH = "KIND_MISMATCH"
CYCLE = "CYCLE"


@dataclass(frozen=True)
class Violation:
    code: str
    node_id: str | None
    message: str

    def __str__(self) -> str:
        at = f" at '{self.node_id}'" if self.node_id else ""
        return f"{self.code}{at}: {self.message}"


def validate(graph: Graph) -> list[Violation]:
    """Structural checks; returns every violation found, in node order.

    A declared-but-unbound source is not a violation -- binding is an
    execution-time concern (the world DEM is typically bound last).
    """
    out: list[Violation] = []
    by_id: dict[str, Node] = {}
    for n in graph.nodes:
        if n.id in by_id:
            out.append(Violation(DUPLICATE_ID, n.id, "node id used twice"))
        else:
            by_id[n.id] = n

    for n in graph.nodes:
        spec = OPS.get(n.op)
        if spec is None:
            out.append(Violation(UNKNOWN_OP, n.id, f"no operation named '{n.op}'"))
            continue
        for port in spec.inputs:
            if port not in n.inputs:
                out.append(
                    Violation(UNBOUND_INPUT, n.id, f"input '{port}' is not bound")
                )
        for port, ref in n.inputs.items():
            want = spec.inputs.get(port)
            if want is None:
                out.append(
                    Violation(
                        UNKNOWN_INPUT, n.id, f"op '{n.op}' has no input '{port}'"
                    )
                )
                continue
            if isinstance(ref, SourceRef):
                slot = graph.sources.get(ref.name)
                if slot is None:
                    out.append(
                        Violation(
                            UNKNOWN_SOURCE, n.id, f"source '{ref.name}' not declared"
                        )
                    )
                elif slot.kind != want:
                    out.append(
                        Violation(
                            KIND_MISMATCH,
                            n.id,
                            f"input '{port}' wants {want.value}, source "
                            f"'{ref.name}' is {slot.kind.value}",
                        )
                    )
            else:
                up = by_id.get(ref.node_id)
                if up is None:
                    out.append(
                        Violation(UNKNOWN_NODE, n.id, f"no node '{ref.node_id}'")
                    )
                    continue
                up_spec = OPS.get(up.op)
                if up_spec is None:
                    continue  # already reported as UNKNOWN_OP
                got = up_spec.outputs.get(ref.port)
                if got is None:
                    out.append(
                        Violation(
                            UNKNOWN_PORT,
                            n.id,
                            f"node '{ref.node_id}' has no output '{ref.port}'",
                        )
                    )
                elif got != want:
                    out.append(
                        Violation(
                            KIND_MISMATCH,
                            n.id,
                            f"input '{port}' wants {want.value}, "
                            f"'{ref.node_id}.{ref.port}' is {got.value}",
                        )
                    )

    # cycle check over well-formed edges (Kahn)
    deps: dict[str, set[str]] = {
        n.id: {
            r.node_id
            for r in n.inputs.values()
            if isinstance(r, NodeOutput) and r.node_id in by_id
        }
        for n in by_id.values()
    }
    remaining = dict(deps)
    progressed = True
    while progressed and remaining:
        progressed = False
        for nid in list(remaining):
            if not (remaining[nid] & remaining.keys()):
                del remaining[nid]
                progressed = True
    if remaining:
        cyclic = ", ".join(sorted(remaining))
        out.append(Violation(CYCLE, None, f"dependency cycle through: {cyclic}"))
    return out


# -- content digests ----------------------------------------------------


def _digest(value: Any) -> str:
    h = hashlib.sha256()
    _feed(h, value)
    return h.hexdigest()


def _feed(h, value: Any) -> None:
    if isinstance(value, DemGrid):
        h.update(b"DemGrid")
        h.update(struct.pack("<qq", value.ncols, value.nrows))
        h.update(struct.pack("<ddd", value.origin_x, value.origin_y, value.cellsize))
        h.update(struct.pack("<d", value.nodata))
        h.update(value.elevations.tobytes())
    elif isinstance(value, RegionAABB):
        h.update(b"RegionAABB")
        h.update(
            struct.pack("<dddd", value.min_x, value.min_y, value.max_x, value.max_y)
        )
    elif isinstance(value, TileId):
        h.update(b"TileId")
        h.update(struct.pack("<qqq", value.zoom, value.tx, value.ty))
    elif isinstance(value, NormalField):
        _feed_array(h, b"NormalField", value.normals)
    elif isinstance(value, SlopeField):
        _feed_array(h, b"SlopeField", value.slope_deg)
    elif isinstance(value, ReleaseMask):
        _feed_array(h, b"ReleaseMask", value.mask)
    elif isinstance(value, RunoutRaster):
        _feed_array(h, b"RunoutRaster.z", value.z_delta_max)
        _feed_array(h, b"RunoutRaster.h", value.hit_count)
    elif isinstance(value, OverlayTexture):
        _feed_array(h, b"OverlayTexture", value.pixels)
    elif isinstance(value, MipPyramid):
        h.update(b"MipPyramid")
        for level in value.levels:
            _feed(h, level)
    elif isinstance(value, (AvalancheParams, SnowParams)):
        h.update(type(value).__name__.encode())
        h.update(_canonical_json(asdict(value)).encode())
    elif isinstance(value, np.ndarray):
        _feed_array(h, b"ndarray", value)
    elif isinstance(value, (list, tuple)):
        h.update(b"seq" + struct.pack("<q", len(value)))
        for item in value:
            _feed(h, item)
    elif isinstance(value, dict):
        h.update(b"map" + struct.pack("<q", len(value)))
        for key in sorted(value):
            h.update(str(key).encode())
            _feed(h, value[key])
    elif value is None or isinstance(value, (bool, int, float, str)):
        h.update(b"json" + _canonical_json(value).encode())
    else:
        raise WorkflowError(f"cannot digest value of type {type(value).__name__}")


def _feed_array(h, tag: bytes, arr: np.ndarray) -> None:
    h.update(tag)
    h.update(str(arr.dtype).encode())
    h.update(struct.pack(f"<{arr.ndim + 1}q", arr.ndim, *arr.shape))
    h.update(np.ascontiguousarray(arr).tobytes())


def _canonical_json(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


# -- execution ----------------------------------------------------------


@dataclass(frozen=True)
class ExecContext:
    """Per-run knobs that do not affect results (and so never enter
    cache keys)."""

    threads: int = 1


@dataclass(frozen=True)
class NodeReport:
    node_id: str
    op: str
    status: str  # "EXECUTED" | "CACHE_HIT"
    cache_key: str
    elapsed_ms: float


EXECUTED = "EXECUTED"
CACHE_HIT = "CACHE_HIT"


@dataclass(frozen=True)
class ExecutionReport:
    records: tuple[NodeReport, ...]

    @property
    def executed(self) -> int:
        return sum(1 for r in self.records if r.status == EXECUTED)

    @property
    def cache_hits(self) -> int:
        return sum(1 for r in self.records if r.status == CACHE_HIT)

    def status_of(self, node_id: str) -> str:
        for r in self.records:
            if r.node_id == node_id:
                return r.status
        raise KeyError(node_id)


@dataclass(frozen=True)
class ExecutionResult:
    """All node outputs plus the per-node execution report.

    ``outputs`` exposes terminal results (ports no other node consumes)
    keyed "node_id.port"; ``value`` fetches any node's output.
    """

    values: dict[tuple[str, str], Any]
    outputs: dict[str, Any]
    report: ExecutionReport

    def value(self, node_id: str, port: str) -> Any:
        try:
            return self.values[(node_id, port)]
        except KeyError:
            raise KeyError(f"no output '{node_id}.{port}'") from None


def _topo_order(graph: Graph) -> list[Node]:
    done: set[str] = set()
    order: list[Node] = []
    pending = list(graph.nodes)
    while pending:
        rest = []
        for n in pending:
            deps = {
                r.node_id for r in n.inputs.values() if isinstance(r, NodeOutput)
            }
            if deps <= done:
                order.append(n)
                done.add(n.id)
            else:
                rest.append(n)
        if len(rest) == len(pending):  # pragma: no cover - validate() catches
            raise WorkflowError("dependency cycle")
        pending = rest
    return order


class Executor:
    """Runs graphs, reusing results keyed by operation + params +
    input content.  The cache is LRU-bounded and belongs to the
    executor, so sequential graphs share whatever prefixes match.
    Concurrent execute calls are serialized."""

    def __init__(self, max_entries: int | None = None):
        if max_entries is not None and max_entries < 1:
            raise WorkflowError(f"max_entries must be >= 1, got {max_entries}")
        self._max_entries = max_entries
        # cache_key -> (outputs dict, output digests dict)
        self._cache: OrderedDict[str, tuple[dict[str, Any], dict[str, str]]]
        self._cache = OrderedDict()
        self._lock = threading.RLock()

    def __len__(self) -> int:
        return len(self._cache)

    def clear(self) -> None:
        with self._lock:
            self._cache.clear()

    def execute(
        self, graph: Graph, context: ExecContext | None = None
    ) -> ExecutionResult:
        with self._lock:
            return self._execute(graph, context or ExecContext())

    def _execute(self, graph: Graph, ctx: ExecContext) -> ExecutionResult:
        violations = validate(graph)
        if violations:
            raise GraphValidationError(violations)

        referenced = {
            ref.name
            for n in graph.nodes
            for ref in n.inputs.values()
            if isinstance(ref, SourceRef)
        }
        unbound = sorted(
            name for name in referenced if not graph.sources[name].bound
        )
        if unbound:
            raise WorkflowError(f"sources without values: {', '.join(unbound)}")

        source_digests = {
            name: _digest(graph.sources[name].value) for name in referenced
        }

        values: dict[tuple[str, str], Any] = {}
        digests: dict[tuple[str, str], str] = {}
        records: list[NodeReport] = []
        for node in _topo_order(graph):
            spec = OPS[node.op]
            input_values: dict[str, Any] = {}
            input_digests: list[str] = []
            for port in sorted(node.inputs):
                ref = node.inputs[port]
                if isinstance(ref, SourceRef):
                    input_values[port] = graph.sources[ref.name].value
                    input_digests.append(f"{port}={source_digests[ref.name]}")
                else:
                    input_values[port] = values[(ref.node_id, ref.port)]
                    input_digests.append(f"{port}={digests[(ref.node_id, ref.port)]}")
            key_material = "\n".join(
                [f"op={node.op}", f"params={_canonical_json(node.params)}"]
                + input_digests
            )
            cache_key = hashlib.sha256(key_material.encode()).hexdigest()

            hit = self._cache.get(cache_key)
            if hit is not None:
                outputs, out_digests = hit
                self._cache.move_to_end(cache_key)
                status, elapsed_ms = CACHE_HIT, 0.0
            else:
                t0 = time.perf_counter()
                try:
                    outputs = spec.fn(ctx, node.params, input_values)
                except Exception as exc:
                    raise NodeExecutionError(node.id, node.op, exc) from exc
                elapsed_ms = (time.perf_counter() - t0) * 1000.0
                if set(outputs) != set(spec.outputs):
                    raise NodeExecutionError(
                        node.id,
                        node.op,
                        WorkflowError(
                            f"op returned ports {sorted(outputs)}, "
                            f"declared {sorted(spec.outputs)}"
                        ),
                    )
                for port, kind in spec.outputs.items():
                    check_kind(kind, outputs[port], f"output '{node.id}.{port}'")
                out_digests = {p: _digest(v) for p, v in outputs.items()}
                self._cache[cache_key] = (outputs, out_digests)
                if (
                    self._max_entries is not None
                    and len(self._cache) > self._max_entries
                ):
                    self._cache.popitem(last=False)
                status = EXECUTED

            for port, v in outputs.items():
                values[(node.id, port)] = v
                digests[(node.id, port)] = out_digests[port]
            records.append(NodeReport(node.id, node.op, status, cache_key, elapsed_ms))

        consumed = {
            (r.node_id, r.port)
            for n in graph.nodes
            for r in n.inputs.values()
            if isinstance(r, NodeOutput)
        }
        outputs_by_name = {
            f"{nid}.{port}": v
            for (nid, port), v in values.items()
            if (nid, port) not in consumed
        }
        return ExecutionResult(
            values, outputs_by_name, ExecutionReport(tuple(records))
        )


# -- stock graphs --------------------------------------------------------


@dataclass(frozen=True)
class SteepnessRelease:
    """Derive release cells from a steepness band on the computed slope."""

    min_steepness_deg: float = 30.0
    max_steepness_deg: float = 45.0
    stride: int = 1


@dataclass(frozen=True)
class MaskRelease:
    """Use a pre-computed release mask bound as a graph source."""

    mask: ReleaseMask


ReleaseSource = SteepnessRelease | MaskRelease

SHARED_PREFIX_IDS = (
    "select_tiles",
    "fetch_tiles",
    "stitch_tiles",
    "surface_normals",
    "steepness",
)

WORLD_SOURCE = "world"


def default_tile_zoom(grid: DemGrid) -> int:
    """Stock graphs split the world at zoom 1 to exercise the tile
    path; grids too small to split into >= 2x2 subgrids use zoom 0."""
    return 1 if min(grid.ncols, grid.nrows) >= 4 else 0


def _add_prefix(g: Graph, region: RegionAABB, zoom: int) -> None:
    g.add_source("region", Kind.REGION, region)
    g.add_source(WORLD_SOURCE, Kind.DEM_GRID)  # bound by the caller
    g.add_node(
        "select_tiles",
        "select_tiles",
        inputs={"region": SourceRef("region"), "world": SourceRef(WORLD_SOURCE)},
        params={"zoom": zoom},
    )
    g.add_node(
        "fetch_tiles",
        "fetch_tiles",
        inputs={
            "world": SourceRef(WORLD_SOURCE),
            "tiles": NodeOutput("select_tiles", "tiles"),
        },
    )
    g.add_node(
        "stitch_tiles",
        "stitch_tiles",
        inputs={"tiles": NodeOutput("fetch_tiles", "tiles")},
    )
    g.add_node(
        "surface_normals",
        "surface_normals",
        inputs={"dem": NodeOutput("stitch_tiles", "dem")},
    )
    g.add_node(
        "steepness",
        "steepness",
        inputs={"normals": NodeOutput("surface_normals", "normals")},
    )


def build_avalanche_graph(
    region: RegionAABB,
    params: AvalancheParams,
    release_source: ReleaseSource,
    *,
    zoom: int = 1,
    colormap: Colormap | None = None,
) -> Graph:
    """Avalanche overlay pipeline over a region of the world DEM.

    The graph carries region and params as bound sources; the world DEM
    source ('world') must be bound before execution.  A MaskRelease
    binds the mask as a source (6 nodes); SteepnessRelease inserts a
    release_points node fed by the slope field (7 nodes).  Either way
    the first five nodes are the shared terrain prefix, so an executor
    that has run any stock graph over the same inputs replays them from
    cache.
    """
    g = Graph()
    _add_prefix(g, region, zoom)
    g.add_source("params", Kind.PARAMS, params)
    if isinstance(release_source, MaskRelease):
        g.add_source("mask", Kind.RELEASE_MASK, release_source.mask)
        mask_ref: Ref = SourceRef("mask")
    elif isinstance(release_source, SteepnessRelease):
        g.add_node(
            "release_points",
            "release_points",
            inputs={"slope": NodeOutput("steepness", "slope")},
            params={
                "min_steepness_deg": float(release_source.min_steepness_deg),
                "max_steepness_deg": float(release_source.max_steepness_deg),
                "stride": int(release_source.stride),
            },
        )
        mask_ref = NodeOutput("release_points", "mask")
    else:
        raise WorkflowError(
            f"release_source must be SteepnessRelease or MaskRelease, "
            f"got {type(release_source).__name__}"
        )
    g.add_node(
        "avalanche_overlay",
        "avalanche_overlay",
        inputs={
            "dem": NodeOutput("stitch_tiles", "dem"),
            "mask": mask_ref,
            "params": SourceRef("params"),
        },
        params={"colormap": colormap_to_json(colormap) if colormap else None},
    )
    return g


def build_snow_graph(
    region: RegionAABB, params: SnowParams, *, zoom: int = 1
) -> Graph:
    """Snow-cover overlay pipeline (6 nodes, same terrain prefix)."""
    g = Graph()
    _add_prefix(g, region, zoom)
    g.add_source("params", Kind.PARAMS, params)
    g.add_node(
        "snow_overlay",
        "snow_overlay",
        inputs={
            "dem": NodeOutput("stitch_tiles", "dem"),
            "slope": NodeOutput("steepness", "slope"),
            "params": SourceRef("params"),
        },
    )
    return g


# -- JSON forms ----------------------------------------------------------


def ref_to_json(ref: Ref) -> dict[str, str]:
    if isinstance(ref, SourceRef):
        return {"source": ref.name}
    return {"node": ref.node_id, "port": ref.port}


def ref_from_json(doc: Any) -> Ref:
    if not isinstance(doc, dict):
        raise WorkflowError(f"input reference must be an object, got {doc!r}")
    if "source" in doc:
        return SourceRef(str(doc["source"]))
    if "node" in doc and "port" in doc:
        return NodeOutput(str(doc["node"]), str(doc["port"]))
    raise WorkflowError(f"input reference needs 'source' or 'node'+'port': {doc!r}")


def _source_value_to_json(kind: Kind, value: Any) -> Any:
    """Inline JSON for source values where a faithful form exists;
    bulky raster kinds serialize as null and must be re-bound."""
    if value is _UNSET:
        return None
    if kind == Kind.REGION:
        return region_to_json(value)
    if kind == Kind.PARAMS:
        return params_to_json(value)
    if kind == Kind.SCALAR:
        try:
            json.dumps(value)
            return value
        except (TypeError, ValueError):
            return None
    return None


def graph_to_json(graph: Graph) -> dict[str, Any]:
    return {
        "sources": {
            name: {
                "kind": slot.kind.value,
                "value": _source_value_to_json(slot.kind, slot.value),
            }
            for name, slot in graph.sources.items()
        },
        "nodes": [
            {
                "id": n.id,
                "op": n.op,
                "params": n.params,
                "inputs": {p: ref_to_json(r) for p, r in n.inputs.items()},
            }
            for n in graph.nodes
        ],
    }


Resolver = Callable[[str, Kind], Any]


def graph_from_json(doc: Any, resolver: Resolver | None = None) -> Graph:
    if not isinstance(doc, dict):
        raise WorkflowError("graph document must be an object")
    g = Graph()
    for name, entry in dict(doc.get("sources", {})).items():
        if not isinstance(entry, dict) or "kind" not in entry:
            raise WorkflowError(f"source '{name}' entry needs a 'kind'")
        try:
            kind = Kind(entry["kind"])
        except ValueError:
            raise WorkflowError(f"unknown kind '{entry['kind']}' for source '{name}'")
        value = entry.get("value")
        if value is None:
            g.add_source(name, kind)
        else:
            g.add_source(name, kind, source_value_from_json(kind, value, resolver))
    for nd in list(doc.get("nodes", [])):
        if not isinstance(nd, dict) or "id" not in nd or "op" not in nd:
            raise WorkflowError(f"node entries need 'id' and 'op': {nd!r}")
        g.add_node(
            str(nd["id"]),
            str(nd["op"]),
            inputs={
                str(p): ref_from_json(r)
                for p, r in dict(nd.get("inputs", {})).items()
            },
            params=dict(nd.get("params", {})),
        )
    return g


def params_to_json(params: AvalancheParams | SnowParams) -> dict[str, Any]:
    doc = asdict(params)
    doc["model"] = "avalanche" if isinstance(params, AvalancheParams) else "snow"
    return doc


def params_from_json(doc: Any) -> AvalancheParams | SnowParams:
    if not isinstance(doc, dict) or "model" not in doc:
        raise WorkflowError("params document needs a 'model' field")
    fields = {k: v for k, v in doc.items() if k != "model"}
    try:
        if doc["model"] == "avalanche":
            return AvalancheParams(**fields)
        if doc["model"] == "snow":
            return SnowParams(**fields)
    except TypeError as exc:
        raise WorkflowError(f"bad params fields: {exc}") from exc
    raise WorkflowError(f"unknown params model '{doc['model']}'")


def colormap_to_json(cmap: Colormap) -> dict[str, Any]:
    return {
        "stops": [[v, list(color)] for v, color in cmap.stops],
        "zero_transparent": cmap.zero_transparent,
    }


def colormap_from_json(doc: Any) -> Colormap:
    if not isinstance(doc, dict) or "stops" not in doc:
        raise WorkflowError("colormap document needs 'stops'")
    stops = tuple(
        (float(v), tuple(int(c) for c in color)) for v, color in doc["stops"]
    )
    return Colormap(
        stops=stops, zero_transparent=bool(doc.get("zero_transparent", True))
    )


def region_to_json(region: RegionAABB) -> dict[str, float]:
    return {
        "min_x": region.min_x,
        "min_y": region.min_y,
        "max_x": region.max_x,
        "max_y": region.max_y,
    }


def region_from_json(doc: Any) -> RegionAABB:
    try:
        return RegionAABB(
            float(doc["min_x"]),
            float(doc["min_y"]),
            float(doc["max_x"]),
            float(doc["max_y"]),
        )
    except (KeyError, TypeError) as exc:
        raise WorkflowError(f"region document needs min_x/min_y/max_x/max_y: {exc}")


def source_value_from_json(kind: Kind, doc: Any, resolver: Resolver | None = None):
    """Decode one source binding from a serialized graph or request.

    Strings of the form ``dataset:<name>`` defer to the resolver;
    REGION, PARAMS, and SCALAR values may also be inlined as JSON.
    """
    if isinstance(doc, str) and doc.startswith("dataset:"):
        if resolver is None:
            raise WorkflowError("dataset references need a resolver")
        return resolver(doc[len("dataset:") :], kind)
    if kind == Kind.REGION:
        return region_from_json(doc)
    if kind == Kind.PARAMS:
        return params_from_json(doc)
    if kind == Kind.SCALAR:
        return doc
    raise WorkflowError(
        f"kind {kind.value} sources must be 'dataset:<name>' references"
    )
