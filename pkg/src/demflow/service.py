"""HTTP service: datasets on disk in, overlay tile pyramids out.

Datasets live under a data directory, one subdirectory per dataset
holding ``dem.asc`` (ESRI ASCII grid) and optionally ``release.asc``
(nonzero cells mark a hand-drawn release mask).  Each simulate request
runs one of the stock workflow graphs through the dataset's own
executor (serialized by a per-dataset lock, so concurrent requests
share cached prefixes instead of duplicating work) and parks the
resulting pyramid in a bounded job store; tiles are then immutable and
infinitely cacheable.  Evicted jobs answer 410 so clients can tell
"expired" from "never existed".

Reported model_runtime_ms covers graph execution only -- never dataset
loading, PNG encoding, or response serialization.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .asciigrid import parse_ascii_grid, write_ascii_grid
from .grid import DemGrid
from .overlay import (
    TEXTURE_SIZE_LIMIT,
    MipPyramid,
    TextureLimitError,
    TileRangeError,
    build_mipmap,
    encode_png,
    extract_tile,
    max_tile_zoom,
    texture_from_gray,
)
from .simulate import AvalancheParams, ReleaseMask, SnowParams
from .terrain import hillshade
from .tiles import TileId
from .workflow import (
    ExecContext,
    ExecutionReport,
    Executor,
    Kind,
    MaskRelease,
    NodeExecutionError,
    SteepnessRelease,
    WorkflowError,
    build_avalanche_graph,
    build_snow_graph,
    default_tile_zoom,
    graph_from_json,
    region_to_json,
    source_value_from_json,
    validate,
)

TILE_PX = 256
JOB_CAPACITY = 16


class ServiceError(ValueError):
    """Dataset directory problems found at startup."""


# -- datasets ------------------------------------------------------------


@dataclass
class Dataset:
    name: str
    grid: DemGrid
    release: ReleaseMask | None
    z_min: float
    z_max: float
    lock: threading.Lock = field(default_factory=threading.Lock)
    executor: Executor = field(default_factory=lambda: Executor(max_entries=32))
    hillshade_pyramid: MipPyramid | None = None


def _load_dataset(name: str, folder: Path) -> Dataset:
    dem_path = folder / "dem.asc"
    try:
        grid = parse_ascii_grid(dem_path.read_text())
    except (OSError, ValueError) as exc:
        raise ServiceError(f"dataset '{name}': cannot load {dem_path}: {exc}")
    release = None
    release_path = folder / "release.asc"
    if release_path.is_file():
        try:
            rgrid = parse_ascii_grid(release_path.read_text())
        except ValueError as exc:
            raise ServiceError(f"dataset '{name}': bad release mask: {exc}")
        if rgrid.elevations.shape != grid.elevations.shape:
            raise ServiceError(
                f"dataset '{name}': release mask {rgrid.elevations.shape} does "
                f"not match dem {grid.elevations.shape}"
            )
        marked = (rgrid.elevations != 0.0) & (rgrid.elevations != rgrid.nodata)
        release = ReleaseMask(marked)
    valued = grid.elevations[grid.elevations != grid.nodata]
    z_min = float(valued.min()) if valued.size else 0.0
    z_max = float(valued.max()) if valued.size else 0.0
    return Dataset(name=name, grid=grid, release=release, z_min=z_min, z_max=z_max)


class DatasetRegistry:
    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self._datasets: dict[str, Dataset] = {}
        if not self.data_dir.is_dir():
            raise ServiceError(f"data directory {self.data_dir} does not exist")
        for sub in sorted(self.data_dir.iterdir()):
            if sub.is_dir() and (sub / "dem.asc").is_file():
                self._datasets[sub.name] = _load_dataset(sub.name, sub)

    def names(self) -> list[str]:
        return list(self._datasets)

    def get(self, name: str) -> Dataset | None:
        return self._datasets.get(name)


# -- job store -----------------------------------------------------------


@dataclass(frozen=True)
class Job:
    id: str
    dataset: str
    kind: str
    pyramid: MipPyramid
    grid: DemGrid | None
    runout: Any  # RunoutRaster | None
    stats: dict[str, Any]


class JobStore:
    """Keeps the newest `capacity` jobs; evicted ids are remembered so
    their tile URLs answer 410 instead of 404."""

    def __init__(self, capacity: int = JOB_CAPACITY):
        if capacity < 1:
            raise ServiceError(f"job capacity must be >= 1, got {capacity}")
        self._jobs: OrderedDict[str, Job] = OrderedDict()
        self._evicted: set[str] = set()
        self._capacity = capacity
        self._lock = threading.Lock()

    def put(self, job: Job) -> None:
        with self._lock:
            self._jobs[job.id] = job
            while len(self._jobs) > self._capacity:
                old_id, _ = self._jobs.popitem(last=False)
                self._evicted.add(old_id)

    def get(self, job_id: str) -> Job:
        with self._lock:
            job = self._jobs.get(job_id)
            if job is not None:
                return job
            if job_id in self._evicted:
                raise HTTPException(
                    status_code=410, detail=f"job '{job_id}' has been evicted"
                )
        raise HTTPException(status_code=404, detail=f"unknown job '{job_id}'")


# -- request bodies -------------------------------------------------------


class AvalancheParamsBody(BaseModel):
    model_config = ConfigDict(extra="forbid")

    persistence: float = Field(default=0.9, ge=0.0, le=1.0)
    randomness: float = Field(default=0.16, ge=0.0, le=1.0)
    runout_angle: float = Field(default=25.0, gt=0.0, lt=90.0)
    particles: int = Field(default=2048, ge=1)
    max_steps: int | None = Field(default=None, ge=1)
    # "auto" uses the dataset's release mask when it has one and the
    # steepness band otherwise
    release_source: Literal["auto", "steepness", "mask"] = "auto"
    release_band_deg: tuple[float, float] = (30.0, 45.0)
    release_stride: int = Field(default=1, ge=1)


class SnowParamsBody(BaseModel):
    model_config = ConfigDict(extra="forbid")

    snow_line_m: float
    altitude_blend_m: float = Field(default=200.0, ge=0.0)
    max_steepness_deg: float = Field(default=50.0, ge=0.0, le=90.0)
    steepness_blend_deg: float = Field(default=10.0, ge=0.0)


class SimulateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dataset: str
    kind: Literal["avalanche", "snow"]
    params: dict[str, Any] = Field(default_factory=dict)
    seed: int = 0


class WorkflowRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    graph: dict[str, Any]
    sources: dict[str, Any] = Field(default_factory=dict)
    validate_only: bool = False


def _params_422(errors: list[dict]) -> HTTPException:
    detail = [
        {
            "loc": ["body", "params", *err.get("loc", ())],
            "msg": err.get("msg", "invalid value"),
            "type": err.get("type", "value_error"),
        }
        for err in errors
    ]
    return HTTPException(status_code=422, detail=detail)


def _field_422(loc: list[str], msg: str) -> HTTPException:
    return HTTPException(
        status_code=422,
        detail=[{"loc": ["body", *loc], "msg": msg, "type": "value_error"}],
    )


def _json_safe(value: Any) -> Any:
    try:
        json.dumps(value)
        return value
    except (TypeError, ValueError):
        pass
    if isinstance(value, TileId):
        return {"zoom": value.zoom, "tx": value.tx, "ty": value.ty}
    if isinstance(value, DemGrid):
        return {
            "type": "DemGrid",
            "ncols": value.ncols,
            "nrows": value.nrows,
            "cellsize": value.cellsize,
        }
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    return {"type": type(value).__name__}


def _report_json(report: ExecutionReport) -> list[dict[str, Any]]:
    return [
        {
            "node_id": r.node_id,
            "op": r.op,
            "status": r.status,
            "elapsed_ms": r.elapsed_ms,
        }
        for r in report.records
    ]


PARAM_SCHEMA: dict[str, Any] = {
    "models": {
        "avalanche": {
            "persistence": {"type": "float", "min": 0.0, "max": 1.0, "default": 0.9},
            "randomness": {"type": "float", "min": 0.0, "max": 1.0, "default": 0.16},
            "runout_angle": {
                "type": "float",
                "min": 0.0,
                "max": 90.0,
                "exclusive": True,
                "default": 25.0,
            },
            "particles": {"type": "int", "min": 1, "default": 2048},
            "max_steps": {"type": "int", "min": 1, "default": None},
            "release_source": {
                "type": "enum",
                "values": ["auto", "steepness", "mask"],
                "default": "auto",
            },
            "release_band_deg": {
                "type": "range_deg",
                "min": 0.0,
                "max": 90.0,
                "default": [30.0, 45.0],
            },
            "release_stride": {"type": "int", "min": 1, "default": 1},
        },
        "snow": {
            "snow_line_m": {"type": "float", "required": True},
            "altitude_blend_m": {"type": "float", "min": 0.0, "default": 200.0},
            "max_steepness_deg": {
                "type": "float",
                "min": 0.0,
                "max": 90.0,
                "default": 50.0,
            },
            "steepness_blend_deg": {"type": "float", "min": 0.0, "default": 10.0},
        },
    },
    "texture_size_limit": TEXTURE_SIZE_LIMIT,
    "tile_px": TILE_PX,
}


# -- app factory -----------------------------------------------------------


def create_app(
    data_dir: str | Path,
    *,
    ui_dir: str | Path | None = None,
    threads: int = 1,
    job_capacity: int = JOB_CAPACITY,
) -> FastAPI:
    registry = DatasetRegistry(data_dir)
    jobs = JobStore(capacity=job_capacity)
    workflows_executor = Executor(max_entries=32)
    workflows_lock = threading.Lock()
    app = FastAPI(title="demflow service")
    app.state.registry = registry
    app.state.jobs = jobs

    def _dataset_or_404(name: str) -> Dataset:
        ds = registry.get(name)
        if ds is None:
            raise HTTPException(status_code=404, detail=f"unknown dataset '{name}'")
        return ds

    def _check_texture_budget(ds: Dataset) -> None:
        if max(ds.grid.ncols, ds.grid.nrows) > TEXTURE_SIZE_LIMIT:
            raise _field_422(
                ["dataset"],
                f"dataset '{ds.name}' is {ds.grid.ncols}x{ds.grid.nrows}; "
                f"overlays are limited to {TEXTURE_SIZE_LIMIT} per axis",
            )

    def _tile_response(pyramid: MipPyramid, z: int, x: int, y: int) -> Response:
        try:
            tile = extract_tile(pyramid, z, x, y, tile_px=TILE_PX)
        except TileRangeError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return Response(
            content=encode_png(tile),
            media_type="image/png",
            headers={"Cache-Control": "public, max-age=31536000, immutable"},
        )

    def _overlay_meta(pyramid: MipPyramid) -> dict[str, Any]:
        return {
            "width": pyramid.width,
            "height": pyramid.height,
            "levels": len(pyramid.levels),
            "tile_px": TILE_PX,
            "max_zoom": max_tile_zoom(pyramid.width, pyramid.height, TILE_PX),
        }

    @app.get("/api/datasets")
    def list_datasets() -> list[dict[str, Any]]:
        out = []
        for name in registry.names():
            ds = registry.get(name)
            assert ds is not None
            out.append(
                {
                    "name": name,
                    "world": region_to_json(ds.grid.extent),
                    "cellsize": ds.grid.cellsize,
                    "ncols": ds.grid.ncols,
                    "nrows": ds.grid.nrows,
                    "z_min": ds.z_min,
                    "z_max": ds.z_max,
                    "has_release_mask": ds.release is not None,
                }
            )
        return out

    @app.get("/api/schema")
    def schema() -> dict[str, Any]:
        return PARAM_SCHEMA

    @app.post("/api/simulate")
    def simulate(req: SimulateRequest) -> dict[str, Any]:
        ds = _dataset_or_404(req.dataset)
        _check_texture_budget(ds)
        zoom = default_tile_zoom(ds.grid)
        region = ds.grid.extent
        if req.kind == "avalanche":
            try:
                body = AvalancheParamsBody(**req.params)
            except ValidationError as exc:
                raise _params_422(exc.errors())
            sim = AvalancheParams(
                persistence=body.persistence,
                randomness=body.randomness,
                runout_angle_deg=body.runout_angle,
                particles_per_release_cell=body.particles,
                seed=req.seed,
                max_steps=body.max_steps,
            )
            source = body.release_source
            if source == "auto":
                source = "mask" if ds.release is not None else "steepness"
            if source == "mask":
                if ds.release is None:
                    raise _field_422(
                        ["params", "release_source"],
                        f"dataset '{ds.name}' has no release mask",
                    )
                graph = build_avalanche_graph(
                    region, sim, MaskRelease(ds.release), zoom=zoom
                )
            else:
                lo, hi = body.release_band_deg
                graph = build_avalanche_graph(
                    region,
                    sim,
                    SteepnessRelease(lo, hi, body.release_stride),
                    zoom=zoom,
                )
            final = "avalanche_overlay"
        else:
            try:
                snow_body = SnowParamsBody(**req.params)
            except ValidationError as exc:
                raise _params_422(exc.errors())
            snow_params = SnowParams(
                snow_line_m=snow_body.snow_line_m,
                altitude_blend_m=snow_body.altitude_blend_m,
                max_steepness_deg=snow_body.max_steepness_deg,
                steepness_blend_deg=snow_body.steepness_blend_deg,
            )
            graph = build_snow_graph(region, snow_params, zoom=zoom)
            final = "snow_overlay"
        graph.bind("world", ds.grid)

        with ds.lock:
            t0 = time.perf_counter()
            try:
                result = ds.executor.execute(graph, ExecContext(threads=threads))
            except NodeExecutionError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            model_runtime_ms = (time.perf_counter() - t0) * 1000.0

        pyramid = result.value(final, "overlay")
        stats: dict[str, Any] = {"model_runtime_ms": model_runtime_ms}
        runout = None
        if req.kind == "avalanche":
            node_stats = result.value(final, "stats")
            runout = result.value(final, "runout")
            stats.update(
                {
                    "particles": node_stats["released_particles"],
                    "particle_steps": node_stats["particle_steps"],
                    "cells_hit": node_stats["cells_hit"],
                    "z_delta_max_global": node_stats["z_delta_max_global"],
                }
            )
        job = Job(
            id=uuid.uuid4().hex,
            dataset=ds.name,
            kind=req.kind,
            pyramid=pyramid,
            grid=ds.grid,
            runout=runout,
            stats=stats,
        )
        jobs.put(job)
        return {
            "job_id": job.id,
            "dataset": ds.name,
            "kind": req.kind,
            "stats": stats,
            "report": _report_json(result.report),
            "tiles": f"/api/jobs/{job.id}/tiles/{{z}}/{{x}}/{{y}}.png",
            "overlay": _overlay_meta(pyramid),
        }

    @app.get("/api/jobs/{job_id}/tiles/{z}/{x}/{y}.png")
    def job_tile(job_id: str, z: int, x: int, y: int) -> Response:
        job = jobs.get(job_id)
        return _tile_response(job.pyramid, z, x, y)

    @app.get("/api/jobs/{job_id}/export/{layer}.asc")
    def export_layer(job_id: str, layer: str) -> Response:
        job = jobs.get(job_id)
        if layer not in ("z_delta_max", "hit_count"):
            raise HTTPException(
                status_code=404,
                detail=f"unknown layer '{layer}' (z_delta_max, hit_count)",
            )
        if job.runout is None or job.grid is None:
            raise HTTPException(
                status_code=404,
                detail=f"job '{job_id}' is a {job.kind} job; no runout layers",
            )
        values = getattr(job.runout, layer)
        g = job.grid
        export_grid = DemGrid(
            ncols=g.ncols,
            nrows=g.nrows,
            origin_x=g.origin_x,
            origin_y=g.origin_y,
            cellsize=g.cellsize,
            nodata=-9999.0,
            elevations=np.asarray(values, dtype=np.float64),
        )
        return Response(
            content=write_ascii_grid(export_grid),
            media_type="text/plain; charset=utf-8",
            headers={"Content-Disposition": f'attachment; filename="{layer}.asc"'},
        )

    @app.get("/api/datasets/{name}/hillshade/{z}/{x}/{y}.png")
    def hillshade_tile(name: str, z: int, x: int, y: int) -> Response:
        ds = _dataset_or_404(name)
        with ds.lock:
            if ds.hillshade_pyramid is None:
                try:
                    gray = hillshade(ds.grid)
                    ds.hillshade_pyramid = build_mipmap(texture_from_gray(gray))
                except TextureLimitError as exc:
                    raise HTTPException(status_code=422, detail=str(exc))
            pyramid = ds.hillshade_pyramid
        return _tile_response(pyramid, z, x, y)

    @app.post("/api/workflows")
    def run_workflow(req: WorkflowRequest) -> dict[str, Any]:
        def resolver(name: str, kind: Kind) -> Any:
            ds = registry.get(name)
            if ds is None:
                raise WorkflowError(f"unknown dataset '{name}'")
            if kind == Kind.DEM_GRID:
                return ds.grid
            if kind == Kind.REGION:
                return ds.grid.extent
            if kind == Kind.RELEASE_MASK:
                if ds.release is None:
                    raise WorkflowError(f"dataset '{name}' has no release mask")
                return ds.release
            raise WorkflowError(f"dataset '{name}' cannot supply kind {kind.value}")

        try:
            graph = graph_from_json(req.graph, resolver)
        except WorkflowError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        violations = validate(graph)
        if req.validate_only:
            return {
                "valid": not violations,
                "violations": [
                    {"code": v.code, "node_id": v.node_id, "message": v.message}
                    for v in violations
                ],
            }
        if violations:
            raise HTTPException(
                status_code=422,
                detail=[
                    {"code": v.code, "node_id": v.node_id, "message": v.message}
                    for v in violations
                ],
            )

        try:
            for name, doc in req.sources.items():
                slot = graph.sources.get(name)
                if slot is None:
                    raise WorkflowError(f"values for undeclared source: {name}")
                graph.bind(name, source_value_from_json(slot.kind, doc, resolver))
            with workflows_lock:
                result = workflows_executor.execute(
                    graph, ExecContext(threads=threads)
                )
        except WorkflowError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

        outputs: dict[str, Any] = {}
        job_links: dict[str, Any] = {}
        for (node_id, port), value in result.values.items():
            if isinstance(value, MipPyramid):
                job = Job(
                    id=uuid.uuid4().hex,
                    dataset="workflow",
                    kind="workflow",
                    pyramid=value,
                    grid=None,
                    runout=None,
                    stats={},
                )
                jobs.put(job)
                job_links[f"{node_id}.{port}"] = {
                    "job_id": job.id,
                    "tiles": f"/api/jobs/{job.id}/tiles/{{z}}/{{x}}/{{y}}.png",
                    "overlay": _overlay_meta(value),
                }
            else:
                outputs[f"{node_id}.{port}"] = _json_safe(value)
        return {
            "report": _report_json(result.report),
            "outputs": outputs,
            "jobs": job_links,
        }

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    else:

        @app.get("/")
        def root() -> dict[str, Any]:
            return {
                "service": "demflow",
                "datasets": registry.names(),
                "endpoints": [
                    "GET /api/datasets",
                    "GET /api/schema",
                    "POST /api/simulate",
                    "GET /api/jobs/{job_id}/tiles/{z}/{x}/{y}.png",
                    "GET /api/jobs/{job_id}/export/{layer}.asc",
                    "GET /api/datasets/{name}/hillshade/{z}/{x}/{y}.png",
                    "POST /api/workflows",
                ],
            }

    return app
