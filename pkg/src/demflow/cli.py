"""Batch entry points: dataset generation, one-shot simulation runs,
benchmarking, and server startup.

Reported model times cover workflow execution only -- file reads and
writes happen outside the timed window.  Exit codes: 0 success, 1
runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import socket
import sys
import time
from pathlib import Path

import numpy as np

from .asciigrid import parse_ascii_grid, write_ascii_grid
from .grid import DemGrid, gen_parabola
from .overlay import encode_png
from .simulate import AvalancheParams, ReleaseMask, SnowParams
from .workflow import (
    ExecContext,
    Executor,
    MaskRelease,
    SteepnessRelease,
    build_avalanche_graph,
    build_snow_graph,
    default_tile_zoom,
)

DATA_DIR_ENV = "WEBIGEO_DATA_DIR"


def _cpu_default() -> int:
    return os.cpu_count() or 1


def _add_engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--persistence", type=float, default=0.9)
    p.add_argument("--randomness", type=float, default=0.16)
    p.add_argument("--runout-angle", type=float, default=25.0, dest="runout_angle")
    p.add_argument(
        "--particles", type=int, default=2048, help="particles per release cell"
    )
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=_cpu_default())
    p.add_argument(
        "--release",
        type=Path,
        default=None,
        help="release mask .asc (default: release.asc next to --dem, if present)",
    )
    p.add_argument(
        "--release-band",
        type=float,
        nargs=2,
        default=(30.0, 45.0),
        metavar=("MIN_DEG", "MAX_DEG"),
        help="steepness band when no release mask is used",
    )
    p.add_argument("--release-stride", type=int, default=1)


def _add_snow_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--snow-line", type=float, default=None, help="snow line altitude (m)")
    p.add_argument("--altitude-blend", type=float, default=200.0)
    p.add_argument("--max-steepness", type=float, default=50.0)
    p.add_argument("--steepness-blend", type=float, default=10.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="demflow",
        description="Terrain overlay toolkit: DEM simulation workflows, "
        "overlay pyramids, tile service.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="write a synthetic dataset")
    p_gen.add_argument("kind", choices=["parabola"])
    p_gen.add_argument("--out", type=Path, required=True, help="output directory")
    p_gen.set_defaults(func=cmd_generate)

    p_sim = sub.add_parser("simulate", help="run one workflow and export results")
    p_sim.add_argument("--dem", type=Path, required=True)
    p_sim.add_argument("--mode", choices=["avalanche", "snow"], default="avalanche")
    _add_engine_flags(p_sim)
    _add_snow_flags(p_sim)
    p_sim.add_argument("--out", type=Path, required=True, help="output directory")
    p_sim.set_defaults(func=cmd_simulate)

    p_bench = sub.add_parser("bench", help="repeat the avalanche workflow and time it")
    p_bench.add_argument("--dem", type=Path, required=True)
    _add_engine_flags(p_bench)
    p_bench.add_argument("--runs", type=int, default=10)
    p_bench.set_defaults(func=cmd_bench)

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    p_serve.add_argument(
        "--data-dir",
        type=Path,
        default=None,
        help=f"dataset directory (default: ${DATA_DIR_ENV} or ./data)",
    )
    p_serve.add_argument("--port", type=int, default=8080, help="0 picks a free port")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--threads", type=int, default=_cpu_default())
    p_serve.add_argument(
        "--retained-jobs", type=int, default=16, help="job store capacity"
    )
    p_serve.add_argument(
        "--ui-dir",
        type=Path,
        default=None,
        help="built web UI to serve at / (default: auto-detect frontend/dist)",
    )
    p_serve.set_defaults(func=cmd_serve)
    return parser


def _load_grid(path: Path) -> DemGrid:
    return parse_ascii_grid(Path(path).read_text())


def _mask_from_grid(rgrid: DemGrid, grid: DemGrid, origin: str) -> ReleaseMask:
    if rgrid.elevations.shape != grid.elevations.shape:
        raise ValueError(
            f"release mask {origin} is {rgrid.ncols}x{rgrid.nrows}, "
            f"dem is {grid.ncols}x{grid.nrows}"
        )
    return ReleaseMask((rgrid.elevations != 0.0) & (rgrid.elevations != rgrid.nodata))


def _release_source(args: argparse.Namespace, grid: DemGrid):
    path = args.release
    if path is None:
        sibling = Path(args.dem).parent / "release.asc"
        if sibling.is_file():
            path = sibling
    if path is not None:
        return MaskRelease(_mask_from_grid(_load_grid(path), grid, str(path)))
    lo, hi = args.release_band
    return SteepnessRelease(lo, hi, args.release_stride)


def _avalanche_params(args: argparse.Namespace) -> AvalancheParams:
    return AvalancheParams(
        persistence=args.persistence,
        randomness=args.randomness,
        runout_angle_deg=args.runout_angle,
        particles_per_release_cell=args.particles,
        seed=args.seed,
        max_steps=args.max_steps,
    )


def _layer_grid(grid: DemGrid, values: np.ndarray) -> DemGrid:
    return DemGrid(
        ncols=grid.ncols,
        nrows=grid.nrows,
        origin_x=grid.origin_x,
        origin_y=grid.origin_y,
        cellsize=grid.cellsize,
        nodata=-9999.0,
        elevations=np.asarray(values, dtype=np.float64),
    )


def cmd_generate(args: argparse.Namespace) -> int:
    grid, mask = gen_parabola()
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    (out / "dem.asc").write_text(write_ascii_grid(grid))
    (out / "release.asc").write_text(
        write_ascii_grid(_layer_grid(grid, mask.astype(np.float64)))
    )
    print(f"wrote {out / 'dem.asc'} and {out / 'release.asc'}")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    grid = _load_grid(args.dem)
    zoom = default_tile_zoom(grid)
    if args.mode == "avalanche":
        graph = build_avalanche_graph(
            grid.extent, _avalanche_params(args), _release_source(args, grid), zoom=zoom
        )
        final = "avalanche_overlay"
    else:
        snow = SnowParams(
            snow_line_m=args.snow_line,
            altitude_blend_m=args.altitude_blend,
            max_steepness_deg=args.max_steepness,
            steepness_blend_deg=args.steepness_blend,
        )
        graph = build_snow_graph(grid.extent, snow, zoom=zoom)
        final = "snow_overlay"
    graph.bind("world", grid)

    executor = Executor()
    t0 = time.perf_counter()
    result = executor.execute(graph, ExecContext(threads=args.threads))
    model_runtime_ms = (time.perf_counter() - t0) * 1000.0

    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    pyramid = result.value(final, "overlay")
    (out / "overlay.png").write_bytes(encode_png(pyramid.levels[0]))
    stats = {"mode": args.mode, "model_runtime_ms": model_runtime_ms}
    if args.mode == "avalanche":
        raster = result.value(final, "runout")
        (out / "z_delta_max.asc").write_text(
            write_ascii_grid(_layer_grid(grid, raster.z_delta_max))
        )
        (out / "hit_count.asc").write_text(
            write_ascii_grid(_layer_grid(grid, raster.hit_count))
        )
        stats.update(result.value(final, "stats"))
    print(json.dumps(stats))
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    grid = _load_grid(args.dem)
    graph = build_avalanche_graph(
        grid.extent,
        _avalanche_params(args),
        _release_source(args, grid),
        zoom=default_tile_zoom(grid),
    ).bind("world", grid)

    times_ms = []
    result = None
    for _ in range(args.runs):
        executor = Executor()  # fresh cache: every run does the full work
        t0 = time.perf_counter()
        result = executor.execute(graph, ExecContext(threads=args.threads))
        times_ms.append((time.perf_counter() - t0) * 1000.0)
    assert result is not None
    stats = result.value("avalanche_overlay", "stats")
    raster = result.value("avalanche_overlay", "runout")
    total_s = sum(times_ms) / 1000.0
    steps_per_sec = (
        stats["particle_steps"] * args.runs / total_s if total_s > 0 else 0.0
    )
    report = {
        "runs": args.runs,
        "mean_ms": sum(times_ms) / len(times_ms),
        "min_ms": min(times_ms),
        "max_ms": max(times_ms),
        "thread_count": args.threads,
        "released_particles": stats["released_particles"],
        "particle_steps_per_run": stats["particle_steps"],
        "particle_steps_per_sec": steps_per_sec,
        "z_delta_max_sha256": hashlib.sha256(raster.z_delta_max.tobytes()).hexdigest(),
    }
    print(json.dumps(report, indent=2))
    return 0


def _default_ui_dir() -> Path | None:
    candidates = [
        Path("frontend") / "dist",
        Path(__file__).resolve().parents[2] / "frontend" / "dist",
    ]
    for c in candidates:
        if (c / "index.html").is_file():
            return c
    return None


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    data_dir = args.data_dir
    if data_dir is None:
        data_dir = Path(os.environ.get(DATA_DIR_ENV, "data"))
    ui_dir = args.ui_dir if args.ui_dir is not None else _default_ui_dir()
    app = create_app(
        data_dir,
        ui_dir=ui_dir,
        threads=args.threads,
        job_capacity=args.retained_jobs,
    )

    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        sock.bind((args.host, args.port))
    except OSError as exc:
        sock.close()
        print(f"error: cannot bind {args.host}:{args.port}: {exc}", file=sys.stderr)
        return 1
    sock.listen(128)
    port = sock.getsockname()[1]
    print(f"listening on http://{args.host}:{port}", flush=True)
    config = uvicorn.Config(app, fd=sock.fileno(), log_level="warning")
    uvicorn.Server(config).run()
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if (
        args.command == "simulate"
        and args.mode == "snow"
        and args.snow_line is None
    ):
        parser.error("--snow-line is required with --mode snow")
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
