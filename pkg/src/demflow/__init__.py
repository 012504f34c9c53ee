"""demflow: DEM-driven terrain overlays.

Raster grids in, steerable node-graph workflows over them (snow cover,
avalanche runout), RGBA overlay pyramids and map tiles out.
"""

from .asciigrid import AsciiGridError, parse_ascii_grid, write_ascii_grid
from .grid import DemGrid, GridError, RegionAABB, SampleError, gen_parabola
from .overlay import (
    DEFAULT_RUNOUT_COLORMAP,
    TEXTURE_SIZE_LIMIT,
    Colormap,
    MipPyramid,
    OverlayError,
    OverlayTexture,
    PngError,
    TextureLimitError,
    TileRangeError,
    build_mipmap,
    colorize,
    decode_png,
    encode_png,
    extract_tile,
    max_tile_zoom,
)
from .simulate import (
    AvalancheParams,
    ReleaseMask,
    RunoutRaster,
    SnowParams,
    StopReason,
    Trajectory,
    compute_snow,
    detect_release_points,
    run_avalanche,
    simulate_particle,
)
from .terrain import (
    NormalField,
    SlopeField,
    TerrainError,
    compute_normals,
    downslope_dir,
    hillshade,
    steepness_deg,
)
from .tiles import StitchError, TileError, TileId, select_tiles, split_grid, stitch
from .workflow import (
    ExecContext,
    ExecutionResult,
    Executor,
    Graph,
    MaskRelease,
    NodeExecutionError,
    SteepnessRelease,
    Violation,
    WorkflowError,
    build_avalanche_graph,
    build_snow_graph,
    graph_from_json,
    graph_to_json,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "AsciiGridError",
    "AvalancheParams",
    "Colormap",
    "DEFAULT_RUNOUT_COLORMAP",
    "DemGrid",
    "ExecContext",
    "ExecutionResult",
    "Executor",
    "Graph",
    "GridError",
    "MaskRelease",
    "MipPyramid",
    "NodeExecutionError",
    "NormalField",
    "OverlayError",
    "OverlayTexture",
    "PngError",
    "RegionAABB",
    "ReleaseMask",
    "RunoutRaster",
    "SampleError",
    "SlopeField",
    "SnowParams",
    "SteepnessRelease",
    "StitchError",
    "StopReason",
    "TerrainError",
    "TEXTURE_SIZE_LIMIT",
    "TextureLimitError",
    "TileError",
    "TileId",
    "TileRangeError",
    "Trajectory",
    "Violation",
    "WorkflowError",
    "build_avalanche_graph",
    "build_mipmap",
    "build_snow_graph",
    "colorize",
    "compute_normals",
    "compute_snow",
    "decode_png",
    "detect_release_points",
    "downslope_dir",
    "encode_png",
    "extract_tile",
    "gen_parabola",
    "graph_from_json",
    "graph_to_json",
    "hillshade",
    "max_tile_zoom",
    "parse_ascii_grid",
    "run_avalanche",
    "select_tiles",
    "simulate_particle",
    "split_grid",
    "steepness_deg",
    "stitch",
    "validate",
    "write_ascii_grid",
]
