"""Monte-Carlo gravitational mass flow and snow-cover shading.

Particles released on marked cells glide downslope over the bilinear
elevation surface.  Each step blends the previous direction with the
local downslope direction (``persistence`` weighting), jitters the
blend by a uniform angle scaled by ``randomness``, and advances one
cellsize.  A particle halts when the elevation angle from its current
position back up to its release point drops below the runout angle,
when it leaves the grid (clipped exit kept), on flat ground with no
momentum, or at the step cap.

Determinism: every random draw is a pure function of
(seed, release-cell ordinal, particle ordinal, step ordinal) via
counter-based streams (rng.py), and per-cell accumulation uses only
commutative merges (count sums, running maxima).  Results are
therefore bitwise identical for any particle batching or thread count.

The per-step float arithmetic here deliberately mirrors
terrain.oracle_descent_path, terrain.downslope_dir and
grid.sample_elevation -- a jitter-free, memory-free particle must
follow the oracle's float sequence exactly.  Keep them in sync.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import rng
from .grid import DemGrid
from .overlay import OverlayTexture
from .terrain import FLAT_GRADIENT_THRESHOLD, NormalField, SlopeField, steepness_deg

# particles per work unit; fixed so thread count never alters batching
_CHUNK = 2048

# blended direction below this magnitude means "no direction left"
_FLAT_DIR_EPS = 1e-9

_HALF_PI = math.pi / 2.0


class SimulationError(ValueError):
    pass


class ParamError(ValueError):
    pass


class StopReason(str, Enum):
    RUNOUT_ANGLE = "RUNOUT_ANGLE"
    DOMAIN_EXIT = "DOMAIN_EXIT"
    FLAT = "FLAT"
    MAX_STEPS = "MAX_STEPS"


_REASON_BY_CODE = (
    StopReason.RUNOUT_ANGLE,
    StopReason.DOMAIN_EXIT,
    StopReason.FLAT,
    StopReason.MAX_STEPS,
)


@dataclass(frozen=True)
class AvalancheParams:
    """Knobs of the mass-flow model.

    persistence: weight of the previous step direction in [0, 1].
    randomness: jitter scale in [0, 1]; the per-step rotation is drawn
        uniformly from [-randomness * 90, +randomness * 90] degrees.
    runout_angle_deg: halting angle in (0, 90).
    particles_per_release_cell: Monte-Carlo fan-out per marked cell.
    seed: stream seed; same seed, same result, bit for bit.
    max_steps: per-particle cap; default 10 * max(ncols, nrows).
    """

    persistence: float = 0.9
    randomness: float = 0.16
    runout_angle_deg: float = 25.0
    particles_per_release_cell: int = 2048
    seed: int = 0
    max_steps: int | None = None

    def __post_init__(self):
        if not (0.0 <= self.persistence <= 1.0):
            raise ParamError(f"persistence must be in [0, 1], got {self.persistence}")
        if not (0.0 <= self.randomness <= 1.0):
            raise ParamError(f"randomness must be in [0, 1], got {self.randomness}")
        if not (0.0 < self.runout_angle_deg < 90.0):
            raise ParamError(
                f"runout_angle_deg must be in (0, 90), got {self.runout_angle_deg}"
            )
        if self.particles_per_release_cell < 1:
            raise ParamError(
                f"particles_per_release_cell must be >= 1, got "
                f"{self.particles_per_release_cell}"
            )
        if self.max_steps is not None and self.max_steps < 1:
            raise ParamError(f"max_steps must be >= 1, got {self.max_steps}")


@dataclass(frozen=True)
class SnowParams:
    """Snow shading: altitude ramp times steepness ramp.

    Cover fades in across ``altitude_blend_m`` below ``snow_line_m``
    and fades out across ``steepness_blend_deg`` above
    ``max_steepness_deg``.
    """

    snow_line_m: float
    altitude_blend_m: float = 200.0
    max_steepness_deg: float = 50.0
    steepness_blend_deg: float = 10.0

    def __post_init__(self):
        if self.altitude_blend_m < 0:
            raise ParamError(f"altitude_blend_m must be >= 0, got {self.altitude_blend_m}")
        if self.steepness_blend_deg < 0:
            raise ParamError(
                f"steepness_blend_deg must be >= 0, got {self.steepness_blend_deg}"
            )
        if not (0.0 <= self.max_steepness_deg <= 90.0):
            raise ParamError(
                f"max_steepness_deg must be in [0, 90], got {self.max_steepness_deg}"
            )


@dataclass(frozen=True)
class ReleaseMask:
    """Boolean raster marking particle release cells."""

    mask: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.ascontiguousarray(np.asarray(self.mask, dtype=bool))
        m.flags.writeable = False
        object.__setattr__(self, "mask", m)

    @property
    def nrows(self) -> int:
        return self.mask.shape[0]

    @property
    def ncols(self) -> int:
        return self.mask.shape[1]

    @property
    def count(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True)
class RunoutRaster:
    """Accumulated flow field: per-cell max vertical drop and hit count."""

    z_delta_max: np.ndarray = field(repr=False)
    hit_count: np.ndarray = field(repr=False)

    def __post_init__(self):
        zd = np.ascontiguousarray(np.asarray(self.z_delta_max, dtype=np.float64))
        hc = np.ascontiguousarray(np.asarray(self.hit_count, dtype=np.int64))
        if zd.shape != hc.shape:
            raise SimulationError(
                f"layer shapes differ: {zd.shape} vs {hc.shape}"
            )
        if not np.all(np.isfinite(zd)) or np.any(zd < 0):
            raise SimulationError("z_delta_max must be finite and non-negative")
        if np.any(hc < 0):
            raise SimulationError("hit_count must be non-negative")
        if np.any((zd > 0) & (hc == 0)):
            raise SimulationError("z_delta_max positive on a cell with no hits")
        zd.flags.writeable = False
        hc.flags.writeable = False
        object.__setattr__(self, "z_delta_max", zd)
        object.__setattr__(self, "hit_count", hc)

    @property
    def nrows(self) -> int:
        return self.z_delta_max.shape[0]

    @property
    def ncols(self) -> int:
        return self.z_delta_max.shape[1]


@dataclass(frozen=True)
class Trajectory:
    """Positions of one particle, release point first."""

    positions: np.ndarray
    stop_reason: StopReason

    def __post_init__(self):
        p = np.asarray(self.positions, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != 2 or p.shape[0] < 1:
            raise SimulationError(f"positions must be (n >= 1, 2), got {p.shape}")
        object.__setattr__(self, "positions", p)


def detect_release_points(
    slope: SlopeField,
    min_steepness_deg: float,
    max_steepness_deg: float,
    stride: int = 1,
) -> ReleaseMask:
    """Mark cells whose steepness lies in [min, max] (inclusive),
    thinned to every stride-th row and column."""
    if stride < 1:
        raise ParamError(f"stride must be >= 1, got {stride}")
    if min_steepness_deg > max_steepness_deg:
        raise ParamError(
            f"empty steepness band [{min_steepness_deg}, {max_steepness_deg}]"
        )
    s = slope.slope_deg
    band = (s >= min_steepness_deg) & (s <= max_steepness_deg)
    lattice = np.zeros_like(band)
    lattice[::stride, ::stride] = True
    return ReleaseMask(band & lattice)


# -- the particle engine ----------------------------------------------


def _bilinear_batch(e, nd_ox, nd_oy, cs, ncols, nrows, x, y):
    """Vector bilinear height and gradient; mirrors grid.sample_elevation
    and terrain.downslope_dir arithmetic exactly."""
    u = (x - nd_ox) / cs - 0.5
    v = (y - nd_oy) / cs - 0.5
    u = np.minimum(np.maximum(u, 0.0), ncols - 1.0)
    v = np.minimum(np.maximum(v, 0.0), nrows - 1.0)
    j0f = np.minimum(np.floor(u), ncols - 2.0)
    s0f = np.minimum(np.floor(v), nrows - 2.0)
    wu = u - j0f
    wv = v - s0f
    j0 = j0f.astype(np.int64)
    s0 = s0f.astype(np.int64)
    i1 = (nrows - 1) - s0
    i0 = i1 - 1
    z00 = e[i1, j0]
    z10 = e[i1, j0 + 1]
    z01 = e[i0, j0]
    z11 = e[i0, j0 + 1]
    gx_s = z10 - z00
    gx_n = z11 - z01
    gy_w = z01 - z00
    gy_e = z11 - z10
    zs = z00 + gx_s * wu
    zn = z01 + gx_n * wu
    z = zs + (zn - zs) * wv
    dzdx = (gx_s + (gx_n - gx_s) * wv) / cs
    dzdy = (gy_w + (gy_e - gy_w) * wu) / cs
    return z, -dzdx, -dzdy


def _cells_of(ox, oy, cs, ncols, nrows, x, y):
    col = np.floor((x - ox) / cs).astype(np.int64)
    s = np.floor((y - oy) / cs).astype(np.int64)
    np.clip(col, 0, ncols - 1, out=col)
    np.clip(s, 0, nrows - 1, out=s)
    return (nrows - 1) - s, col


def _simulate_batch(
    grid: DemGrid,
    start_x: np.ndarray,
    start_y: np.ndarray,
    keys: np.ndarray,
    params: AvalancheParams,
    *,
    record: bool = False,
    hits: np.ndarray | None = None,
    zdelta: np.ndarray | None = None,
):
    """Advance a batch of particles in lockstep until all stop.

    Returns (reason_codes, steps, paths) where paths is a list of
    position lists when record=True, else None.
    """
    e = grid.elevations
    cs = grid.cellsize
    ox = grid.origin_x
    oy = grid.origin_y
    ncols = grid.ncols
    nrows = grid.nrows
    xmax = ox + ncols * cs
    ymax = oy + nrows * cs
    tana = math.tan(math.radians(params.runout_angle_deg))
    pscale = params.persistence
    omp = 1.0 - pscale
    rscale = params.randomness
    max_steps = params.max_steps if params.max_steps is not None else 10 * max(ncols, nrows)

    n = start_x.size
    x = start_x.astype(np.float64).copy()
    y = start_y.astype(np.float64).copy()
    zcur, _, _ = _bilinear_batch(e, ox, oy, cs, ncols, nrows, x, y)
    zrel = zcur.copy()
    relx = x.copy()
    rely = y.copy()
    dpx = np.zeros(n)
    dpy = np.zeros(n)
    steps = np.zeros(n, dtype=np.int64)
    reasons = np.full(n, 255, dtype=np.uint8)
    alive = np.arange(n, dtype=np.int64)

    paths = [[(float(x[i]), float(y[i]))] for i in range(n)] if record else None

    if hits is not None:
        r0, c0 = _cells_of(ox, oy, cs, ncols, nrows, x, y)
        np.add.at(hits, (r0, c0), 1)

    while alive.size:
        a = alive
        xa = x[a]
        ya = y[a]
        za = zcur[a]
        sa = steps[a]

        # stop rule 1: travel angle back to the release point
        ddx = xa - relx[a]
        ddy = ya - rely[a]
        hdist = np.sqrt(ddx * ddx + ddy * ddy)
        m_run = (sa >= 1) & ((zrel[a] - za) < tana * hdist)

        # stop rule 2: step cap
        m_max = ~m_run & (sa >= max_steps)

        cand = ~m_run & ~m_max

        # direction: blend of momentum and downslope, jittered
        _, gx, gy = _bilinear_batch(e, ox, oy, cs, ncols, nrows, xa, ya)
        gmag = np.sqrt(gx * gx + gy * gy)
        gvalid = gmag >= FLAT_GRADIENT_THRESHOLD
        gsafe = np.where(gvalid, gmag, 1.0)
        ux = np.where(gvalid, gx / gsafe, 0.0)
        uy = np.where(gvalid, gy / gsafe, 0.0)
        first = sa == 0
        bx = np.where(first, ux, pscale * dpx[a] + omp * ux)
        by = np.where(first, uy, pscale * dpy[a] + omp * uy)
        bmag = np.sqrt(bx * bx + by * by)

        m_flat = cand & (bmag < _FLAT_DIR_EPS)
        m_step = cand & ~m_flat

        bsafe = np.where(bmag < _FLAT_DIR_EPS, 1.0, bmag)
        dx = bx / bsafe
        dy = by / bsafe

        if rscale != 0.0:
            u01 = rng.draw_unit_array(keys[a], sa)
            theta = (2.0 * u01 - 1.0) * (rscale * _HALF_PI)
            ct = np.cos(theta)
            st = np.sin(theta)
            dx, dy = dx * ct - dy * st, dx * st + dy * ct

        nx = xa + cs * dx
        ny = ya + cs * dy
        outside = (nx < ox) | (nx > xmax) | (ny < oy) | (ny > ymax)
        if outside.any():
            with np.errstate(divide="ignore", invalid="ignore"):
                tx = np.where(
                    nx < ox,
                    (ox - xa) / (nx - xa),
                    np.where(nx > xmax, (xmax - xa) / (nx - xa), 1.0),
                )
                ty = np.where(
                    ny < oy,
                    (oy - ya) / (ny - ya),
                    np.where(ny > ymax, (ymax - ya) / (ny - ya), 1.0),
                )
            tc = np.minimum(tx, ty)
            fx = np.where(outside, xa + (nx - xa) * tc, nx)
            fy = np.where(outside, ya + (ny - ya) * tc, ny)
        else:
            fx = nx
            fy = ny

        znew, _, _ = _bilinear_batch(e, ox, oy, cs, ncols, nrows, fx, fy)
        delta = np.maximum(0.0, za - znew)

        if m_step.any():
            sel = m_step
            if hits is not None:
                rr, cc = _cells_of(ox, oy, cs, ncols, nrows, fx[sel], fy[sel])
                np.add.at(hits, (rr, cc), 1)
                np.maximum.at(zdelta, (rr, cc), delta[sel])
            ids = a[sel]
            x[ids] = fx[sel]
            y[ids] = fy[sel]
            zcur[ids] = znew[sel]
            dpx[ids] = dx[sel]
            dpy[ids] = dy[sel]
            steps[ids] += 1
            if record:
                for i, px, py in zip(ids, fx[sel], fy[sel]):
                    paths[i].append((float(px), float(py)))

        m_exit = m_step & outside
        reasons[a[m_run]] = 0
        reasons[a[m_exit]] = 1
        reasons[a[m_flat]] = 2
        reasons[a[m_max]] = 3
        alive = a[m_step & ~outside]

    return reasons, steps, paths


def simulate_particle(
    grid: DemGrid,
    start: tuple[float, float],
    params: AvalancheParams,
    stream: rng.CounterStream | None = None,
) -> Trajectory:
    """Trace a single particle and return its full trajectory.

    `stream` addresses the particle's random draws; by default the
    stream for (params.seed, cell 0, particle 0).
    """
    if grid.has_nodata():
        raise SimulationError("simulation requires a gap-free grid")
    if not grid.contains(start[0], start[1]):
        raise SimulationError(f"start {start} outside grid extent")
    key = stream.key if stream is not None else rng.derive_key(params.seed, 0, 0)
    keys = np.array([key], dtype=np.uint64)
    sx = np.array([start[0]], dtype=np.float64)
    sy = np.array([start[1]], dtype=np.float64)
    reasons, _, paths = _simulate_batch(grid, sx, sy, keys, params, record=True)
    return Trajectory(
        positions=np.array(paths[0], dtype=np.float64),
        stop_reason=_REASON_BY_CODE[reasons[0]],
    )


def run_avalanche(
    grid: DemGrid,
    mask: ReleaseMask,
    params: AvalancheParams,
    threads: int = 1,
) -> RunoutRaster:
    """Release particles from every marked cell and accumulate the flow.

    Each visited cell counts one hit per visit; each step records its
    vertical drop max(0, z_before - z_after) on the destination cell.
    Work is cut into fixed-size particle chunks merged with commutative
    operations, so any `threads` value yields bitwise-identical output.
    """
    if mask.mask.shape != grid.elevations.shape:
        raise SimulationError(
            f"mask shape {mask.mask.shape} does not match grid "
            f"{grid.elevations.shape}"
        )
    if threads < 1:
        raise ParamError(f"threads must be >= 1, got {threads}")
    if grid.has_nodata():
        raise SimulationError("simulation requires a gap-free grid")

    shape = grid.elevations.shape
    flat_cells = np.flatnonzero(mask.mask.ravel())
    k_count = flat_cells.size
    per_cell = params.particles_per_release_cell
    total = k_count * per_cell
    if total == 0:
        return RunoutRaster(np.zeros(shape), np.zeros(shape, dtype=np.int64))

    cell_rows = flat_cells // grid.ncols
    cell_cols = flat_cells % grid.ncols
    cx = grid.origin_x + (cell_cols + 0.5) * grid.cellsize
    cy = grid.origin_y + (grid.nrows - 1 - cell_rows + 0.5) * grid.cellsize

    def work(lo: int, hi: int):
        idx = np.arange(lo, hi, dtype=np.int64)
        ks = idx // per_cell
        ps = idx % per_cell
        keys = rng.derive_keys_array(params.seed, ks, ps)
        part_hits = np.zeros(shape, dtype=np.int64)
        part_zd = np.zeros(shape)
        _simulate_batch(
            grid, cx[ks], cy[ks], keys, params, hits=part_hits, zdelta=part_zd
        )
        return part_hits, part_zd

    bounds = [(lo, min(lo + _CHUNK, total)) for lo in range(0, total, _CHUNK)]
    hits = np.zeros(shape, dtype=np.int64)
    zdelta = np.zeros(shape)
    if threads == 1 or len(bounds) == 1:
        results = (work(lo, hi) for lo, hi in bounds)
        for part_hits, part_zd in results:
            hits += part_hits
            np.maximum(zdelta, part_zd, out=zdelta)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(work, lo, hi) for lo, hi in bounds]
            for fut in futures:
                part_hits, part_zd = fut.result()
                hits += part_hits
                np.maximum(zdelta, part_zd, out=zdelta)
    return RunoutRaster(zdelta, hits)


def released_particles(mask: ReleaseMask, params: AvalancheParams) -> int:
    return mask.count * params.particles_per_release_cell


def total_particle_steps(raster: RunoutRaster, released: int) -> int:
    """Steps taken across all particles: every hit beyond the per-particle
    release visit corresponds to one advance (clipped exits included)."""
    return int(raster.hit_count.sum()) - released


# -- snow cover -------------------------------------------------------


def snow_alpha(
    z: np.ndarray, slope_deg: np.ndarray, params: SnowParams
) -> np.ndarray:
    """Snow opacity as the product of two clamped linear ramps,
    quantized to uint8 by round-half-up (floor(x + 0.5))."""
    a_alt = np.clip(
        (z - (params.snow_line_m - params.altitude_blend_m))
        / max(params.altitude_blend_m, 1e-6),
        0.0,
        1.0,
    )
    a_slope = np.clip(
        ((params.max_steepness_deg + params.steepness_blend_deg) - slope_deg)
        / max(params.steepness_blend_deg, 1e-6),
        0.0,
        1.0,
    )
    return np.floor(255.0 * (a_alt * a_slope) + 0.5).astype(np.uint8)


def compute_snow(
    grid: DemGrid, normals: NormalField, params: SnowParams
) -> OverlayTexture:
    """White snow overlay over a grid: alpha from the altitude and
    steepness ramps, nodata cells fully transparent."""
    return compute_snow_from_slope(grid, steepness_deg(normals), params)


def compute_snow_from_slope(
    grid: DemGrid, slope: SlopeField, params: SnowParams
) -> OverlayTexture:
    """compute_snow for callers that already hold the steepness field."""
    alpha = snow_alpha(grid.elevations, slope.slope_deg, params)
    if grid.has_nodata():
        alpha = np.where(grid.elevations == grid.nodata, 0, alpha).astype(np.uint8)
    pixels = np.empty(grid.elevations.shape + (4,), dtype=np.uint8)
    pixels[..., 0] = 255
    pixels[..., 1] = 255
    pixels[..., 2] = 255
    pixels[..., 3] = alpha
    return OverlayTexture(pixels)


def scale_particles(params: AvalancheParams, particles: int) -> AvalancheParams:
    """Convenience copy-with-particles used by benchmarks and services."""
    return replace(params, particles_per_release_cell=particles)
