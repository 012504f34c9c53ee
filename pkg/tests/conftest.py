import numpy as np
import pytest

from demflow.grid import DemGrid, gen_parabola


def make_smooth_grid(seed: int, ncols: int | None = None, nrows: int | None = None) -> DemGrid:
    """Random smooth synthetic terrain: a few gaussian bumps over a gentle
    tilted plane.  Smooth enough that steepest descent is well behaved,
    varied enough to exercise every stop condition."""
    r = np.random.default_rng(seed)
    if ncols is None:
        ncols = int(r.integers(24, 64))
    if nrows is None:
        nrows = int(r.integers(24, 64))
    cs = float(r.uniform(4.0, 25.0))
    ox = float(r.uniform(-1000.0, 1000.0))
    oy = float(r.uniform(-1000.0, 1000.0))
    xs = ox + (np.arange(ncols) + 0.5) * cs
    ys = oy + (nrows - 1 - np.arange(nrows) + 0.5) * cs  # row 0 is north
    X, Y = np.meshgrid(xs, ys)
    z = np.zeros((nrows, ncols))
    for _ in range(int(r.integers(3, 8))):
        cx = float(r.uniform(xs.min(), xs.max()))
        cy = float(r.uniform(ys.min(), ys.max()))
        amp = float(r.uniform(20.0, 120.0)) * float(r.choice([-1.0, 1.0]))
        sig = float(r.uniform(3.0, 10.0)) * cs
        z = z + amp * np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2.0 * sig * sig))
    z = z + (X - xs.min()) * float(r.uniform(-0.15, 0.15))
    z = z + (Y - ys.min()) * float(r.uniform(-0.15, 0.15))
    z = z - z.min()
    return DemGrid(
        ncols=ncols,
        nrows=nrows,
        origin_x=ox,
        origin_y=oy,
        cellsize=cs,
        nodata=-9999.0,
        elevations=z,
    )


def make_random_grid(seed: int, with_nodata: bool = True) -> DemGrid:
    """Arbitrary-valued grid (not smooth) for format round-trip tests."""
    r = np.random.default_rng(seed)
    ncols = int(r.integers(2, 40))
    nrows = int(r.integers(2, 40))
    z = r.uniform(-5000.0, 9000.0, size=(nrows, ncols))
    # sprinkle awkward values
    flat = z.ravel()
    idx = r.integers(0, flat.size, size=max(1, flat.size // 7))
    flat[idx] = r.choice([0.0, -0.0, 1.0, 123456789.0, 0.1, 1e-12, 2.5], size=idx.size)
    nodata = float(r.choice([-9999.0, -999.25, 3.5e38]))
    if with_nodata and r.random() < 0.7:
        holes = r.integers(0, flat.size, size=max(1, flat.size // 11))
        flat[holes] = nodata
    return DemGrid(
        ncols=ncols,
        nrows=nrows,
        origin_x=float(r.uniform(-1e6, 1e6)),
        origin_y=float(r.uniform(-1e6, 1e6)),
        cellsize=float(r.uniform(0.01, 500.0)),
        nodata=nodata,
        elevations=z,
    )


def make_random_texture(seed: int) -> np.ndarray:
    r = np.random.default_rng(seed)
    h = int(r.integers(1, 40))
    w = int(r.integers(1, 40))
    return r.integers(0, 256, size=(h, w, 4), dtype=np.uint8)


@pytest.fixture(scope="session")
def parabola():
    return gen_parabola()


@pytest.fixture(scope="session")
def parabola_grid(parabola):
    return parabola[0]


@pytest.fixture(scope="session")
def parabola_mask(parabola):
    return parabola[1]
