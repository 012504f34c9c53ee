"""Generate the demo datasets under ./data.

Creates two datasets the other demos (and `demflow serve`) consume:

  data/parabola/   the bundled parabolic slope with a 3-cell release
                   column on the headwall
  data/ridges/     a synthetic ridge-and-bowl field, no release mask
                   (the service falls back to steepness-band release)

Run from the repository root:  python3 demos/01_generate_terrain.py
"""

from pathlib import Path

import numpy as np

from demflow import DemGrid, gen_parabola, write_ascii_grid


def write_dataset(folder: Path, grid: DemGrid, release: np.ndarray | None):
    folder.mkdir(parents=True, exist_ok=True)
    (folder / "dem.asc").write_text(write_ascii_grid(grid))
    written = [folder / "dem.asc"]
    if release is not None:
        mask_grid = DemGrid(
            ncols=grid.ncols,
            nrows=grid.nrows,
            origin_x=grid.origin_x,
            origin_y=grid.origin_y,
            cellsize=grid.cellsize,
            nodata=grid.nodata,
            elevations=release.astype(np.float64),
        )
        (folder / "release.asc").write_text(write_ascii_grid(mask_grid))
        written.append(folder / "release.asc")
    return written


def ridges_grid() -> DemGrid:
    """A few gaussian bumps and a diagonal ridge, 30 m cells."""
    ncols, nrows = 320, 240
    x = np.arange(ncols) * 30.0
    y = np.arange(nrows) * 30.0
    xx, yy = np.meshgrid(x, y[::-1])  # row 0 is the northern edge
    z = np.zeros((nrows, ncols))
    bumps = [
        (2600.0, 4200.0, 1400.0, 900.0),
        (6800.0, 2400.0, 1100.0, 700.0),
        (4200.0, 6000.0, 1700.0, 1200.0),
    ]
    for cx, cy, s, h in bumps:
        z += h * np.exp(-(((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * s * s)))
    z += 350.0 * np.exp(-((xx - yy - 1200.0) ** 2) / (2 * 900.0**2))
    z += 0.01 * xx  # gentle tilt so water has somewhere to go
    return DemGrid(
        ncols=ncols,
        nrows=nrows,
        origin_x=0.0,
        origin_y=0.0,
        cellsize=30.0,
        nodata=-9999.0,
        elevations=z,
    )


def main():
    data = Path("data")

    grid, release = gen_parabola()
    for path in write_dataset(data / "parabola", grid, release):
        print(f"wrote {path}")
    print(
        f"  parabola: {grid.ncols}x{grid.nrows} cells @ {grid.cellsize} m, "
        f"z {grid.elevations.min():.0f}..{grid.elevations.max():.0f} m, "
        f"{int(release.sum())} release cells"
    )

    ridges = ridges_grid()
    for path in write_dataset(data / "ridges", ridges, None):
        print(f"wrote {path}")
    print(
        f"  ridges:   {ridges.ncols}x{ridges.nrows} cells @ "
        f"{ridges.cellsize} m, z {ridges.elevations.min():.0f}.."
        f"{ridges.elevations.max():.0f} m, no release mask"
    )

    print("\nnext: python3 demos/02_avalanche_overlay.py")
    print("  or: python3 -m demflow.cli serve --data-dir data")


if __name__ == "__main__":
    main()
