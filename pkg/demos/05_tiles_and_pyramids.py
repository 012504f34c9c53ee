"""From one overlay texture to slippy-map tiles.

Colorizes an avalanche run, builds the mipmap pyramid, then carves
256 px tiles out of it the way the HTTP service does. Tiles are
addressed (zoom, tx, ty) on a 2^zoom x 2^zoom square; tiles past the
texture's coverage are valid, fully transparent padding.

Needs data/ from demos/01_generate_terrain.py.
"""

from pathlib import Path

from demflow import (
    DEFAULT_RUNOUT_COLORMAP,
    AvalancheParams,
    ReleaseMask,
    build_mipmap,
    colorize,
    encode_png,
    extract_tile,
    max_tile_zoom,
    parse_ascii_grid,
    run_avalanche,
)

OUT = Path("demos/out")


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    grid = parse_ascii_grid(Path("data/parabola/dem.asc").read_text())
    release = parse_ascii_grid(Path("data/parabola/release.asc").read_text())
    mask = ReleaseMask(
        (release.elevations != 0) & (release.elevations != release.nodata)
    )

    raster = run_avalanche(
        grid,
        mask,
        AvalancheParams(runout_angle_deg=12.0, seed=7),
        threads=4,
    )
    overlay = colorize(raster, DEFAULT_RUNOUT_COLORMAP)
    pyramid = build_mipmap(overlay)

    print(f"overlay {pyramid.width}x{pyramid.height} -> pyramid levels:")
    for i, level in enumerate(pyramid.levels):
        opaque = (level.pixels[..., 3] > 0).mean() * 100.0
        print(f"  level {i}: {level.width:>4}x{level.height:<4} {opaque:5.1f}% visible")

    zmax = max_tile_zoom(pyramid.width, pyramid.height)
    print(f"\ntile zooms 0..{zmax} (256 px tiles)")
    for zoom in range(zmax + 1):
        n = 2**zoom
        for ty in range(n):
            row = []
            for tx in range(n):
                tile = extract_tile(pyramid, zoom, tx, ty)
                visible = int((tile.pixels[..., 3] > 0).sum())
                row.append(f"({tx},{ty}) {visible:>5}px")
                if visible:
                    path = OUT / f"tile_z{zoom}_{tx}_{ty}.png"
                    path.write_bytes(encode_png(tile))
            print(f"  z{zoom} ty={ty}: " + "   ".join(row))

    print(f"\nnon-empty tiles written to {OUT}/tile_z*.png")
    print("the service serves exactly these bytes at /api/jobs/<id>/tiles/{z}/{x}/{y}.png")


if __name__ == "__main__":
    main()
