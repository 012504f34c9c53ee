"""Snow-cover overlays at a sweep of snow lines.

Needs data/ from demos/01_generate_terrain.py.
"""

from pathlib import Path

from demflow import SnowParams, compute_normals, compute_snow, parse_ascii_grid, encode_png

OUT = Path("demos/out")


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    grid = parse_ascii_grid(Path("data/ridges/dem.asc").read_text())
    normals = compute_normals(grid)

    for snow_line in (400.0, 800.0, 1200.0):
        params = SnowParams(
            snow_line_m=snow_line,
            altitude_blend_m=150.0,
            max_steepness_deg=50.0,
            steepness_blend_deg=10.0,
        )
        tex = compute_snow(grid, normals, params)
        alpha = tex.pixels[..., 3]
        path = OUT / f"snow_line{snow_line:g}.png"
        path.write_bytes(encode_png(tex))
        covered = (alpha == 255).mean() * 100.0
        fringe = ((alpha > 0) & (alpha < 255)).mean() * 100.0
        print(
            f"snow line {snow_line:6.0f} m: {covered:5.1f}% solid, "
            f"{fringe:4.1f}% fringe -> {path}"
        )


if __name__ == "__main__":
    main()
