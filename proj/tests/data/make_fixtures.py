"""Regenerates the bundled test fixtures.

Writes tests/data/gates/ (single-image gate fixtures) and tests/data/mini/
(a 320x240 drone raster near Paris, its sidecar, and a fixture imagery
provider). Output is deterministic for a given numpy version; the committed
files are the reference, rerun only when changing the fixture design.
"""

import json
import math
from pathlib import Path

import numpy as np
from PIL import Image

ROOT = Path(__file__).resolve().parent
EARTH_RADIUS_M = 6371000.0
M_PER_DEG = 2.0 * math.pi * EARTH_RADIUS_M / 360.0

ORIGIN_LAT = 48.8566
ORIGIN_LON = 2.3522
WIDTH, HEIGHT = 320, 240


def smooth_noise(rng, h, w, sigma):
    """Gaussian-filtered white noise via FFT, scaled to unit std."""
    n = rng.standard_normal((h, w))
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    kernel = np.exp(-2.0 * (math.pi * sigma) ** 2 * (fx**2 + fy**2))
    out = np.real(np.fft.ifft2(np.fft.fft2(n) * kernel))
    return out / out.std()


def texture(rng, h, w):
    """Urban-like texture: coarse layout, mid-scale blocks, fine detail."""
    g = 38.0 * smooth_noise(rng, h, w, 10.0)
    g += 22.0 * smooth_noise(rng, h, w, 3.0)
    g += 14.0 * smooth_noise(rng, h, w, 0.8)
    return np.clip(128.0 + g, 12, 243)


def fine_texture(rng, h, w):
    """Texture dominated by 1-2 px detail, so a 9x9 box blur flattens it."""
    g = 40.0 * smooth_noise(rng, h, w, 0.7)
    g += 6.0 * smooth_noise(rng, h, w, 8.0)
    return np.clip(128.0 + g, 12, 243)


def to_rgb(gray, rng, tint=(1.0, 1.0, 1.0)):
    base = np.stack([gray * t for t in tint], axis=-1)
    base += rng.normal(0.0, 2.0, base.shape)
    return np.clip(np.rint(base), 1, 254).astype(np.uint8)


def save(path, array):
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(array).save(path, optimize=False)


def fixed7(deg):
    q = round(deg * 1e7)
    sign = "-" if q < 0 else ""
    q = abs(q)
    return f"{sign}{q // 10_000_000}.{q % 10_000_000:07d}"


def key(lat, lon):
    return f"{fixed7(lat)}_{fixed7(lon)}"


def make_gate_fixtures(rng):
    out = ROOT / "gates"
    save(out / "textured.png", to_rgb(fine_texture(rng, 96, 96), rng, (1.0, 0.97, 0.92)))
    rich = texture(rng, 128, 128)
    save(out / "rich.png", to_rgb(rich, rng, (0.95, 1.0, 0.9)))
    jpeg = to_rgb(rich, rng)
    Image.fromarray(jpeg).save(out / "rich.jpg", quality=92)


def make_mini(rng):
    out = ROOT / "mini"
    pixel_w = 1.0 / (M_PER_DEG * math.cos(math.radians(ORIGIN_LAT)))
    pixel_h = -1.0 / M_PER_DEG

    def geo(col, row):
        return ORIGIN_LAT + row * pixel_h, ORIGIN_LON + col * pixel_w

    gray = texture(rng, HEIGHT, WIDTH)
    # Regions are a few pixels wider than the crops that should hit them.
    # Seed 1: fog, blurred and flattened.
    fog = smooth_noise(rng, HEIGHT, WIDTH, 9.0)
    gray[0:90, 72:161] = 150.0 + 6.0 * fog[0:90, 72:161]
    # Seed 2: grainy but low contrast.
    gray[0:90, 161:252] = rng.uniform(104.0, 146.0, (90, 91))
    # Seed 4: two-tone tiles, too few gray levels.
    yy, xx = np.mgrid[76:166, 0:90]
    gray[76:166, 0:90] = np.where(((yy // 4) + (xx // 4)) % 2 == 0, 70.0, 185.0)
    rgb = to_rgb(gray, rng, (0.92, 1.0, 0.95))
    # Restore exact tones in the tiled block (to_rgb adds sensor noise).
    tiles = np.where(((yy // 4) + (xx // 4)) % 2 == 0, 70, 185).astype(np.uint8)
    rgb[76:166, 0:90] = tiles[..., None]
    # Seed 0: a specular roof, saturated white.
    rgb[38:50, 38:50] = 255
    save(out / "raster.png", rgb)

    sidecar = {
        "raster_id": "mini",
        "geotransform": [ORIGIN_LON, pixel_w, 0.0, ORIGIN_LAT, 0.0, pixel_h],
        "country": "FR",
        "split": "eval",
    }
    (out / "raster.json").write_text(json.dumps(sidecar, indent=2) + "\n")

    # Panorama pixel positions, one per seed except seed 3 (none nearby).
    panos = {
        0: (44.5, 44.5),
        1: (116.5, 44.5),
        2: (206.5, 44.5),
        4: (44.5, 120.5),
        5: (120.5, 120.5),
        6: (200.5, 120.5),
        7: (276.5, 120.5),
        8: (44.5, 196.5),
        9: (150.5, 196.5),
        10: (170.5, 196.5),
        11: (276.5, 196.5),
    }
    no_satellite = {7}
    no_text = {8}
    provider = out / "provider"
    for seed, (col, row) in sorted(panos.items()):
        lat, lon = geo(col, row)
        k = key(lat, lon)
        street = to_rgb(texture(rng, 48, 96), rng, (1.0, 0.95, 0.85))
        save(provider / "street" / f"{k}.png", street)
        if seed not in no_satellite:
            sat = to_rgb(texture(rng, 64, 64), rng, (0.85, 1.0, 0.85))
            save(provider / "satellite" / f"{k}.png", sat)
        if seed not in no_text:
            desc = f"Mixed urban block near seed {seed}: roofs, a street corner and trees."
            (provider / "text").mkdir(parents=True, exist_ok=True)
            (provider / "text" / f"{k}.txt").write_text(desc + "\n")


def main():
    rng = np.random.default_rng(20240611)
    make_gate_fixtures(rng)
    make_mini(rng)


if __name__ == "__main__":
    main()
