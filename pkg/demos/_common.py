"""Shared helper for the demo scripts: synthetic particle cutouts.

Real use starts from photographs of particles on a neutral background;
the demos synthesize lumpy ellipses instead so they run standalone.
"""

import numpy as np

import aggsynth as ag

# mid-class physical sizes in mm, classes 1..8
MID_MM = (4.8, 6.8, 9.6, 13.6, 19.2, 28.5, 40.0, 54.0)


def make_cutout(size_mm, mm_per_px, seed):
    """One synthetic particle: (H, W, 3) uint8 image + bool mask."""
    rng = np.random.default_rng(seed)
    diameter = size_mm / mm_per_px
    a = diameter / 2.0
    b = a * rng.uniform(0.6, 0.9)
    theta = rng.uniform(0.0, np.pi)
    n = int(np.ceil(diameter)) + 5
    c = (n - 1) / 2.0
    yy, xx = np.mgrid[0:n, 0:n]
    u = (xx - c) * np.cos(theta) + (yy - c) * np.sin(theta)
    v = -(xx - c) * np.sin(theta) + (yy - c) * np.cos(theta)
    mask = (u / a) ** 2 + (v / b) ** 2 <= 1.0
    base = rng.integers(70, 180, size=3)
    rgb = np.clip(base[None, None, :] + rng.normal(0.0, 12.0, size=(n, n, 3)),
                  0, 255).astype(np.uint8)
    return rgb, mask


def demo_catalog(mm_per_px=0.3, per_class=2, seed0=7):
    """Small catalog with assets in every sieve class."""
    catalog = ag.AssetCatalog(mm_per_px=mm_per_px)
    for k in range(1, 9):
        for j in range(per_class):
            rgb, mask = make_cutout(MID_MM[k - 1], mm_per_px,
                                    seed0 + 31 * k + j)
            catalog.add(ag.import_asset(rgb, mask, mm_per_px,
                                        asset_id=f"demo_c{k}_{j}"))
    return catalog
