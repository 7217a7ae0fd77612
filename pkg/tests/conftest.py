"""Shared fixtures: synthetic particle assets and catalogs."""

import sys
from pathlib import Path

import numpy as np
import pytest

import aggsynth as ag

sys.path.insert(0, str(Path(__file__).parent))

# Mid-class physical sizes in mm, classes 1..8.  Chosen far enough from
# the sieve bounds that a pixel or two of discretization cannot move an
# asset into a neighboring class.
MID_MM = (4.8, 6.8, 9.6, 13.6, 19.2, 28.5, 40.0, 54.0)


def blob_asset(asset_id, size_class, mm_per_px, seed):
    """Irregular elliptical particle whose longest chord lands mid-class."""
    rng = np.random.default_rng(seed)
    diameter = MID_MM[size_class - 1] / mm_per_px
    a = diameter / 2.0
    b = a * rng.uniform(0.6, 0.9)
    theta = rng.uniform(0.0, np.pi)
    n = int(np.ceil(diameter)) + 5
    cy = cx = (n - 1) / 2.0
    yy, xx = np.mgrid[0:n, 0:n]
    u = (xx - cx) * np.cos(theta) + (yy - cy) * np.sin(theta)
    v = -(xx - cx) * np.sin(theta) + (yy - cy) * np.cos(theta)
    mask = (u / a) ** 2 + (v / b) ** 2 <= 1.0
    base = rng.integers(70, 180, size=3)
    rgb = np.clip(
        base[None, None, :] + rng.normal(0.0, 12.0, size=(n, n, 3)),
        0, 255,
    ).astype(np.uint8)
    asset = ag.import_asset(rgb, mask, mm_per_px, asset_id)
    assert asset.size_class.index == size_class, (asset_id, asset.size_class)
    return asset


def build_catalog(mm_per_px, per_class=3, seed0=1000):
    cat = ag.AssetCatalog(mm_per_px=mm_per_px)
    for k in range(1, 9):
        for j in range(per_class):
            cat.add(blob_asset(f"c{k}_{j}", k, mm_per_px, seed0 + 97 * k + j))
    return cat


@pytest.fixture(scope="session")
def catalog03():
    """Catalog at 0.3 mm/px, three assets in every sieve class."""
    return build_catalog(0.3)


@pytest.fixture(scope="session")
def catalog03_dir(catalog03, tmp_path_factory):
    path = tmp_path_factory.mktemp("catalog03") / "cat"
    ag.catalog_save(catalog03, path)
    return path


@pytest.fixture(scope="session")
def catalog005():
    """Catalog at 0.05 mm/px matching the shipped preset resolution."""
    return build_catalog(0.05)


@pytest.fixture(scope="session")
def catalog005_dir(catalog005, tmp_path_factory):
    path = tmp_path_factory.mktemp("catalog005") / "cat"
    ag.catalog_save(catalog005, path)
    return path


def stage(kind, classes, size=512, mm_per_px=0.3, **kw):
    return ag.StageSpec(
        stage=kind,
        classes=tuple(classes),
        width=size,
        height=size,
        mm_per_px=mm_per_px,
        **kw,
    )


def counts_for(class_to_count):
    """8-vector of per-class counts from a {class: count} dict."""
    counts = np.zeros(8, dtype=np.int64)
    for k, c in class_to_count.items():
        counts[k - 1] = c
    return counts
