"""Particle asset extraction and on-disk catalog management.

An asset is a single particle cut out from a source photograph: an RGBA
sprite, a boolean mask of the same extent, and the physical size derived
from the mask geometry.  Assets are binned into the eight sieve classes
and stored in a directory tree, one subdirectory per class, with a JSON
index holding sizes and provenance.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .formats import read_pgm, write_pgm, GRAYMAP_MAXVAL
from .maskops import (
    RefineParams,
    connected_components,
    farthest_pair,
    mask_bbox,
    morph_refine,
)
from .sieve import NUM_CLASSES, SizeClass, classify_size

# Imported masks below this many pixels cannot support a stable
# farthest-pair measurement and are rejected outright.
MIN_ASSET_AREA_PX = 8

IMPORT_REFINE = RefineParams(min_area_px=MIN_ASSET_AREA_PX)

INDEX_NAME = "index.json"
CATALOG_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ParticleAsset:
    """One extracted particle ready for placement.

    Attributes
    ----------
    asset_id : str
        Unique identifier within a catalog, e.g. ``"c4_0012"``.
    sprite : np.ndarray
        (H, W, 4) uint8 RGBA cutout.  Alpha is 255 on mask pixels, 0 off.
    mask : np.ndarray
        (H, W) bool support of the particle.
    size_mm : float
        Farthest-pair caliper length converted to millimetres.
    size_class : SizeClass
        Sieve class the particle falls into.
    source : str
        Free-form provenance string (source image path or label).
    """

    asset_id: str
    sprite: np.ndarray
    mask: np.ndarray
    size_mm: float
    size_class: SizeClass
    source: str = ""

    def __post_init__(self):
        if self.sprite.ndim != 3 or self.sprite.shape[2] != 4:
            raise ValueError("sprite must be (H, W, 4) RGBA")
        if self.mask.shape != self.sprite.shape[:2]:
            raise ValueError("mask extent does not match sprite")

    @property
    def area_px(self) -> int:
        return int(np.count_nonzero(self.mask))


def import_asset(image, mask, mm_per_px, asset_id, source="",
                 refine=IMPORT_REFINE):
    """Cut a particle out of a source photograph.

    The raw mask is refined (closing, hole fill, small-component
    removal), reduced to its largest connected component, and cropped to
    the component bounding box with a one pixel margin.  Physical size is
    the farthest-pair distance across the mask times ``mm_per_px``.

    Parameters
    ----------
    image : np.ndarray
        (H, W, 3) uint8 source photograph.
    mask : np.ndarray
        (H, W) boolean or 0/1 annotation mask for one particle.
    mm_per_px : float
        Physical resolution of the source image.
    asset_id : str
        Identifier to assign.
    source : str
        Provenance note stored with the asset.
    refine : RefineParams
        Mask cleanup parameters.

    Returns
    -------
    ParticleAsset

    Raises
    ------
    ValueError
        If the refined mask is empty or too small ("degenerate
        particle"), or the measured size falls outside the sieve range.
    """
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError("image must be (H, W, 3) RGB")
    mask = np.asarray(mask)
    if mask.shape != image.shape[:2]:
        raise ValueError("mask extent does not match image")
    if mm_per_px <= 0:
        raise ValueError(f"mm_per_px must be positive, got {mm_per_px!r}")

    refined = morph_refine(mask, refine)
    if not refined.any():
        raise ValueError(f"degenerate particle {asset_id!r}: mask empty after refinement")

    components = connected_components(refined)
    if len(components) > 1:
        # Ties fall to the component met first in raster order.
        refined = max(components, key=lambda m: int(np.count_nonzero(m)))
    if int(np.count_nonzero(refined)) < MIN_ASSET_AREA_PX:
        raise ValueError(
            f"degenerate particle {asset_id!r}: "
            f"{int(np.count_nonzero(refined))} px below minimum {MIN_ASSET_AREA_PX}"
        )

    x0, y0, w, h = mask_bbox(refined)
    # One pixel of breathing room so rotation interpolation never clips.
    xa = max(0, x0 - 1)
    ya = max(0, y0 - 1)
    xb = min(refined.shape[1], x0 + w + 1)
    yb = min(refined.shape[0], y0 + h + 1)
    crop_mask = refined[ya:yb, xa:xb]
    crop_rgb = image[ya:yb, xa:xb]

    size_px = farthest_pair(crop_mask)
    size_mm = size_px * float(mm_per_px)
    cls = classify_size(size_mm)

    sprite = np.zeros(crop_mask.shape + (4,), dtype=np.uint8)
    sprite[..., :3] = np.where(crop_mask[..., None], crop_rgb, 0)
    sprite[..., 3] = np.where(crop_mask, 255, 0).astype(np.uint8)
    return ParticleAsset(asset_id=asset_id, sprite=sprite, mask=crop_mask.copy(),
                         size_mm=size_mm, size_class=cls, source=source)


@dataclass
class AssetCatalog:
    """In-memory pool of assets grouped by sieve class."""

    mm_per_px: float
    assets: dict = field(default_factory=dict)   # asset_id -> ParticleAsset

    def __post_init__(self):
        if self.mm_per_px <= 0:
            raise ValueError(f"mm_per_px must be positive, got {self.mm_per_px!r}")

    def add(self, asset: ParticleAsset):
        if asset.asset_id in self.assets:
            raise ValueError(f"duplicate asset id {asset.asset_id!r}")
        self.assets[asset.asset_id] = asset

    def __len__(self):
        return len(self.assets)

    def __contains__(self, asset_id):
        return asset_id in self.assets

    def get(self, asset_id) -> ParticleAsset:
        try:
            return self.assets[asset_id]
        except KeyError:
            raise KeyError(f"unknown asset id {asset_id!r}") from None

    def by_class(self, class_index) -> list:
        """Assets of one sieve class, ordered by id."""
        return [a for _, a in sorted(self.assets.items())
                if a.size_class.index == class_index]

    def class_counts(self):
        """Pool size per sieve class as an array of length 8."""
        counts = np.zeros(NUM_CLASSES, dtype=np.int64)
        for a in self.assets.values():
            counts[a.size_class.index - 1] += 1
        return counts

    def stats(self):
        """Per-class summary: count, min/mean/max size, min/mean/max area."""
        rows = []
        for k in range(1, NUM_CLASSES + 1):
            pool = self.by_class(k)
            row = {"size_class": k, "count": len(pool)}
            if pool:
                sizes = np.array([a.size_mm for a in pool])
                areas = np.array([a.area_px for a in pool])
                row.update(
                    size_mm_min=float(sizes.min()),
                    size_mm_mean=float(sizes.mean()),
                    size_mm_max=float(sizes.max()),
                    area_px_min=int(areas.min()),
                    area_px_mean=float(areas.mean()),
                    area_px_max=int(areas.max()),
                )
            rows.append(row)
        return rows


def _asset_paths(root, asset: ParticleAsset):
    sub = os.path.join(root, f"class_{asset.size_class.index}")
    return (os.path.join(sub, f"{asset.asset_id}.png"),
            os.path.join(sub, f"{asset.asset_id}.pgm"))


def catalog_save(catalog: AssetCatalog, root):
    """Write a catalog to a directory tree.

    Layout::

        root/
          index.json
          class_4/
            c4_0000.png     RGBA sprite
            c4_0000.pgm     16-bit mask graymap (0 / 65535)
          ...

    Sprites carry their mask in the alpha channel already; the graymap
    sits alongside so masks round-trip without PNG alpha handling.
    """
    os.makedirs(root, exist_ok=True)
    entries = []
    for asset_id in sorted(catalog.assets):
        asset = catalog.assets[asset_id]
        png_path, pgm_path = _asset_paths(root, asset)
        os.makedirs(os.path.dirname(png_path), exist_ok=True)
        Image.fromarray(asset.sprite, mode="RGBA").save(png_path, format="PNG")
        write_pgm(asset.mask.astype(np.uint16) * GRAYMAP_MAXVAL, pgm_path)
        entries.append({
            "asset_id": asset.asset_id,
            "size_class": asset.size_class.index,
            "size_mm": asset.size_mm,
            "source": asset.source,
        })
    index = {
        "format_version": CATALOG_FORMAT_VERSION,
        "mm_per_px": catalog.mm_per_px,
        "assets": entries,
    }
    with open(os.path.join(root, INDEX_NAME), "w", encoding="utf-8") as fh:
        json.dump(index, fh, indent=2)
        fh.write("\n")


def catalog_load(root, expected_mm_per_px=None) -> AssetCatalog:
    """Load a catalog directory written by :func:`catalog_save`.

    Raises
    ------
    FileNotFoundError
        If the index or a referenced asset file is missing.
    ValueError
        On index corruption, sprite/mask disagreement, or when
        ``expected_mm_per_px`` is given and does not match the stored
        resolution.
    """
    index_path = os.path.join(root, INDEX_NAME)
    if not os.path.isfile(index_path):
        raise FileNotFoundError(f"catalog index not found: {index_path}")
    with open(index_path, "r", encoding="utf-8") as fh:
        try:
            index = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"corrupt catalog index {index_path}: {exc}") from exc

    for key in ("format_version", "mm_per_px", "assets"):
        if key not in index:
            raise ValueError(f"corrupt catalog index {index_path}: missing {key!r}")
    if index["format_version"] != CATALOG_FORMAT_VERSION:
        raise ValueError(
            f"unsupported catalog format_version {index['format_version']!r}"
        )
    mm_per_px = float(index["mm_per_px"])
    if expected_mm_per_px is not None and mm_per_px != expected_mm_per_px:
        raise ValueError(
            f"catalog resolution mismatch: stored {mm_per_px} mm/px, "
            f"expected {expected_mm_per_px} mm/px"
        )

    catalog = AssetCatalog(mm_per_px=mm_per_px)
    for entry in index["assets"]:
        asset_id = entry["asset_id"]
        cls = classify_size(float(entry["size_mm"]))
        if cls.index != int(entry["size_class"]):
            raise ValueError(
                f"catalog index inconsistency for {asset_id!r}: size "
                f"{entry['size_mm']} mm is class {cls.index}, "
                f"index says {entry['size_class']}"
            )
        sub = os.path.join(root, f"class_{cls.index}")
        png_path = os.path.join(sub, f"{asset_id}.png")
        pgm_path = os.path.join(sub, f"{asset_id}.pgm")
        if not os.path.isfile(png_path):
            raise FileNotFoundError(f"missing asset sprite: {png_path}")
        if not os.path.isfile(pgm_path):
            raise FileNotFoundError(f"missing asset mask: {pgm_path}")
        sprite = np.asarray(Image.open(png_path).convert("RGBA"))
        mask = read_pgm(pgm_path) == GRAYMAP_MAXVAL
        if mask.shape != sprite.shape[:2]:
            raise ValueError(f"sprite/mask extent mismatch for {asset_id!r}")
        alpha = sprite[..., 3] > 0
        if not np.array_equal(alpha, mask):
            raise ValueError(f"sprite alpha disagrees with mask for {asset_id!r}")
        catalog.add(ParticleAsset(
            asset_id=asset_id, sprite=sprite, mask=mask,
            size_mm=float(entry["size_mm"]), size_class=cls,
            source=entry.get("source", ""),
        ))
    return catalog
