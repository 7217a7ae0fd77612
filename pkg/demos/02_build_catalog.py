"""Import particle cutouts into a sieve-binned asset catalog.

Run: python3 demos/02_build_catalog.py
Writes demos/output/catalog/ (also usable via the aggsynth CLI).
"""

from pathlib import Path

import aggsynth as ag
from _common import MID_MM, make_cutout

OUT = Path(__file__).parent / "output" / "catalog"


def main():
    catalog = ag.AssetCatalog(mm_per_px=0.3)
    for k in (1, 3, 5, 8):
        for j in range(3):
            rgb, mask = make_cutout(MID_MM[k - 1], 0.3, seed=100 * k + j)
            asset = ag.import_asset(rgb, mask, 0.3, asset_id=f"stone_{k}_{j}",
                                    source="synthetic")
            catalog.add(asset)
            print(f"{asset.asset_id}: {asset.size_mm:5.1f} mm -> "
                  f"class {asset.size_class.index} "
                  f"(layer {asset.size_class.layer}), "
                  f"{asset.area_px} px")

    print()
    for row in catalog.stats():
        if row["count"]:
            print(f"class {row['size_class']}: {row['count']} assets, "
                  f"{row['size_mm_min']:.1f}-{row['size_mm_max']:.1f} mm, "
                  f"mean area {row['area_px_mean']:.0f} px")
    ag.catalog_save(catalog, OUT)
    print(f"\nsaved {len(catalog)} assets -> {OUT}")

    reloaded = ag.catalog_load(OUT)
    assert len(reloaded) == len(catalog)
    print(f"reloaded OK, per-class counts {reloaded.class_counts().tolist()}")


if __name__ == "__main__":
    main()
