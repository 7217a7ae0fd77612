"""Command-line entry points.

Subcommands: ``import`` (build a catalog from cutout/mask pairs),
``generate`` (config-driven dataset generation), ``evaluate`` (score
predictions), ``overlay`` (colorized mask visualization), ``stats``
(PSD and occlusion summaries of a generated dataset).

Exit codes: 0 success, 1 internal error, 2 input or validation error.
The ``AGGSYNTH_CATALOG`` environment variable supplies a default
catalog directory for commands that need one.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .catalog import AssetCatalog, catalog_save, import_asset
from .config import PRESET_NAMES, load_config
from .evaluate import evaluate_dataset
from .formats import read_metadata, read_pgm, read_png, write_png
from .pipeline import generate_dataset
from .render import overlay
from .sieve import NUM_CLASSES

CATALOG_ENV = "AGGSYNTH_CATALOG"

MASK_SUFFIX = "_mask.png"


def _resolve_catalog(value):
    catalog_dir = value or os.environ.get(CATALOG_ENV)
    if not catalog_dir:
        raise ValueError(
            f"no catalog given: pass --catalog or set {CATALOG_ENV}"
        )
    return catalog_dir


def _class_table(counts):
    lines = ["class  count"]
    for k in range(NUM_CLASSES):
        lines.append(f"{k + 1:5d}  {int(counts[k]):5d}")
    lines.append(f"total  {int(sum(counts)):5d}")
    return "\n".join(lines)


def cmd_import(args):
    """Build a catalog from ``<stem>.png`` + ``<stem>_mask.png`` pairs."""
    names = sorted(os.listdir(args.src))
    masks = {n[:-len(MASK_SUFFIX)] for n in names if n.endswith(MASK_SUFFIX)}
    images = {n[:-4] for n in names
              if n.endswith(".png") and not n.endswith(MASK_SUFFIX)}
    unpaired = sorted((images - masks) | (masks - images))
    if unpaired:
        raise ValueError("unpaired input files: " + ", ".join(unpaired))
    stems = sorted(images & masks)
    if not stems:
        raise ValueError(f"no input pairs in {args.src}")

    catalog = AssetCatalog(mm_per_px=args.mm_per_px)
    skipped = 0
    for stem in stems:
        try:
            image = read_png(os.path.join(args.src, f"{stem}.png"))[..., :3]
            mask = read_png(os.path.join(args.src, stem + MASK_SUFFIX))
            mask = np.any(mask[..., :3] > 0, axis=2)
            asset = import_asset(image, mask, args.mm_per_px,
                                 asset_id=stem, source=f"{stem}.png")
        except ValueError as exc:
            print(f"warning: skipping {stem}: {exc}", file=sys.stderr)
            skipped += 1
            continue
        catalog.add(asset)
    if len(catalog) == 0:
        raise ValueError("all input pairs were rejected")
    catalog_save(catalog, args.out)
    print(f"imported {len(catalog)} assets ({skipped} skipped) -> {args.out}")
    print(_class_table(catalog.class_counts()))
    return 0


def cmd_generate(args):
    """Generate a dataset from a config file into a directory."""
    config = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.images is not None:
        overrides["image_count"] = args.images
    if args.width is not None:
        overrides["width"] = args.width
    if args.height is not None:
        overrides["height"] = args.height
    if overrides:
        from .config import GenerationConfig, deep_merge, resolve_config
        config = GenerationConfig.from_dict(
            resolve_config(deep_merge(config.content_dict(), overrides)))
    catalog_dir = _resolve_catalog(args.catalog)
    manifest = generate_dataset(catalog_dir, config, args.out, jobs=args.jobs)
    placed = sum(entry["instances"] for entry in manifest["images"])
    print(f"wrote {len(manifest['images'])} images, {placed} instances "
          f"-> {args.out}")
    return 0


def cmd_evaluate(args):
    """Score a prediction directory against a generated dataset."""
    report = evaluate_dataset(args.gt, args.pred, amodal=args.amodal)
    print(report.table())
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2)
            fh.write("\n")
        print(f"report -> {args.report}")
    return 0


def cmd_overlay(args):
    """Blend per-instance colors over an image."""
    rgb = read_png(args.image)[..., :3]
    graymap = read_pgm(args.graymap)
    write_png(overlay(rgb, graymap, alpha=args.alpha), args.out)
    print(f"overlay -> {args.out}")
    return 0


def cmd_stats(args):
    """Summarize PSD, visibility, and occlusion of a dataset."""
    names = sorted(n for n in os.listdir(args.dataset)
                   if n.endswith(".json") and n != "manifest.json")
    if not names:
        raise ValueError(f"no ground-truth records in {args.dataset}")
    histogram = np.zeros(NUM_CLASSES, dtype=np.int64)
    shortfall = np.zeros(NUM_CLASSES, dtype=np.int64)
    vis_bins = np.zeros(10, dtype=np.int64)
    fully_hidden = 0
    vis_sum = 0.0
    n_instances = 0
    for name in names:
        record = read_metadata(os.path.join(args.dataset, name))
        histogram += np.array(record.psd_histogram, dtype=np.int64)
        shortfall += np.array(record.shortfall, dtype=np.int64)
        for inst in record.instances:
            n_instances += 1
            vis_sum += inst.visibility
            vis_bins[min(9, int(inst.visibility * 10))] += 1
            if inst.visible_area == 0:
                fully_hidden += 1
        print(f"{record.image_id}: {len(record.instances)} instances, "
              "psd " + "/".join(str(c) for c in record.psd_histogram))
    print()
    print("aggregate class histogram")
    print(_class_table(histogram))
    if shortfall.any():
        print("shortfall per class: "
              + "/".join(str(int(s)) for s in shortfall))
    print()
    print("visibility histogram (10% bins, low to high)")
    print("  " + " ".join(str(int(v)) for v in vis_bins))
    mean_vis = vis_sum / n_instances if n_instances else 0.0
    print(f"instances {n_instances}, mean visibility {mean_vis:.4f}, "
          f"fully occluded {fully_hidden}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="aggsynth",
        description="Synthetic aggregate-particle benchmark generator",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("import", help="build a catalog from cutout/mask pairs")
    p.add_argument("--src", required=True, help="directory of <stem>.png + <stem>_mask.png")
    p.add_argument("--mm-per-px", type=float, required=True, dest="mm_per_px")
    p.add_argument("--out", required=True, help="catalog directory to write")
    p.set_defaults(func=cmd_import)

    p = sub.add_parser("generate", help="generate a dataset from a config")
    p.add_argument("--config", required=True,
                   help=f"config JSON; may name a preset ({', '.join(PRESET_NAMES)})")
    p.add_argument("--catalog", help=f"catalog directory (default ${CATALOG_ENV})")
    p.add_argument("--out", required=True, help="dataset directory to write")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--seed", type=int, help="override master_seed")
    p.add_argument("--images", type=int, help="override image_count")
    p.add_argument("--width", type=int, help="override canvas width")
    p.add_argument("--height", type=int, help="override canvas height")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="score predictions against a dataset")
    p.add_argument("--gt", required=True, help="generated dataset directory")
    p.add_argument("--pred", required=True, help="prediction directory")
    p.add_argument("--amodal", action="store_true",
                   help="evaluate against amodal masks instead of visible")
    p.add_argument("--report", help="write the JSON report here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("overlay", help="colorize instances over an image")
    p.add_argument("--image", required=True)
    p.add_argument("--graymap", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float, default=0.5)
    p.set_defaults(func=cmd_overlay)

    p = sub.add_parser("stats", help="summarize a generated dataset")
    p.add_argument("--dataset", required=True)
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError, NotADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort boundary
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
