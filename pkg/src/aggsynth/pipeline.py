"""Dataset pipeline: config + catalog -> directory of image triplets.

Every image is a pure function of (config, master_seed, image_index):
the per-image seed derives from the master seed by integer mixing, and
each random decision draws from a stream keyed to that seed alone.
Workers therefore never share random state, and the output bytes do not
depend on the worker count or schedule.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .catalog import catalog_load
from .compose import (
    NUM_CLASSES,
    compose,
    derive_instance_seed,
    pair_occlusion_variant,
    sample_psd,
)
from .config import GenerationConfig
from .formats import write_metadata, write_pgm, write_png
from .render import Background, build_record, composite_rgb, rasterize_graymap

# Sub-stream labels hanging off each per-image seed.
_STREAM_COUNTS = 1
_STREAM_COMPOSE = 2
_STREAM_BACKGROUND = 3


def image_id_for(config: GenerationConfig, image_index):
    return f"{config.stage}_{image_index:05d}"


def draw_counts(config: GenerationConfig, stage, rng):
    """Per-class instance counts for one image.

    L1/L2 put the whole drawn total on the image's single class; L3
    draws a multinomial over the configured classes.  ``halve_counts``
    then applies the per-class ceiling halving, yielding the
    low-occlusion companion of the unhalved config.
    """
    lo, hi = config.total_range
    if config.psd_kind == "explicit":
        counts = sample_psd(config.psd_spec(0), rng, allowed=stage.classes)
    else:
        total = int(rng.integers(lo, hi + 1))
        if stage.stage in ("L1", "L2"):
            counts = np.zeros(NUM_CLASSES, dtype=np.int64)
            counts[stage.classes[0] - 1] = total
        else:
            counts = sample_psd(config.psd_spec(total), rng,
                                allowed=stage.classes)
    if config.halve_counts:
        counts = pair_occlusion_variant(counts)
    return counts


def background_for(config: GenerationConfig, image_seed) -> Background:
    if config.background_kind == "flat":
        return Background.flat(color=config.background_color)
    return Background.speckle(
        derive_instance_seed(image_seed, 0, _STREAM_BACKGROUND)
    )


def generate_scene(catalog, config: GenerationConfig, image_index):
    """Compose one image's scene, fully determined by config + index."""
    image_seed = derive_instance_seed(config.master_seed, image_index, 0)
    stage = config.stage_for_image(image_index)
    count_rng = np.random.Generator(np.random.PCG64(
        derive_instance_seed(image_seed, 0, _STREAM_COUNTS)))
    counts = draw_counts(config, stage, count_rng)
    compose_rng = np.random.Generator(np.random.PCG64(
        derive_instance_seed(image_seed, 0, _STREAM_COMPOSE)))
    scene = compose(catalog, counts, stage, compose_rng,
                    seed=image_seed, cfg=config.augment)
    scene.background_id = background_for(config, image_seed).background_id
    return scene


def write_image(out_dir, image_id, scene, catalog, config: GenerationConfig):
    """Render and write one image's triplet; returns the record."""
    background = background_for(config, scene.seed)
    rgb = composite_rgb(scene, background, catalog)
    graymap = rasterize_graymap(scene)
    record = build_record(scene, image_id)
    write_png(rgb, os.path.join(out_dir, f"{image_id}.png"))
    write_pgm(graymap, os.path.join(out_dir, f"{image_id}.pgm"))
    write_metadata(record, os.path.join(out_dir, f"{image_id}.json"))
    return record


def generate_one(catalog, config: GenerationConfig, image_index, out_dir):
    image_id = image_id_for(config, image_index)
    scene = generate_scene(catalog, config, image_index)
    record = write_image(out_dir, image_id, scene, catalog, config)
    return {
        "image_id": image_id,
        "instances": len(record.instances),
        "shortfall": int(sum(record.shortfall)),
    }


_WORKER = {}


def _worker_init(catalog_dir, config_doc):
    _WORKER["catalog"] = catalog_load(catalog_dir)
    _WORKER["config"] = GenerationConfig.from_dict(config_doc)


def _worker_run(args):
    image_index, out_dir = args
    return generate_one(_WORKER["catalog"], _WORKER["config"],
                        image_index, out_dir)


def generate_dataset(catalog_dir, config: GenerationConfig, out_dir, jobs=1):
    """Generate the full dataset plus its manifest.

    ``jobs`` > 1 fans images out to worker processes, each loading the
    catalog once; results are identical to a single-process run.
    """
    if jobs < 1:
        raise ValueError(f"jobs must be positive, got {jobs!r}")
    catalog = catalog_load(catalog_dir, expected_mm_per_px=config.mm_per_px)
    # Fail before writing anything rather than partway through the run.
    missing = [k for k in config.classes if not catalog.by_class(k)]
    if missing:
        raise ValueError(
            "catalog has no assets for configured classes: "
            + ", ".join(str(k) for k in missing)
        )
    os.makedirs(out_dir, exist_ok=True)

    indices = range(config.image_count)
    if jobs == 1 or config.image_count == 1:
        summaries = [generate_one(catalog, config, i, out_dir) for i in indices]
    else:
        tasks = [(i, out_dir) for i in indices]
        with ProcessPoolExecutor(
            max_workers=min(jobs, config.image_count),
            initializer=_worker_init,
            initargs=(catalog_dir, config.content_dict()),
        ) as pool:
            summaries = list(pool.map(_worker_run, tasks))

    manifest = {
        "tool": "aggsynth",
        "version": __version__,
        "master_seed": config.master_seed,
        "config_hash": config.hash(),
        "config": config.content_dict(),
        "catalog_mm_per_px": catalog.mm_per_px,
        "catalog_assets": len(catalog),
        "images": summaries,
    }
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest
