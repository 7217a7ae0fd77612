"""Synthetic benchmark scenes of densely packed aggregate particles.

A seeded engine that cuts particle assets out of source photographs,
bins them into sieve size classes, composes them onto canvases under
stage-specific occlusion rules, and writes RGB images with exact
instance ground truth (id graymap + amodal metadata), plus an
evaluation harness for predicted instance masks.
"""

__version__ = "0.1.0"

from .augment import AugmentConfig, AugmentParams, IDENTITY_PARAMS, apply, sample_params
from .catalog import AssetCatalog, ParticleAsset, catalog_load, catalog_save, import_asset
from .compose import (
    PlacedInstance,
    PsdSpec,
    Scene,
    StageSpec,
    class_weights,
    compose,
    compose_l1,
    compose_l2,
    compose_l3,
    derive_instance_seed,
    pair_occlusion_variant,
    sample_psd,
)
from .config import GenerationConfig, load_config, load_preset, resolve_config
from .evaluate import (
    MaskInstance,
    MetricsReport,
    ap_at,
    evaluate_dataset,
    masks_from_graymap,
    masks_from_record,
    match_instances,
    mean_iou,
    pairwise_iou,
    score_image,
)
from .formats import (
    ImageRecord,
    InstanceRecord,
    decode_rle,
    encode_rle,
    read_metadata,
    read_pgm,
    read_png,
    write_metadata,
    write_pgm,
    write_png,
)
from .maskops import (
    RefineParams,
    connected_components,
    convex_hull,
    dilate,
    drop_small_components,
    erode,
    farthest_pair,
    fill_holes,
    mask_iou,
    morph_close,
    morph_open,
    morph_refine,
)
from .pipeline import generate_dataset, generate_scene
from .render import Background, build_record, composite_rgb, overlay, rasterize_graymap
from .sieve import NUM_CLASSES, SIZE_CLASSES, SizeClass, classify_size, size_class

__all__ = [
    "AugmentConfig", "AugmentParams", "IDENTITY_PARAMS", "apply", "sample_params",
    "AssetCatalog", "ParticleAsset", "catalog_load", "catalog_save", "import_asset",
    "PlacedInstance", "PsdSpec", "Scene", "StageSpec",
    "compose", "compose_l1", "compose_l2", "compose_l3",
    "class_weights", "derive_instance_seed", "pair_occlusion_variant", "sample_psd",
    "GenerationConfig", "load_config", "load_preset", "resolve_config",
    "MaskInstance", "MetricsReport", "ap_at", "evaluate_dataset",
    "masks_from_graymap", "masks_from_record", "match_instances",
    "mean_iou", "pairwise_iou", "score_image",
    "ImageRecord", "InstanceRecord", "decode_rle", "encode_rle",
    "read_metadata", "read_pgm", "read_png",
    "write_metadata", "write_pgm", "write_png",
    "RefineParams", "connected_components", "convex_hull", "dilate",
    "drop_small_components", "erode", "farthest_pair", "fill_holes",
    "mask_iou", "morph_close", "morph_open", "morph_refine",
    "generate_dataset", "generate_scene",
    "Background", "build_record", "composite_rgb", "overlay", "rasterize_graymap",
    "NUM_CLASSES", "SIZE_CLASSES", "SizeClass", "classify_size", "size_class",
]
