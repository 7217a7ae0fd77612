"""On-disk ground-truth formats: 16-bit PGM graymaps, lossless PNG, RLE, metadata JSON.

The graymap convention is fixed: binary PGM, magic "P5", maxval 65535, two
bytes per sample most-significant-byte first. Pixel value is the topmost
instance id covering that pixel, 0 for background. Amodal masks travel in the
metadata document as run-length encoding over the row-major bounding-box
raster, since the graymap alone cannot represent occluded pixels.

All writers are deterministic: identical inputs produce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .augment import AugmentParams

__all__ = [
    "GRAYMAP_MAXVAL",
    "ImageRecord",
    "InstanceRecord",
    "decode_rle",
    "encode_rle",
    "instance_canvas_mask",
    "read_metadata",
    "read_pgm",
    "read_png",
    "write_metadata",
    "write_pgm",
    "write_png",
]

GRAYMAP_MAXVAL = 65535


# ---------------------------------------------------------------------------
# PGM


def write_pgm(ids: np.ndarray, path: str | Path) -> None:
    """Write an instance-id raster as a 16-bit binary PGM (big-endian samples)."""
    arr = np.asarray(ids)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"graymap must be a non-empty 2D array, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise ValueError(f"graymap must have an integer dtype, got {arr.dtype}")
    if arr.min() < 0 or arr.max() > GRAYMAP_MAXVAL:
        raise ValueError("graymap values must be in [0, 65535]")
    h, w = arr.shape
    header = f"P5\n{w} {h}\n{GRAYMAP_MAXVAL}\n".encode("ascii")
    Path(path).write_bytes(header + arr.astype(">u2").tobytes())


def _next_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n and data[pos : pos + 1].isspace():
        pos += 1
    start = pos
    while pos < n and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise ValueError("malformed header: unexpected end of file")
    return data[start:pos], pos


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a 16-bit binary PGM written by write_pgm back into a uint16 array."""
    data = Path(path).read_bytes()
    magic, pos = _next_token(data, 0)
    if magic != b"P5":
        raise ValueError(f"malformed header: expected magic P5, got {magic!r}")
    fields = []
    for name in ("width", "height", "maxval"):
        token, pos = _next_token(data, pos)
        try:
            value = int(token)
        except ValueError:
            raise ValueError(f"malformed header: non-integer {name} {token!r}") from None
        fields.append(value)
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise ValueError(f"malformed header: non-positive dimensions {width}x{height}")
    if maxval != GRAYMAP_MAXVAL:
        raise ValueError(f"unsupported maxval {maxval}, expected {GRAYMAP_MAXVAL}")
    # Exactly one whitespace byte separates the header from the payload.
    pos += 1
    expected = width * height * 2
    payload = data[pos : pos + expected]
    if len(payload) < expected:
        raise ValueError(f"truncated payload: expected {expected} bytes, got {len(payload)}")
    if len(data) > pos + expected:
        raise ValueError(f"oversized payload: {len(data) - pos - expected} trailing bytes")
    return np.frombuffer(payload, dtype=">u2").reshape(height, width).astype(np.uint16)


# ---------------------------------------------------------------------------
# PNG


def write_png(raster: np.ndarray, path: str | Path) -> None:
    """Lossless PNG encoding of an RGB (H,W,3) or RGBA (H,W,4) uint8 raster."""
    arr = np.asarray(raster)
    if arr.ndim != 3 or arr.shape[2] not in (3, 4):
        raise ValueError(f"raster must have shape (H, W, 3) or (H, W, 4), got {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"raster dimensions must be positive, got {arr.shape}")
    if arr.dtype != np.uint8:
        raise ValueError(f"raster must be uint8, got {arr.dtype}")
    mode = "RGB" if arr.shape[2] == 3 else "RGBA"
    Image.fromarray(arr, mode).save(Path(path), format="PNG")


def read_png(path: str | Path) -> np.ndarray:
    with Image.open(Path(path)) as im:
        return np.asarray(im).copy()


# ---------------------------------------------------------------------------
# Run-length encoding


def encode_rle(mask: np.ndarray) -> list[tuple[int, int]]:
    """Encode a boolean raster as (start, length) runs over row-major order."""
    flat = np.asarray(mask, dtype=bool).ravel()
    padded = np.r_[False, flat, False]
    changes = np.flatnonzero(padded[1:] != padded[:-1])
    starts = changes[0::2]
    ends = changes[1::2]
    return [(int(s), int(e - s)) for s, e in zip(starts, ends)]


def decode_rle(runs, width: int, height: int) -> np.ndarray:
    """Decode (start, length) runs back into a height x width boolean raster."""
    if width <= 0 or height <= 0:
        raise ValueError(f"raster dimensions must be positive, got {width}x{height}")
    flat = np.zeros(width * height, dtype=bool)
    prev_end = -1
    for i, (start, length) in enumerate(runs):
        if length <= 0:
            raise ValueError(f"run {i}: non-positive length {length}")
        if start <= prev_end:
            raise ValueError(f"run {i}: start {start} overlaps or precedes previous run")
        end = start + length
        if end > flat.size:
            raise ValueError(f"run {i}: extends to {end}, beyond raster size {flat.size}")
        flat[start:end] = True
        prev_end = end - 1
    return flat.reshape(height, width)


# ---------------------------------------------------------------------------
# Metadata documents


@dataclass(frozen=True)
class InstanceRecord:
    instance_id: int
    asset_id: str
    size_class: int
    layer: int
    z: int
    bbox: tuple[int, int, int, int]  # x, y, width, height in canvas pixels
    amodal_area: int
    visible_area: int
    visibility: float
    augment: AugmentParams
    amodal_rle: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    stage: str
    seed: int
    width: int
    height: int
    mm_per_px: float
    background_id: str
    psd_histogram: tuple[int, ...]
    shortfall: tuple[int, ...]
    instances: list[InstanceRecord] = field(default_factory=list)


def instance_canvas_mask(inst: InstanceRecord, width: int, height: int) -> np.ndarray:
    """Materialize an instance's amodal mask in the full canvas frame."""
    x, y, w, h = inst.bbox
    local = decode_rle(inst.amodal_rle, w, h)
    canvas = np.zeros((height, width), dtype=bool)
    canvas[y : y + h, x : x + w] = local
    return canvas


def _validate_record(rec: ImageRecord) -> None:
    if rec.width <= 0 or rec.height <= 0:
        raise ValueError(f"width/height: canvas dimensions must be positive, got {rec.width}x{rec.height}")
    if rec.mm_per_px <= 0:
        raise ValueError(f"mm_per_px: must be positive, got {rec.mm_per_px}")
    for name, vec in (("psd_histogram", rec.psd_histogram), ("shortfall", rec.shortfall)):
        if len(vec) != 8 or any(v < 0 for v in vec):
            raise ValueError(f"{name}: must be 8 non-negative counts, got {vec}")
    realized = [0] * 8
    for i, inst in enumerate(rec.instances):
        where = f"instances[{i}]"
        if inst.instance_id != i + 1:
            raise ValueError(f"{where}.instance_id: ids must be dense 1..N in order, got {inst.instance_id}")
        if not 1 <= inst.size_class <= 8:
            raise ValueError(f"{where}.size_class: must be 1..8, got {inst.size_class}")
        if not 0 <= inst.layer <= 4:
            raise ValueError(f"{where}.layer: must be 0..4, got {inst.layer}")
        if i > 0 and inst.z <= rec.instances[i - 1].z:
            raise ValueError(f"{where}.z: paint order must be strictly increasing")
        x, y, w, h = inst.bbox
        if w < 1 or h < 1 or x < 0 or y < 0 or x + w > rec.width or y + h > rec.height:
            raise ValueError(f"{where}.bbox: {inst.bbox} outside {rec.width}x{rec.height} canvas")
        if inst.amodal_area < 1:
            raise ValueError(f"{where}.amodal_area: must be >= 1, got {inst.amodal_area}")
        if not 0 <= inst.visible_area <= inst.amodal_area:
            raise ValueError(f"{where}.visible_area: {inst.visible_area} not in [0, amodal_area]")
        if inst.visibility != inst.visible_area / inst.amodal_area:
            raise ValueError(
                f"{where}.visibility: {inst.visibility!r} != visible_area/amodal_area "
                f"({inst.visible_area}/{inst.amodal_area})"
            )
        run_total = sum(length for _, length in inst.amodal_rle)
        if run_total != inst.amodal_area:
            raise ValueError(f"{where}.amodal_rle: run lengths sum to {run_total}, expected {inst.amodal_area}")
        # Raises with run index on malformed runs; also bounds-checks against the bbox raster.
        try:
            decode_rle(inst.amodal_rle, w, h)
        except ValueError as exc:
            raise ValueError(f"{where}.amodal_rle: {exc}") from None
        realized[inst.size_class - 1] += 1
    if list(rec.psd_histogram) != realized:
        raise ValueError(f"psd_histogram: {list(rec.psd_histogram)} != per-class instance counts {realized}")


def _record_to_dict(rec: ImageRecord) -> dict:
    return {
        "image_id": rec.image_id,
        "stage": rec.stage,
        "seed": rec.seed,
        "width": rec.width,
        "height": rec.height,
        "mm_per_px": rec.mm_per_px,
        "background_id": rec.background_id,
        "psd_histogram": list(rec.psd_histogram),
        "shortfall": list(rec.shortfall),
        "instances": [
            {
                "instance_id": inst.instance_id,
                "asset_id": inst.asset_id,
                "size_class": inst.size_class,
                "layer": inst.layer,
                "z": inst.z,
                "bbox": list(inst.bbox),
                "amodal_area": inst.amodal_area,
                "visible_area": inst.visible_area,
                "visibility": inst.visibility,
                "augment": {
                    "flip_h": inst.augment.flip_h,
                    "flip_v": inst.augment.flip_v,
                    "rotation_deg": inst.augment.rotation_deg,
                    "hue_shift": inst.augment.hue_shift,
                    "sat_scale": inst.augment.sat_scale,
                    "val_scale": inst.augment.val_scale,
                },
                "amodal_rle": [list(run) for run in inst.amodal_rle],
            }
            for inst in rec.instances
        ],
    }


def _record_from_dict(doc: dict) -> ImageRecord:
    instances = [
        InstanceRecord(
            instance_id=d["instance_id"],
            asset_id=d["asset_id"],
            size_class=d["size_class"],
            layer=d["layer"],
            z=d["z"],
            bbox=tuple(d["bbox"]),
            amodal_area=d["amodal_area"],
            visible_area=d["visible_area"],
            visibility=d["visibility"],
            augment=AugmentParams(
                flip_h=d["augment"]["flip_h"],
                flip_v=d["augment"]["flip_v"],
                rotation_deg=d["augment"]["rotation_deg"],
                hue_shift=d["augment"]["hue_shift"],
                sat_scale=d["augment"]["sat_scale"],
                val_scale=d["augment"]["val_scale"],
            ),
            amodal_rle=tuple((run[0], run[1]) for run in d["amodal_rle"]),
        )
        for d in doc["instances"]
    ]
    return ImageRecord(
        image_id=doc["image_id"],
        stage=doc["stage"],
        seed=doc["seed"],
        width=doc["width"],
        height=doc["height"],
        mm_per_px=doc["mm_per_px"],
        background_id=doc["background_id"],
        psd_histogram=tuple(doc["psd_histogram"]),
        shortfall=tuple(doc["shortfall"]),
        instances=instances,
    )


def _metadata_validator():
    global _VALIDATOR
    try:
        return _VALIDATOR
    except NameError:
        pass
    import importlib.resources

    import jsonschema

    schema_text = (
        importlib.resources.files("aggsynth").joinpath("schemas/metadata.schema.json").read_text()
    )
    _VALIDATOR = jsonschema.Draft202012Validator(json.loads(schema_text))
    return _VALIDATOR


def write_metadata(record: ImageRecord, path: str | Path) -> None:
    """Write one per-image metadata document. Refuses inconsistent records."""
    _validate_record(record)
    doc = _record_to_dict(record)
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def read_metadata(path: str | Path) -> ImageRecord:
    """Read and validate a per-image metadata document."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON: {exc}") from None
    errors = sorted(_metadata_validator().iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ValueError(f"{path}: metadata schema violation at {where}: {err.message}")
    record = _record_from_dict(doc)
    try:
        _validate_record(record)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    return record
