"""Rendering: scene -> RGB image, id graymap, overlays, ground truth.

The composer stores only bbox-local masks and augmentation parameters;
this module re-derives each sprite deterministically from the catalog
and paints in z order, so a scene plus a catalog always reproduces the
same bytes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .augment import apply as apply_augment
from .catalog import AssetCatalog
from .compose import MAX_INSTANCES, Scene
from .formats import ImageRecord, InstanceRecord, encode_rle
from .maskops import erode


@dataclass(frozen=True)
class Background:
    """Canvas background: a texture tiled toroidally to any extent."""

    background_id: str
    texture: np.ndarray

    def __post_init__(self):
        t = self.texture
        if t.ndim != 3 or t.shape[2] != 3 or t.dtype != np.uint8:
            raise ValueError("texture must be (H, W, 3) uint8")
        if t.shape[0] < 1 or t.shape[1] < 1:
            raise ValueError("texture must be non-empty")

    @classmethod
    def flat(cls, color=(96, 96, 96), background_id="flat"):
        texture = np.array(color, dtype=np.uint8).reshape(1, 1, 3)
        return cls(background_id=background_id, texture=texture)

    @classmethod
    def speckle(cls, seed, tile=256, base=88, spread=28):
        """Gray speckle texture, seeded; tiles without visible seams."""
        if spread < 0 or base - spread < 0 or base + spread > 255:
            raise ValueError("speckle levels must stay within [0, 255]")
        rng = np.random.Generator(np.random.PCG64(seed))
        gray = rng.integers(base - spread, base + spread + 1,
                            size=(tile, tile), dtype=np.int64)
        # Wrap-around box blur keeps the tile toroidal.
        acc = np.zeros(gray.shape, dtype=np.float64)
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                acc += np.roll(np.roll(gray, dy, axis=0), dx, axis=1)
        gray = np.clip(np.rint(acc / 9.0), 0, 255).astype(np.uint8)
        return cls(background_id=f"speckle-{int(seed)}",
                   texture=np.repeat(gray[..., None], 3, axis=2))

    def render(self, width, height):
        """Tile the texture over a (height, width, 3) canvas."""
        if width < 1 or height < 1:
            raise ValueError("canvas extent must be positive")
        rows = np.arange(height) % self.texture.shape[0]
        cols = np.arange(width) % self.texture.shape[1]
        return self.texture[np.ix_(rows, cols)].copy()


def composite_rgb(scene: Scene, background: Background,
                  catalog: AssetCatalog, feather=False):
    """Paint the scene onto the background in z order.

    Sprites are re-derived from assets and stored augmentation
    parameters; later placements overwrite earlier ones with hard mask
    edges, so pixels outside every mask equal the background exactly.
    ``feather`` softens each instance's 1-px rim by blending it halfway
    into the canvas underneath (cosmetic; areas stay mask-exact).
    """
    if scene.width < 1 or scene.height < 1:
        raise ValueError("canvas extent must be positive")
    canvas = background.render(scene.width, scene.height)
    for inst in scene.instances:
        if inst.asset_id not in catalog:
            raise KeyError(f"missing asset {inst.asset_id!r}")
        asset = catalog.get(inst.asset_id)
        sprite, mask = apply_augment(asset, inst.augment)
        if mask.shape != inst.mask.shape:
            raise ValueError(
                f"instance {inst.instance_id}: augmented extent "
                f"{mask.shape} does not match placement {inst.mask.shape}"
            )
        h, w = mask.shape
        region = canvas[inst.y:inst.y + h, inst.x:inst.x + w]
        rgb = sprite[..., :3]
        if feather:
            rim = mask & ~erode(mask, 1)
            core = mask & ~rim
            region[core] = rgb[core]
            blend = (region[rim].astype(np.uint16) + rgb[rim]) // 2
            region[rim] = blend.astype(np.uint8)
        else:
            region[mask] = rgb[mask]
    return canvas


def rasterize_graymap(scene: Scene):
    """Visible instance-id canvas as uint16 (0 = background).

    Each pixel holds the id of the topmost instance covering it.
    """
    if len(scene.instances) > MAX_INSTANCES:
        raise ValueError(
            f"{len(scene.instances)} instances exceed the graymap id "
            f"capacity of {MAX_INSTANCES}"
        )
    return scene.id_canvas()


def _id_color(instance_id):
    """Deterministic bright color for an instance id."""
    x = (int(instance_id) * 0x9E3779B97F4A7C15 + 0x632BE59BD9B4E019) & 0xFFFFFFFFFFFFFFFF
    x ^= x >> 29
    x = (x * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    r = 64 + ((x >> 16) & 0xFF) * 3 // 4
    g = 64 + ((x >> 32) & 0xFF) * 3 // 4
    b = 64 + ((x >> 48) & 0xFF) * 3 // 4
    return np.array([r, g, b], dtype=np.uint8)


def overlay(rgb, graymap, alpha=0.5):
    """Tint each visible instance with a stable per-id color.

    The color of id k is a pure function of k, so the same particle id
    renders the same hue in every image.  Background pixels pass
    through untouched; an all-zero graymap returns the input bytes.
    """
    rgb = np.asarray(rgb)
    graymap = np.asarray(graymap)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("image must be (H, W, 3)")
    if rgb.shape[:2] != graymap.shape:
        raise ValueError(
            f"dimension mismatch: image {rgb.shape[:2]}, graymap {graymap.shape}"
        )
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must be in [0, 1], got {alpha!r}")
    out = rgb.copy()
    for inst_id in np.unique(graymap):
        if inst_id == 0:
            continue
        sel = graymap == inst_id
        color = _id_color(int(inst_id)).astype(np.float64)
        mixed = (1.0 - alpha) * out[sel].astype(np.float64) + alpha * color
        out[sel] = np.clip(np.rint(mixed), 0, 255).astype(np.uint8)
    return out


def build_record(scene: Scene, image_id) -> ImageRecord:
    """Assemble the ground-truth record for a composed scene.

    Visible areas come from the composer's incremental accounting;
    amodal areas and run-length encodings come from the stored
    bbox-local masks.  The histogram reports realized (placed)
    per-class counts.
    """
    instances = []
    for inst in scene.instances:
        amodal = inst.amodal_area
        instances.append(InstanceRecord(
            instance_id=inst.instance_id,
            asset_id=inst.asset_id,
            size_class=inst.size_class,
            layer=inst.layer,
            z=inst.z,
            bbox=inst.bbox,
            amodal_area=amodal,
            visible_area=inst.visible_area,
            visibility=inst.visible_area / amodal,
            augment=inst.augment,
            amodal_rle=tuple(encode_rle(inst.mask)),
        ))
    return ImageRecord(
        image_id=image_id,
        stage=scene.spec.stage,
        seed=scene.seed,
        width=scene.width,
        height=scene.height,
        mm_per_px=scene.spec.mm_per_px,
        background_id=scene.background_id,
        psd_histogram=tuple(int(c) for c in scene.psd_histogram),
        shortfall=tuple(int(c) for c in scene.shortfall),
        instances=instances,
    )
