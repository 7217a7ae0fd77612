"""Per-instance augmentation: flips, rotation, HSV colorization. Never scaling.

The transform is rigid plus photometric, so particle size and shape stay
authentic. Masks are resampled nearest-neighbor to stay binary; sprites are
resampled bilinearly and re-masked afterwards so no off-mask halo survives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

__all__ = [
    "AugmentConfig",
    "AugmentParams",
    "IDENTITY_PARAMS",
    "apply",
    "sample_params",
    "transform_mask",
]


@dataclass(frozen=True)
class AugmentParams:
    flip_h: bool = False
    flip_v: bool = False
    rotation_deg: float = 0.0
    hue_shift: float = 0.0
    sat_scale: float = 1.0
    val_scale: float = 1.0

    @property
    def is_geometric_identity(self) -> bool:
        return not self.flip_h and not self.flip_v and self.rotation_deg == 0.0

    @property
    def is_photometric_identity(self) -> bool:
        return self.hue_shift == 0.0 and self.sat_scale == 1.0 and self.val_scale == 1.0


IDENTITY_PARAMS = AugmentParams()


@dataclass(frozen=True)
class AugmentConfig:
    enable_flip_h: bool = True
    enable_flip_v: bool = True
    enable_rotation: bool = True
    rotation_mode: str = "any"  # "any" | "quarter"
    enable_color: bool = True
    hue_range_deg: float = 10.0
    sat_range: float = 0.15
    val_range: float = 0.15

    def __post_init__(self) -> None:
        if self.rotation_mode not in ("any", "quarter"):
            raise ValueError(f"rotation_mode must be 'any' or 'quarter', got {self.rotation_mode!r}")
        if not 0.0 <= self.hue_range_deg <= 180.0:
            raise ValueError(f"hue_range_deg must be in [0, 180], got {self.hue_range_deg}")
        if not 0.0 <= self.sat_range < 1.0:
            raise ValueError(f"sat_range must be in [0, 1), got {self.sat_range}")
        if not 0.0 <= self.val_range < 1.0:
            raise ValueError(f"val_range must be in [0, 1), got {self.val_range}")


def sample_params(rng: np.random.Generator, cfg: AugmentConfig) -> AugmentParams:
    """Draw augmentation parameters uniformly from the configured ranges.

    Disabled transforms take their neutral value without consuming randomness,
    so identical seeds always yield identical params for a fixed config.
    """
    flip_h = bool(rng.integers(2)) if cfg.enable_flip_h else False
    flip_v = bool(rng.integers(2)) if cfg.enable_flip_v else False
    rotation = 0.0
    if cfg.enable_rotation:
        if cfg.rotation_mode == "quarter":
            rotation = float(rng.integers(4) * 90)
        else:
            rotation = float(rng.random() * 360.0)
    hue, sat, val = 0.0, 1.0, 1.0
    if cfg.enable_color:
        hue = float(rng.uniform(-cfg.hue_range_deg, cfg.hue_range_deg))
        sat = float(rng.uniform(1.0 - cfg.sat_range, 1.0 + cfg.sat_range))
        val = float(rng.uniform(1.0 - cfg.val_range, 1.0 + cfg.val_range))
    return AugmentParams(flip_h, flip_v, rotation, hue, sat, val)


def _quarter_turns(rotation_deg: float) -> int | None:
    if rotation_deg % 90.0 == 0.0:
        return int(rotation_deg // 90.0) % 4
    return None


def transform_mask(mask: np.ndarray, p: AugmentParams) -> np.ndarray:
    """Geometric part of the augmentation applied to a mask alone.

    Identical to the mask half of apply(): flips, then rotation with the
    canvas expanded to hold the rotated bounding box. Nearest-neighbor
    resampling keeps the mask binary; 90-degree multiples are exact.
    """
    m = np.asarray(mask, dtype=bool)
    if p.flip_h:
        m = np.fliplr(m)
    if p.flip_v:
        m = np.flipud(m)
    if p.rotation_deg != 0.0:
        k = _quarter_turns(p.rotation_deg)
        if k is not None:
            m = np.rot90(m, k)
        else:
            m = (
                ndimage.rotate(
                    m.astype(np.uint8), p.rotation_deg, reshape=True, order=0, prefilter=False
                )
                > 0
            )
    return np.ascontiguousarray(m)


def _rotate_rgb(rgb: np.ndarray, deg: float) -> np.ndarray:
    out = ndimage.rotate(rgb.astype(np.float64), deg, axes=(1, 0), reshape=True, order=1, prefilter=False)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def _rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = rgb.max(axis=-1)
    minc = rgb.min(axis=-1)
    delta = maxc - minc
    safe_delta = np.where(delta > 0, delta, 1.0)
    h = np.zeros_like(maxc)
    nz = delta > 0
    h = np.where(nz & (maxc == r), ((g - b) / safe_delta) % 6.0, h)
    h = np.where(nz & (maxc == g) & (maxc != r), (b - r) / safe_delta + 2.0, h)
    h = np.where(nz & (maxc == b) & (maxc != r) & (maxc != g), (r - g) / safe_delta + 4.0, h)
    h = h / 6.0
    s = np.where(maxc > 0, delta / np.where(maxc > 0, maxc, 1.0), 0.0)
    return np.stack([h, s, maxc], axis=-1)


def _hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    i = np.floor(h * 6.0).astype(int) % 6
    f = h * 6.0 - np.floor(h * 6.0)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=-1)


def _colorize(rgb: np.ndarray, mask: np.ndarray, p: AugmentParams) -> np.ndarray:
    out = rgb.copy()
    pix = rgb[mask].astype(np.float64) / 255.0
    hsv = _rgb_to_hsv(pix)
    hsv[..., 0] = (hsv[..., 0] + p.hue_shift / 360.0) % 1.0
    hsv[..., 1] = np.clip(hsv[..., 1] * p.sat_scale, 0.0, 1.0)
    hsv[..., 2] = np.clip(hsv[..., 2] * p.val_scale, 0.0, 1.0)
    out[mask] = np.clip(np.rint(_hsv_to_rgb(hsv) * 255.0), 0, 255).astype(np.uint8)
    return out


def apply(asset, p: AugmentParams) -> tuple[np.ndarray, np.ndarray]:
    """Augment a particle asset, returning an (RGBA sprite, mask) pair.

    The mask output equals transform_mask(asset.mask, p) exactly; the sprite
    is geometrically transformed the same way, re-masked, then colorized.
    Identity params return byte-identical copies of the input.
    """
    rgb = np.asarray(asset.sprite)[..., :3]
    mask = np.asarray(asset.mask, dtype=bool)
    if rgb.shape[:2] != mask.shape:
        raise ValueError(f"sprite/mask dimension mismatch: {rgb.shape[:2]} vs {mask.shape}")

    if p.is_geometric_identity:
        out_mask = mask.copy()
        out_rgb = rgb.copy()
    else:
        out_mask = transform_mask(mask, p)
        r = rgb
        if p.flip_h:
            r = r[:, ::-1]
        if p.flip_v:
            r = r[::-1, :]
        if p.rotation_deg != 0.0:
            k = _quarter_turns(p.rotation_deg)
            if k is not None:
                r = np.rot90(r, k, axes=(0, 1))
            else:
                r = _rotate_rgb(r, p.rotation_deg)
        out_rgb = np.ascontiguousarray(r)
        out_rgb[~out_mask] = 0

    if not p.is_photometric_identity:
        out_rgb = _colorize(out_rgb, out_mask, p)

    alpha = out_mask.astype(np.uint8) * 255
    sprite = np.dstack([out_rgb, alpha])
    return sprite, out_mask
