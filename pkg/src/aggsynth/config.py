"""Generation configs: JSON documents with preset inheritance.

A config describes dataset content only (seed, canvas, stage, PSD,
augmentation, background); execution details like worker count stay on
the command line so the same config always hashes the same.  A document
may name a ``preset`` to inherit from; its own fields then deep-merge
over the preset before validation.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources

import jsonschema

from .augment import AugmentConfig
from .compose import PsdSpec, StageSpec
from .sieve import NUM_CLASSES

PRESET_NAMES = ("L1", "L2-l", "L2-h", "L3-0", "L3-m", "L3-h")

_SCHEMA = None


def _config_validator():
    global _SCHEMA
    if _SCHEMA is None:
        text = (resources.files("aggsynth") / "schemas" / "config.schema.json").read_text()
        _SCHEMA = jsonschema.Draft202012Validator(json.loads(text))
    return _SCHEMA


def deep_merge(base, override):
    """Recursive dict merge; non-dict values (lists included) replace."""
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def load_preset(name):
    """Load a named packaged preset as a plain dict."""
    if name not in PRESET_NAMES:
        raise ValueError(
            f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}"
        )
    text = (resources.files("aggsynth") / "presets" / f"{name}.json").read_text()
    return json.loads(text)


def resolve_config(doc):
    """Expand preset inheritance and validate the merged document.

    Returns the merged plain dict.  Raises ValueError with a field path
    on schema violations.
    """
    if not isinstance(doc, dict):
        raise ValueError("config must be a JSON object")
    doc = dict(doc)
    preset = doc.pop("preset", None)
    merged = deep_merge(load_preset(preset), doc) if preset else doc
    errors = sorted(_config_validator().iter_errors(merged),
                    key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = "/".join(str(p) for p in err.absolute_path) or "(root)"
        raise ValueError(f"invalid config at {path}: {err.message}")
    return merged


def load_config(path):
    """Read, expand and validate a config file into a GenerationConfig."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"config {path} is not valid JSON: {exc}") from exc
    return GenerationConfig.from_dict(resolve_config(doc))


def config_hash(doc):
    """Stable content hash of a merged config document."""
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class GenerationConfig:
    """Validated dataset description.

    ``classes`` lists the sieve classes the dataset covers.  L1/L2
    images are single-class: image i uses classes[i mod len(classes)].
    L3 images use the whole list.  ``total_range`` bounds the per-image
    instance total, drawn uniformly (inclusive); an explicit PSD fixes
    counts instead.  ``halve_counts`` applies per-class ceil(count/2)
    after the draw, producing the low-occlusion companion of the same
    config without the flag.
    """

    master_seed: int
    image_count: int
    width: int
    height: int
    mm_per_px: float
    stage: str
    classes: tuple
    visibility_floor: float
    max_place_attempts: int
    l1_saturation_patience: int
    psd_kind: str
    total_range: tuple
    mean_class: float
    std_class: float
    counts: tuple
    halve_counts: bool
    augment: AugmentConfig
    background_kind: str
    background_color: tuple
    source: dict = None

    @classmethod
    def from_dict(cls, doc):
        stage = doc["stage"]
        psd = doc["psd"]
        aug = doc["augment"]
        bg = doc["background"]
        cfg = cls(
            master_seed=int(doc["master_seed"]),
            image_count=int(doc["image_count"]),
            width=int(doc["width"]),
            height=int(doc["height"]),
            mm_per_px=float(doc["mm_per_px"]),
            stage=stage["stage"],
            classes=tuple(int(k) for k in stage["classes"]),
            visibility_floor=float(stage["visibility_floor"]),
            max_place_attempts=int(stage["max_place_attempts"]),
            l1_saturation_patience=int(stage["l1_saturation_patience"]),
            psd_kind=psd["kind"],
            total_range=tuple(int(v) for v in psd["total_range"]),
            mean_class=float(psd["mean_class"]),
            std_class=float(psd["std_class"]),
            counts=tuple(int(c) for c in psd["counts"]) if psd.get("counts") else (),
            halve_counts=bool(doc["halve_counts"]),
            augment=AugmentConfig(
                enable_flip_h=bool(aug["enable_flip_h"]),
                enable_flip_v=bool(aug["enable_flip_v"]),
                enable_rotation=bool(aug["enable_rotation"]),
                rotation_mode=aug["rotation_mode"],
                enable_color=bool(aug["enable_color"]),
                hue_range_deg=float(aug["hue_range_deg"]),
                sat_range=float(aug["sat_range"]),
                val_range=float(aug["val_range"]),
            ),
            background_kind=bg["kind"],
            background_color=tuple(int(v) for v in bg["color"]),
            source=doc,
        )
        cfg.validate()
        return cfg

    def validate(self):
        lo, hi = self.total_range
        if lo < 0 or hi < lo:
            raise ValueError(f"invalid total_range [{lo}, {hi}]")
        if len(set(self.classes)) != len(self.classes):
            raise ValueError("duplicate class in classes")
        for k in self.classes:
            if not 1 <= k <= NUM_CLASSES:
                raise ValueError(f"class index out of range: {k}")
        # Probe-construct the per-image specs so their own validation
        # runs once, up front.
        self.stage_for_image(0)
        if self.psd_kind == "explicit":
            PsdSpec(kind="explicit", counts=self.counts)
        else:
            total = max(lo, 1)
            PsdSpec(kind=self.psd_kind, total_count=total,
                    mean_class=self.mean_class, std_class=self.std_class)

    def stage_for_image(self, image_index) -> StageSpec:
        """Per-image stage spec; L1/L2 cycle through the class list."""
        if self.stage in ("L1", "L2"):
            classes = (self.classes[image_index % len(self.classes)],)
        else:
            classes = self.classes
        return StageSpec(
            stage=self.stage,
            classes=classes,
            width=self.width,
            height=self.height,
            mm_per_px=self.mm_per_px,
            visibility_floor=self.visibility_floor,
            max_place_attempts=self.max_place_attempts,
            l1_saturation_patience=self.l1_saturation_patience,
        )

    def psd_spec(self, total) -> PsdSpec:
        """PSD spec for one image's drawn total."""
        if self.psd_kind == "explicit":
            return PsdSpec(kind="explicit", counts=self.counts)
        return PsdSpec(kind=self.psd_kind, total_count=int(total),
                       mean_class=self.mean_class, std_class=self.std_class)

    def content_dict(self):
        """The merged document this config was built from."""
        return self.source

    def hash(self):
        return config_hash(self.source)
