"""Scene composition: placing particles onto a canvas in three stages.

Stage L1 scatters particles of a single class with no overlap at all.
Stage L2 places a single class sequentially and lets later particles
occlude earlier ones as long as every particle keeps at least a fixed
fraction of its area visible.  Stage L3 mixes classes: each sieve class
belongs to a depth layer, layers are composed bottom-up with the L2
rule inside each layer, and higher layers may bury lower ones
completely.

Placement works on an integer id canvas; the scene keeps only
bbox-local masks plus anchor positions, which bounds memory at
4096 x 4096 with thousands of instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .augment import AugmentConfig, AugmentParams, sample_params, transform_mask
from .catalog import AssetCatalog
from .sieve import NUM_CLASSES, SIZE_CLASSES

# Instance ids must fit one 16-bit graymap sample.
MAX_INSTANCES = 65535

# Consecutive failed no-overlap attempts before an L1 canvas is
# declared saturated.
L1_SATURATION_PATIENCE = 200

# Fraction of its area every particle must keep visible against
# occluders in its own or a lower layer.
VISIBILITY_FLOOR = 0.60

# Anchor attempts per particle before it is skipped and counted as
# shortfall.
MAX_PLACE_ATTEMPTS = 50


def derive_instance_seed(master_seed, image_index, instance_index):
    """Derive a stable 64-bit seed from (master, image, instance).

    Pure integer mixing (splitmix64 finalizer folded over the words),
    identical across platforms and process boundaries, so parallel
    generation schedules cannot change any drawn value.
    """
    x = int(master_seed) & 0xFFFFFFFFFFFFFFFF
    for word in (int(image_index), int(instance_index)):
        x = (x + 0x9E3779B97F4A7C15 + (word & 0xFFFFFFFFFFFFFFFF)) & 0xFFFFFFFFFFFFFFFF
        x ^= x >> 30
        x = (x * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
        x ^= x >> 27
        x = (x * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
        x ^= x >> 31
    return x


@dataclass(frozen=True)
class PsdSpec:
    """Particle size distribution over the eight sieve classes.

    kind
        ``"uniform"``    equal probability on the classes in play.
        ``"gaussian"``   probabilities follow a normal density read at
                         class indices 1..8 (``mean_class``,
                         ``std_class``), renormalized.
        ``"random"``     probabilities drawn from a flat Dirichlet,
                         fresh per image.
        ``"explicit"``   fixed per-class ``counts``; ``total_count`` is
                         ignored.
    total_count
        Instances per image for the sampling kinds.
    """

    kind: str = "uniform"
    total_count: int = 0
    mean_class: float = 4.5
    std_class: float = 1.5
    counts: tuple = ()

    def __post_init__(self):
        if self.kind not in ("uniform", "gaussian", "random", "explicit"):
            raise ValueError(f"unknown psd kind {self.kind!r}")
        if self.kind == "explicit":
            if len(self.counts) != NUM_CLASSES:
                raise ValueError(
                    f"explicit psd needs {NUM_CLASSES} counts, got {len(self.counts)}"
                )
            if any(int(c) < 0 for c in self.counts):
                raise ValueError("explicit psd counts must be non-negative")
            if sum(int(c) for c in self.counts) <= 0:
                raise ValueError("explicit psd counts must have positive sum")
        else:
            if self.total_count <= 0:
                raise ValueError("total_count must be positive")
            if self.kind == "gaussian" and self.std_class <= 0:
                raise ValueError("std_class must be positive")


def class_weights(spec: PsdSpec, rng, allowed=None):
    """Per-class sampling probabilities of length 8.

    ``allowed`` restricts support to a set of 1-based class indices;
    None allows all eight.  Probabilities sum to 1.
    """
    if allowed is None:
        allowed = range(1, NUM_CLASSES + 1)
    allow = np.zeros(NUM_CLASSES, dtype=bool)
    for k in allowed:
        if not 1 <= int(k) <= NUM_CLASSES:
            raise ValueError(f"class index out of range: {k!r}")
        allow[int(k) - 1] = True
    if not allow.any():
        raise ValueError("allowed class set is empty")

    if spec.kind == "uniform":
        w = allow.astype(np.float64)
    elif spec.kind == "gaussian":
        idx = np.arange(1, NUM_CLASSES + 1, dtype=np.float64)
        w = np.exp(-0.5 * ((idx - spec.mean_class) / spec.std_class) ** 2)
        w = np.where(allow, w, 0.0)
    elif spec.kind == "random":
        w = np.zeros(NUM_CLASSES)
        w[allow] = rng.dirichlet(np.ones(int(allow.sum())))
    else:  # explicit
        w = np.array([float(c) for c in spec.counts])
        w = np.where(allow, w, 0.0)
    total = w.sum()
    if total <= 0:
        raise ValueError(f"psd {spec.kind!r} places no weight on allowed classes")
    return w / total


def sample_psd(spec: PsdSpec, rng, allowed=None):
    """Draw per-class instance counts for one image.

    Explicit specs return their counts verbatim (zeroed outside
    ``allowed`` when a restriction is given); the sampling kinds draw a
    multinomial of ``spec.total_count`` over the class probabilities.
    Returns an int array of length 8.
    """
    if spec.kind == "explicit":
        counts = np.array([int(c) for c in spec.counts], dtype=np.int64)
        if allowed is not None:
            allow = np.zeros(NUM_CLASSES, dtype=bool)
            for k in allowed:
                if not 1 <= int(k) <= NUM_CLASSES:
                    raise ValueError(f"class index out of range: {k!r}")
                allow[int(k) - 1] = True
            counts = np.where(allow, counts, 0)
        return counts
    w = class_weights(spec, rng, allowed)
    return rng.multinomial(int(spec.total_count), w).astype(np.int64)


def pair_occlusion_variant(counts):
    """Halved companion counts for low/heavy occlusion pairs.

    Per-class ceiling division by two, which preserves the PSD shape
    while thinning density; classes of one instance stay at one.
    """
    counts = np.asarray(counts, dtype=np.int64)
    if counts.shape != (NUM_CLASSES,):
        raise ValueError(f"expected {NUM_CLASSES} per-class counts")
    if (counts < 0).any():
        raise ValueError("counts must be non-negative")
    return -(-counts // 2)


@dataclass(frozen=True)
class StageSpec:
    """Composition parameters for one image.

    stage
        ``"L1"``, ``"L2"`` or ``"L3"``.
    classes
        Sieve classes in play.  L1 and L2 require exactly one; L3 may
        span several.
    width, height
        Canvas extent in pixels.
    mm_per_px
        Physical resolution; must match the catalog.
    """

    stage: str
    classes: tuple
    width: int
    height: int
    mm_per_px: float
    visibility_floor: float = VISIBILITY_FLOOR
    max_place_attempts: int = MAX_PLACE_ATTEMPTS
    l1_saturation_patience: int = L1_SATURATION_PATIENCE

    def __post_init__(self):
        classes = tuple(int(k) for k in self.classes)
        object.__setattr__(self, "classes", classes)
        if self.stage not in ("L1", "L2", "L3"):
            raise ValueError(f"unknown stage {self.stage!r}")
        if not classes:
            raise ValueError("classes must not be empty")
        if len(set(classes)) != len(classes):
            raise ValueError("duplicate class in classes")
        for k in classes:
            if not 1 <= k <= NUM_CLASSES:
                raise ValueError(f"class index out of range: {k}")
        if self.stage in ("L1", "L2") and len(classes) != 1:
            raise ValueError(f"{self.stage} requires exactly one class")
        if self.width < 1 or self.height < 1:
            raise ValueError("canvas extent must be positive")
        if self.mm_per_px <= 0:
            raise ValueError("mm_per_px must be positive")
        if not 0 < self.visibility_floor <= 1:
            raise ValueError("visibility_floor must be in (0, 1]")
        if self.max_place_attempts < 1:
            raise ValueError("max_place_attempts must be positive")
        if self.l1_saturation_patience < 1:
            raise ValueError("l1_saturation_patience must be positive")


@dataclass(frozen=True)
class PlacedInstance:
    """One particle fixed on the canvas.

    ``mask`` is the augmented amodal support, bbox-local; ``x``/``y``
    anchor its top-left corner on the canvas.  ``z`` equals the 1-based
    placement order and doubles as the graymap id.  ``visible_area`` is
    the final un-occluded pixel count, filled in when the scene
    completes.
    """

    instance_id: int
    asset_id: str
    size_class: int
    layer: int
    z: int
    x: int
    y: int
    mask: np.ndarray
    augment: AugmentParams
    visible_area: int = -1

    @property
    def amodal_area(self) -> int:
        return int(np.count_nonzero(self.mask))

    @property
    def visibility(self) -> float:
        if self.visible_area < 0:
            raise ValueError("visible_area not resolved yet")
        return self.visible_area / self.amodal_area

    @property
    def bbox(self):
        return (self.x, self.y, self.mask.shape[1], self.mask.shape[0])


@dataclass
class Scene:
    """Composition result: placements plus bookkeeping.

    ``requested`` holds the per-class counts handed to the composer,
    ``shortfall`` the slots that could not be anchored within the
    attempt budget; placed counts equal requested minus shortfall.
    Pixel data is resolved at render time from the catalog, so a scene
    stays light.
    """

    spec: StageSpec
    seed: int = 0
    background_id: str = ""
    instances: list = field(default_factory=list)
    requested: np.ndarray = field(default_factory=lambda: np.zeros(NUM_CLASSES, np.int64))
    shortfall: np.ndarray = field(default_factory=lambda: np.zeros(NUM_CLASSES, np.int64))

    @property
    def width(self):
        return self.spec.width

    @property
    def height(self):
        return self.spec.height

    @property
    def psd_histogram(self):
        """Realized per-class instance counts."""
        counts = np.zeros(NUM_CLASSES, dtype=np.int64)
        for inst in self.instances:
            counts[inst.size_class - 1] += 1
        return counts

    def id_canvas(self):
        """Repaint the visible-id canvas (uint16, 0 = background)."""
        canvas = np.zeros((self.spec.height, self.spec.width), dtype=np.uint16)
        for inst in self.instances:
            h, w = inst.mask.shape
            canvas[inst.y:inst.y + h, inst.x:inst.x + w][inst.mask] = inst.instance_id
        return canvas

    def repaint_visible_areas(self):
        """Visible pixel count per instance id from a fresh repaint."""
        canvas = self.id_canvas()
        counts = np.bincount(canvas.ravel(), minlength=len(self.instances) + 1)
        return {inst.instance_id: int(counts[inst.instance_id])
                for inst in self.instances}


def _class_layer(class_index):
    return SIZE_CLASSES[class_index - 1].layer


def _check_inputs(catalog: AssetCatalog, counts, stage: StageSpec):
    counts = np.asarray(counts, dtype=np.int64)
    if counts.shape != (NUM_CLASSES,):
        raise ValueError(f"expected {NUM_CLASSES} per-class counts")
    if (counts < 0).any():
        raise ValueError("counts must be non-negative")
    if counts.sum() > MAX_INSTANCES:
        raise ValueError(
            f"requested {int(counts.sum())} instances exceed the "
            f"graymap id capacity of {MAX_INSTANCES}"
        )
    if catalog.mm_per_px != stage.mm_per_px:
        raise ValueError(
            f"catalog resolution mismatch: catalog {catalog.mm_per_px} mm/px, "
            f"stage {stage.mm_per_px} mm/px"
        )
    for k in range(1, NUM_CLASSES + 1):
        if counts[k - 1] > 0 and k not in stage.classes:
            raise ValueError(f"counts request class {k} outside stage classes")
    for k in stage.classes:
        if counts[k - 1] > 0 and not catalog.by_class(k):
            raise ValueError(f"empty asset pool for class {k}")
    return counts


def _pick_asset(catalog: AssetCatalog, class_index, rng):
    pool = catalog.by_class(class_index)
    return pool[int(rng.integers(len(pool)))]


def _augmented_mask(asset, cfg: AugmentConfig, rng):
    params = sample_params(rng, cfg)
    mask = transform_mask(asset.mask, params)
    if not mask.any():
        # Rotation of a thin sliver can rasterize to nothing; fall back
        # to the unrotated support so the slot never goes empty.
        params = replace(params, rotation_deg=0.0)
        mask = transform_mask(asset.mask, params)
    return params, mask


def _anchor_range(stage: StageSpec, mask):
    """Number of valid (x, y) anchors keeping the mask fully inside."""
    mh, mw = mask.shape
    if mw > stage.width or mh > stage.height:
        return None
    return stage.width - mw + 1, stage.height - mh + 1


class _Placer:
    """Incremental id canvas with per-instance visibility tracking."""

    def __init__(self, width, height):
        self.canvas = np.zeros((height, width), dtype=np.int32)
        self.visible = {}    # instance_id -> current visible px
        self.amodal = {}     # instance_id -> amodal px
        self.floor_px = {}   # instance_id -> minimum visible px (0 = unprotected)

    def release_floors(self):
        """Drop protection for everything placed so far."""
        for key in self.floor_px:
            self.floor_px[key] = 0

    def overlaps(self, mask, x, y):
        h, w = mask.shape
        region = self.canvas[y:y + h, x:x + w]
        return bool((region[mask] > 0).any())

    def try_place(self, inst_id, mask, x, y, floor):
        """Stamp ``mask`` at (x, y) unless a protected instance would
        drop below its visibility floor.  Returns True on success."""
        h, w = mask.shape
        region = self.canvas[y:y + h, x:x + w]
        covered = region[mask]
        hit_ids, hit_counts = np.unique(covered[covered > 0], return_counts=True)
        for other, lost in zip(hit_ids, hit_counts):
            other = int(other)
            if self.visible[other] - int(lost) < self.floor_px[other]:
                return False
        for other, lost in zip(hit_ids, hit_counts):
            self.visible[int(other)] -= int(lost)
        region[mask] = inst_id
        area = int(np.count_nonzero(mask))
        self.visible[inst_id] = area
        self.amodal[inst_id] = area
        # ceil(floor * area): the smallest pixel count whose ratio
        # still reaches the floor.
        self.floor_px[inst_id] = -int(-floor * area // 1)
        return True


def _finalize(scene: Scene, placer: _Placer) -> Scene:
    scene.instances = [
        replace(inst, visible_area=placer.visible[inst.instance_id])
        for inst in scene.instances
    ]
    return scene


def compose_l1(catalog, counts, stage: StageSpec, rng, seed=0, cfg=None) -> Scene:
    """Scatter one class with zero overlap (dart throwing).

    Each attempt draws an asset, an augmentation and an anchor fresh;
    any intersection with a placed particle rejects the attempt.  The
    scene stops when the count budget is exhausted or after
    ``l1_saturation_patience`` consecutive rejections, whichever comes
    first.  All visibilities end at exactly 1.0.
    """
    counts = _check_inputs(catalog, counts, stage)
    cfg = _coerce_cfg(cfg)
    class_index = stage.classes[0]
    budget = int(counts[class_index - 1])
    scene = Scene(spec=stage, seed=int(seed), requested=counts.copy())
    placer = _Placer(stage.width, stage.height)
    misses = 0
    while len(scene.instances) < budget and misses < stage.l1_saturation_patience:
        asset = _pick_asset(catalog, class_index, rng)
        params, mask = _augmented_mask(asset, cfg, rng)
        anchors = _anchor_range(stage, mask)
        if anchors is None:
            misses += 1
            continue
        x = int(rng.integers(anchors[0]))
        y = int(rng.integers(anchors[1]))
        if placer.overlaps(mask, x, y):
            misses += 1
            continue
        inst_id = len(scene.instances) + 1
        placer.try_place(inst_id, mask, x, y, floor=1.0)
        scene.instances.append(PlacedInstance(
            instance_id=inst_id, asset_id=asset.asset_id,
            size_class=class_index, layer=_class_layer(class_index),
            z=inst_id, x=x, y=y, mask=mask, augment=params,
        ))
        misses = 0
    placed = len(scene.instances)
    scene.shortfall[class_index - 1] = budget - placed
    return _finalize(scene, placer)


def compose_l2(catalog, counts, stage: StageSpec, rng, seed=0, cfg=None) -> Scene:
    """Place one class sequentially under the visibility floor.

    Each slot binds an asset and an augmentation, then tries up to
    ``max_place_attempts`` anchors; an anchor is accepted only if every
    previously placed particle keeps at least ``visibility_floor`` of
    its area visible afterwards.  Exhausted slots are recorded as
    shortfall.
    """
    counts = _check_inputs(catalog, counts, stage)
    cfg = _coerce_cfg(cfg)
    scene = Scene(spec=stage, seed=int(seed), requested=counts.copy())
    placer = _Placer(stage.width, stage.height)
    class_index = stage.classes[0]
    slots = [class_index] * int(counts[class_index - 1])
    _fill_slots(scene, placer, slots, catalog, cfg, rng)
    return _finalize(scene, placer)


def compose_l3(catalog, counts, stage: StageSpec, rng, seed=0, cfg=None) -> Scene:
    """Mixed-class multi-layer composition, bottom layer first.

    Classes bucket into depth layers by size; each layer fills under
    the L2 visibility rule against its own instances, while everything
    in lower layers loses protection and may end fully buried.  Overall
    visibility therefore spans [0, 1] even though within-layer
    visibility never drops below the floor.
    """
    counts = _check_inputs(catalog, counts, stage)
    cfg = _coerce_cfg(cfg)
    scene = Scene(spec=stage, seed=int(seed), requested=counts.copy())
    placer = _Placer(stage.width, stage.height)
    for layer in range(5):
        layer_classes = [k for k in range(1, NUM_CLASSES + 1)
                         if counts[k - 1] > 0 and _class_layer(k) == layer]
        if not layer_classes:
            continue
        slots = np.repeat(layer_classes,
                          [counts[k - 1] for k in layer_classes])
        rng.shuffle(slots)
        placer.release_floors()
        _fill_slots(scene, placer, [int(s) for s in slots], catalog, cfg, rng)
    return _finalize(scene, placer)


def _fill_slots(scene, placer, slots, catalog, cfg, rng):
    stage = scene.spec
    for class_index in slots:
        asset = _pick_asset(catalog, class_index, rng)
        params, mask = _augmented_mask(asset, cfg, rng)
        anchors = _anchor_range(stage, mask)
        if anchors is None:
            scene.shortfall[class_index - 1] += 1
            continue
        placed = False
        inst_id = len(scene.instances) + 1
        for _ in range(stage.max_place_attempts):
            x = int(rng.integers(anchors[0]))
            y = int(rng.integers(anchors[1]))
            if placer.try_place(inst_id, mask, x, y,
                                floor=stage.visibility_floor):
                scene.instances.append(PlacedInstance(
                    instance_id=inst_id, asset_id=asset.asset_id,
                    size_class=class_index, layer=_class_layer(class_index),
                    z=inst_id, x=x, y=y, mask=mask, augment=params,
                ))
                placed = True
                break
        if not placed:
            scene.shortfall[class_index - 1] += 1


def compose(catalog, counts, stage: StageSpec, rng, seed=0, cfg=None) -> Scene:
    """Dispatch to the stage-specific composer."""
    if stage.stage == "L1":
        return compose_l1(catalog, counts, stage, rng, seed, cfg)
    if stage.stage == "L2":
        return compose_l2(catalog, counts, stage, rng, seed, cfg)
    return compose_l3(catalog, counts, stage, rng, seed, cfg)


def _coerce_cfg(cfg):
    return cfg if cfg is not None else AugmentConfig()
