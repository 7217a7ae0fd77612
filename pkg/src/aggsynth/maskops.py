"""Binary-mask primitives: connectivity, morphology, convex hulls and diameters.

Masks are 2D boolean numpy arrays of shape (height, width). All distances are
measured between pixel centers, so a single-pixel mask has diameter 0 and a
horizontal run of n pixels has diameter n - 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

__all__ = [
    "RefineParams",
    "connected_components",
    "convex_hull",
    "disc_element",
    "dilate",
    "erode",
    "farthest_pair",
    "fill_holes",
    "mask_area",
    "mask_bbox",
    "mask_iou",
    "morph_close",
    "morph_open",
    "morph_refine",
    "drop_small_components",
]

_STRUCT_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_STRUCT_8 = np.ones((3, 3), dtype=bool)


def _as_mask(mask: np.ndarray) -> np.ndarray:
    m = np.asarray(mask)
    if m.ndim != 2:
        raise ValueError(f"mask must be 2-dimensional, got shape {m.shape}")
    if m.shape[0] == 0 or m.shape[1] == 0:
        raise ValueError(f"mask dimensions must be positive, got shape {m.shape}")
    return m.astype(bool, copy=False)


def _connectivity_structure(connectivity: int) -> np.ndarray:
    if connectivity == 4:
        return _STRUCT_4
    if connectivity == 8:
        return _STRUCT_8
    raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")


def mask_area(mask: np.ndarray) -> int:
    """Number of foreground pixels."""
    return int(np.count_nonzero(_as_mask(mask)))


def mask_bbox(mask: np.ndarray) -> tuple[int, int, int, int]:
    """Tight bounding box of the foreground as (x0, y0, width, height).

    Raises ValueError on an empty mask.
    """
    m = _as_mask(mask)
    ys, xs = np.nonzero(m)
    if ys.size == 0:
        raise ValueError("empty mask")
    x0, x1 = int(xs.min()), int(xs.max())
    y0, y1 = int(ys.min()), int(ys.max())
    return x0, y0, x1 - x0 + 1, y1 - y0 + 1


def connected_components(mask: np.ndarray, connectivity: int = 8) -> list[np.ndarray]:
    """Split a mask into maximal connected foreground regions.

    Returns one full-size boolean mask per component, in raster scan order of
    first encounter. Components are pairwise disjoint and their union equals
    the input; an empty mask yields an empty list.
    """
    m = _as_mask(mask)
    labels, count = ndimage.label(m, structure=_connectivity_structure(connectivity))
    return [labels == i for i in range(1, count + 1)]


def disc_element(radius: int) -> np.ndarray:
    """Disc-approximating structuring element of the given pixel radius."""
    r = int(radius)
    if r < 1:
        raise ValueError(f"kernel radius must be >= 1, got {radius}")
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
    return (xx * xx + yy * yy) <= r * r


def erode(mask: np.ndarray, radius: int = 1) -> np.ndarray:
    # border_value=1: the world outside the canvas counts as foreground, so a
    # solid region touching the edge is not eaten from the outside.
    return ndimage.binary_erosion(_as_mask(mask), structure=disc_element(radius), border_value=1)


def dilate(mask: np.ndarray, radius: int = 1) -> np.ndarray:
    return ndimage.binary_dilation(_as_mask(mask), structure=disc_element(radius), border_value=0)


def morph_open(mask: np.ndarray, radius: int = 1) -> np.ndarray:
    """Erosion followed by dilation. Never increases area."""
    return dilate(erode(mask, radius), radius)


def morph_close(mask: np.ndarray, radius: int = 1) -> np.ndarray:
    """Dilation followed by erosion. Never decreases area."""
    return erode(dilate(mask, radius), radius)


def fill_holes(mask: np.ndarray) -> np.ndarray:
    """Fill background regions not connected to the canvas border."""
    return ndimage.binary_fill_holes(_as_mask(mask))


def drop_small_components(
    mask: np.ndarray,
    min_area_px: int = 0,
    min_area_frac: float = 0.0,
    connectivity: int = 8,
) -> np.ndarray:
    """Remove components with area below max(min_area_px, min_area_frac * largest)."""
    m = _as_mask(mask)
    labels, count = ndimage.label(m, structure=_connectivity_structure(connectivity))
    if count == 0:
        return m.copy()
    areas = np.bincount(labels.ravel())[1:]
    threshold = max(float(min_area_px), min_area_frac * float(areas.max()))
    keep = np.flatnonzero(areas >= threshold) + 1
    return np.isin(labels, keep)


@dataclass(frozen=True)
class RefineParams:
    """Mask clean-up recipe: a kernel radius and a sequence of operations.

    Supported ops: "erode", "dilate", "open", "close", "fill_holes",
    "drop_small". The drop threshold removes components smaller than
    max(min_area_px, min_area_frac * largest component area).
    """

    radius: int = 1
    ops: tuple[str, ...] = ("close", "fill_holes", "drop_small")
    min_area_px: int = 0
    min_area_frac: float = 0.005
    connectivity: int = 8

    def __post_init__(self) -> None:
        if self.radius < 1:
            raise ValueError(f"kernel radius must be >= 1, got {self.radius}")
        for op in self.ops:
            if op not in ("erode", "dilate", "open", "close", "fill_holes", "drop_small"):
                raise ValueError(f"unknown refinement op {op!r}")


def morph_refine(mask: np.ndarray, params: RefineParams = RefineParams()) -> np.ndarray:
    """Apply the configured morphological clean-up sequence.

    The result has the same dimensions as the input.
    """
    m = _as_mask(mask).copy()
    for op in params.ops:
        if op == "erode":
            m = erode(m, params.radius)
        elif op == "dilate":
            m = dilate(m, params.radius)
        elif op == "open":
            m = morph_open(m, params.radius)
        elif op == "close":
            m = morph_close(m, params.radius)
        elif op == "fill_holes":
            m = fill_holes(m)
        elif op == "drop_small":
            m = drop_small_components(
                m, params.min_area_px, params.min_area_frac, params.connectivity
            )
    return m


def _cross(o: tuple[int, int], a: tuple[int, int], b: tuple[int, int]) -> int:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points: list[tuple[int, int]]) -> list[tuple[int, int]]:
    """Convex hull of integer (x, y) points via Andrew's monotone chain.

    Returns hull vertices in counter-clockwise order (positive shoelace area
    in (x, y) coordinates). Collinear boundary points are excluded; degenerate
    inputs return a single point or the two extremes of a collinear set.
    """
    if len(points) == 0:
        raise ValueError("no points")
    pts = sorted({(int(p[0]), int(p[1])) for p in points})
    if len(pts) == 1:
        return [pts[0]]

    lower: list[tuple[int, int]] = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[int, int]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    # Fully collinear input collapses both chains onto the same segment.
    if len(hull) == 2 and hull[0] == hull[1]:
        return [hull[0]]
    return hull


def _d2(a: tuple[int, int], b: tuple[int, int]) -> int:
    dx = a[0] - b[0]
    dy = a[1] - b[1]
    return dx * dx + dy * dy


def _hull_diameter_sq(hull: list[tuple[int, int]]) -> int:
    """Squared diameter of a strictly convex CCW polygon by rotating calipers."""
    n = len(hull)
    if n == 1:
        return 0
    if n == 2:
        return _d2(hull[0], hull[1])
    best = 0
    j = 1
    for i in range(n):
        ni = (i + 1) % n
        # Advance the antipodal point while the supporting triangle area grows.
        while _cross(hull[i], hull[ni], hull[(j + 1) % n]) > _cross(hull[i], hull[ni], hull[j]):
            j = (j + 1) % n
        best = max(best, _d2(hull[i], hull[j]), _d2(hull[ni], hull[j]))
    return best


def farthest_pair(mask: np.ndarray) -> float:
    """Maximum Euclidean distance between centers of any two foreground pixels.

    Computed exactly with integer arithmetic: the candidate set reduces to
    row-wise extremal pixels, the convex hull of those points is built, and
    rotating calipers scan the antipodal pairs.
    """
    m = _as_mask(mask)
    ys, xs = np.nonzero(m)
    if ys.size == 0:
        raise ValueError("empty mask")
    if ys.size == 1:
        return 0.0
    # Hull vertices are row-extremal, so per-row min/max x suffice.
    order = np.lexsort((xs, ys))
    ys_sorted = ys[order]
    xs_sorted = xs[order]
    _, first = np.unique(ys_sorted, return_index=True)
    last = np.r_[first[1:] - 1, ys_sorted.size - 1]
    cand_ix = np.union1d(first, last)
    candidates = [(int(xs_sorted[i]), int(ys_sorted[i])) for i in cand_ix]
    hull = convex_hull(candidates)
    return math.sqrt(_hull_diameter_sq(hull))


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union of two equally sized masks.

    Returns 0.0 when the union is empty; two empty masks score 0 by convention
    and must never be compared during matching.
    """
    ma = _as_mask(a)
    mb = _as_mask(b)
    if ma.shape != mb.shape:
        raise ValueError(f"dimension mismatch: {ma.shape} vs {mb.shape}")
    union = int(np.count_nonzero(ma | mb))
    if union == 0:
        return 0.0
    inter = int(np.count_nonzero(ma & mb))
    return inter / union
