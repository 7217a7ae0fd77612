"""Independent reference implementations used to cross-check the library.

Everything here is written the slow, obvious way (BFS, O(n^2) scans,
sequential repainting, scalar math) so the fast implementations in the
package are checked against a second route, never against themselves.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np

from aggsynth.formats import instance_canvas_mask


def flood_components(mask, connectivity=8):
    """Connected components by BFS flood fill.

    Returns full-size bool masks ordered by each component's first
    pixel in raster order, matching the library's contract.
    """
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    if connectivity == 4:
        steps = ((-1, 0), (1, 0), (0, -1), (0, 1))
    else:
        steps = tuple(
            (dr, dc)
            for dr in (-1, 0, 1)
            for dc in (-1, 0, 1)
            if (dr, dc) != (0, 0)
        )
    seen = np.zeros_like(mask)
    comps = []
    for r in range(h):
        for c in range(w):
            if not mask[r, c] or seen[r, c]:
                continue
            comp = np.zeros_like(mask)
            queue = deque([(r, c)])
            seen[r, c] = True
            while queue:
                cr, cc = queue.popleft()
                comp[cr, cc] = True
                for dr, dc in steps:
                    nr, nc = cr + dr, cc + dc
                    if 0 <= nr < h and 0 <= nc < w:
                        if mask[nr, nc] and not seen[nr, nc]:
                            seen[nr, nc] = True
                            queue.append((nr, nc))
            comps.append(comp)
    return comps


def boundary_pixels(mask):
    """(row, col) pairs with an off 4-neighbor or on the array edge."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    out = []
    for r in range(h):
        for c in range(w):
            if not mask[r, c]:
                continue
            if r in (0, h - 1) or c in (0, w - 1):
                out.append((r, c))
            elif not (mask[r - 1, c] and mask[r + 1, c]
                      and mask[r, c - 1] and mask[r, c + 1]):
                out.append((r, c))
    return out


def brute_farthest(mask):
    """Largest pairwise distance over boundary pixel centers, O(b^2).

    The farthest pair of the full pixel set is attained at convex hull
    vertices, and every hull vertex is row-extremal hence a boundary
    pixel, so scanning boundary pixels only loses nothing.
    """
    pts = boundary_pixels(mask)
    best = 0
    for i in range(len(pts)):
        r0, c0 = pts[i]
        for j in range(i + 1, len(pts)):
            d = (r0 - pts[j][0]) ** 2 + (c0 - pts[j][1]) ** 2
            if d > best:
                best = d
    return math.sqrt(best)


def repaint_counts(record, max_layer=None):
    """Visible pixel counts from a fresh z-order repaint of a record.

    Decodes every stored amodal RLE, paints instance ids in ascending
    z onto a blank canvas and counts surviving pixels per id.  With
    ``max_layer`` given, instances above that layer are left out, which
    yields the within-layer visibility used by the layered occlusion
    floor.
    """
    insts = [
        i for i in record.instances
        if max_layer is None or i.layer <= max_layer
    ]
    canvas = np.zeros((record.height, record.width), dtype=np.int64)
    for inst in sorted(insts, key=lambda i: i.z):
        canvas[instance_canvas_mask(inst, record.width, record.height)] = (
            inst.instance_id
        )
    return {
        inst.instance_id: int(np.count_nonzero(canvas == inst.instance_id))
        for inst in insts
    }


def scene_record(scene, image_id="oracle"):
    """Shorthand: full metadata record for a composed scene."""
    from aggsynth.render import build_record

    return build_record(scene, image_id)


def normal_class_mass(mean, std):
    """Normal density read at class indices 1..8, renormalized.

    Plain scalar math, independent of the vectorized sampler.
    """
    dens = [math.exp(-0.5 * ((k - mean) / std) ** 2) for k in range(1, 9)]
    total = sum(dens)
    return [d / total for d in dens]


def iou_of(a, b):
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    union = int(np.count_nonzero(a | b))
    if union == 0:
        return 0.0
    return int(np.count_nonzero(a & b)) / union


def greedy_match_scan(iou, threshold, conf=None):
    """Greedy one-to-one matching by repeated argmax over free pairs.

    Same tie order as the library (IoU desc, ground-truth index asc,
    confidence desc, prediction index asc) but realized as an O(n^3)
    scan instead of one sort, so the two routes stay independent.
    """
    iou = np.asarray(iou, dtype=float)
    n_gt, n_pred = iou.shape
    if conf is None:
        conf = np.zeros(n_pred)
    gt_free = [True] * n_gt
    pred_free = [True] * n_pred
    matches = []
    while True:
        best = None
        for gi in range(n_gt):
            if not gt_free[gi]:
                continue
            for pj in range(n_pred):
                if not pred_free[pj]:
                    continue
                v = iou[gi, pj]
                if v < threshold or v <= 0.0:
                    continue
                key = (v, -gi, conf[pj], -pj)
                if best is None or key > best[0]:
                    best = (key, gi, pj)
        if best is None:
            return matches
        _, gi, pj = best
        gt_free[gi] = False
        pred_free[pj] = False
        matches.append((gi, pj))


def random_blob(rng, size=64):
    """Random connected 8-connected blob inside a size x size box.

    Union of a few overlapping discs around a common center, so the
    result is connected but lumpy.  Guaranteed non-empty.
    """
    h = w = int(size)
    yy, xx = np.mgrid[0:h, 0:w]
    cy, cx = rng.uniform(h * 0.3, h * 0.7), rng.uniform(w * 0.3, w * 0.7)
    mask = np.zeros((h, w), dtype=bool)
    base_r = rng.uniform(size * 0.12, size * 0.28)
    mask |= (yy - cy) ** 2 + (xx - cx) ** 2 <= base_r ** 2
    for _ in range(int(rng.integers(2, 6))):
        ang = rng.uniform(0, 2 * np.pi)
        d = rng.uniform(0, base_r)
        r = rng.uniform(size * 0.05, base_r)
        by, bx = cy + d * np.sin(ang), cx + d * np.cos(ang)
        mask |= (yy - by) ** 2 + (xx - bx) ** 2 <= r ** 2
    return mask
