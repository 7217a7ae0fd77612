"""Instance-mask evaluation: one-to-one matching, mIoU, AP at 50-90.

Matching is greedy over descending IoU with a deterministic tie rule,
one-to-one between ground truth and predictions.  AP here is the
detection-set Jaccard TP / (TP + FP + FN): automatic mask generators
carry no confidence ranking, so the classical score-swept AP curve is
undefined; numbers are comparable only against this same definition.

mIoU denominates over ground truth: it is the mean over GT instances of
the matched IoU, with unmatched GT contributing zero, so heavy
under-segmentation drives mIoU toward zero.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .formats import decode_rle, read_metadata, read_pgm

THRESHOLDS = (0.5, 0.6, 0.7, 0.8, 0.9)


@dataclass(frozen=True)
class MaskInstance:
    """One instance mask stored bbox-locally on a common canvas."""

    x: int
    y: int
    mask: np.ndarray

    @property
    def area(self) -> int:
        return int(np.count_nonzero(self.mask))

    @property
    def box(self):
        h, w = self.mask.shape
        return (self.x, self.y, self.x + w, self.y + h)


def masks_from_graymap(canvas):
    """Extract per-id masks from an id canvas, ascending id order."""
    canvas = np.asarray(canvas)
    out = []
    for inst_id in np.unique(canvas):
        if inst_id == 0:
            continue
        rows, cols = np.nonzero(canvas == inst_id)
        y0, y1 = int(rows.min()), int(rows.max()) + 1
        x0, x1 = int(cols.min()), int(cols.max()) + 1
        local = canvas[y0:y1, x0:x1] == inst_id
        out.append(MaskInstance(x=x0, y=y0, mask=local))
    return out


def masks_from_record(record, amodal=True):
    """Instance masks from a metadata record's RLE entries.

    With ``amodal`` False, instances with zero visible area are
    dropped (they have no visible mask to predict).
    """
    out = []
    for inst in record.instances:
        if not amodal and inst.visible_area == 0:
            continue
        x, y, w, h = inst.bbox
        out.append(MaskInstance(x=x, y=y, mask=decode_rle(inst.amodal_rle, w, h)))
    return out


def _boxes(instances):
    if not instances:
        return np.zeros((0, 4), dtype=np.int64)
    return np.array([inst.box for inst in instances], dtype=np.int64)


def pairwise_iou(gt, pred):
    """IoU matrix (len(gt), len(pred)) with bbox culling.

    Pairs whose bounding boxes do not intersect are exactly zero and
    never touch pixel data.
    """
    iou = np.zeros((len(gt), len(pred)), dtype=np.float64)
    if not gt or not pred:
        return iou
    gb = _boxes(gt)
    pb = _boxes(pred)
    ax0 = np.maximum(gb[:, None, 0], pb[None, :, 0])
    ay0 = np.maximum(gb[:, None, 1], pb[None, :, 1])
    ax1 = np.minimum(gb[:, None, 2], pb[None, :, 2])
    ay1 = np.minimum(gb[:, None, 3], pb[None, :, 3])
    cand = (ax0 < ax1) & (ay0 < ay1)
    g_areas = np.array([g.area for g in gt])
    p_areas = np.array([p.area for p in pred])
    for i, j in zip(*np.nonzero(cand)):
        g, p = gt[i], pred[j]
        x0, y0, x1, y1 = int(ax0[i, j]), int(ay0[i, j]), int(ax1[i, j]), int(ay1[i, j])
        ga = g.mask[y0 - g.y:y1 - g.y, x0 - g.x:x1 - g.x]
        pa = p.mask[y0 - p.y:y1 - p.y, x0 - p.x:x1 - p.x]
        inter = int(np.count_nonzero(ga & pa))
        if inter == 0:
            continue
        union = int(g_areas[i]) + int(p_areas[j]) - inter
        iou[i, j] = inter / union
    return iou


@dataclass(frozen=True)
class MatchResult:
    """One-to-one matching outcome at a threshold."""

    matches: tuple              # (gt_index, pred_index, iou) triples
    unmatched_gt: tuple
    unmatched_pred: tuple

    @property
    def tp(self):
        return len(self.matches)


def match_instances(iou, threshold, confidences=None) -> MatchResult:
    """Greedy one-to-one matching over an IoU matrix.

    Candidate pairs have IoU >= threshold and IoU > 0.  Pairs are
    accepted in descending IoU; ties break by lower gt index, then by
    higher confidence when confidences are given, then by lower pred
    index, so the outcome is independent of input ordering.
    """
    iou = np.asarray(iou, dtype=np.float64)
    n_gt, n_pred = iou.shape
    if confidences is not None and len(confidences) != n_pred:
        raise ValueError("one confidence per prediction required")
    gi, pj = np.nonzero((iou >= threshold) & (iou > 0))
    if confidences is None:
        conf = np.zeros(n_pred)
    else:
        conf = np.asarray(confidences, dtype=np.float64)
    order = sorted(range(len(gi)),
                   key=lambda k: (-iou[gi[k], pj[k]], gi[k], -conf[pj[k]], pj[k]))
    gt_taken = np.zeros(n_gt, dtype=bool)
    pred_taken = np.zeros(n_pred, dtype=bool)
    matches = []
    for k in order:
        i, j = int(gi[k]), int(pj[k])
        if gt_taken[i] or pred_taken[j]:
            continue
        gt_taken[i] = True
        pred_taken[j] = True
        matches.append((i, j, float(iou[i, j])))
    return MatchResult(
        matches=tuple(matches),
        unmatched_gt=tuple(int(i) for i in range(n_gt) if not gt_taken[i]),
        unmatched_pred=tuple(int(j) for j in range(n_pred) if not pred_taken[j]),
    )


def mean_iou(iou, confidences=None):
    """Mean best-match IoU over ground truth, unmatched counting zero.

    Matching runs at threshold zero-plus: any positive overlap is
    eligible.
    """
    iou = np.asarray(iou, dtype=np.float64)
    n_gt = iou.shape[0]
    if n_gt == 0:
        raise ValueError("no ground truth")
    result = match_instances(iou, 0.0, confidences)
    return sum(m[2] for m in result.matches) / n_gt


def ap_at(iou, threshold, confidences=None):
    """Detection-set Jaccard TP / (TP + FP + FN) at one threshold.

    An empty problem (no ground truth and no predictions) scores 1.0
    vacuously.
    """
    iou = np.asarray(iou, dtype=np.float64)
    n_gt, n_pred = iou.shape
    result = match_instances(iou, threshold, confidences)
    tp = result.tp
    denom = tp + (n_pred - tp) + (n_gt - tp)
    if denom == 0:
        return 1.0
    return tp / denom


@dataclass
class ImageMetrics:
    """Scores for one image."""

    image_id: str
    n_gt: int
    n_pred: int
    miou: float
    segmented: int                    # GT matched at threshold 0.5
    by_threshold: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "image_id": self.image_id,
            "n_gt": self.n_gt,
            "n_pred": self.n_pred,
            "miou": self.miou,
            "segmented": self.segmented,
            "thresholds": {
                f"{int(round(t * 100))}": dict(v)
                for t, v in sorted(self.by_threshold.items())
            },
        }


@dataclass
class MetricsReport:
    """Per-image scores plus their unweighted aggregate."""

    images: list = field(default_factory=list)
    thresholds: tuple = THRESHOLDS

    @property
    def aggregate(self):
        """Mean metrics and summed counts over all images."""
        n = len(self.images)
        if n == 0:
            raise ValueError("no images evaluated")
        agg = {
            "images": n,
            "miou": sum(im.miou for im in self.images) / n,
            "segmented": sum(im.segmented for im in self.images),
            "total_gt": sum(im.n_gt for im in self.images),
            "thresholds": {},
        }
        for t in self.thresholds:
            key = f"{int(round(t * 100))}"
            agg["thresholds"][key] = {
                "tp": sum(im.by_threshold[t]["tp"] for im in self.images),
                "fp": sum(im.by_threshold[t]["fp"] for im in self.images),
                "fn": sum(im.by_threshold[t]["fn"] for im in self.images),
                "precision": sum(im.by_threshold[t]["precision"] for im in self.images) / n,
                "recall": sum(im.by_threshold[t]["recall"] for im in self.images) / n,
                "ap": sum(im.by_threshold[t]["ap"] for im in self.images) / n,
            }
        return agg

    def to_dict(self):
        return {
            "thresholds": [f"{int(round(t * 100))}" for t in self.thresholds],
            "images": [im.to_dict() for im in self.images],
            "aggregate": self.aggregate,
        }

    def table(self):
        """Delimited score table: mIoU then AP per threshold."""
        keys = [f"{int(round(t * 100))}" for t in self.thresholds]
        header = ["image", "gt", "seg", "mIoU"] + [f"mAP{k}" for k in keys]
        rows = [header]
        for im in self.images:
            rows.append([im.image_id, str(im.n_gt), str(im.segmented),
                         f"{im.miou * 100:.2f}"]
                        + [f"{im.by_threshold[t]['ap'] * 100:.2f}"
                           for t in self.thresholds])
        agg = self.aggregate
        rows.append(["aggregate", str(agg["total_gt"]), str(agg["segmented"]),
                     f"{agg['miou'] * 100:.2f}"]
                    + [f"{agg['thresholds'][k]['ap'] * 100:.2f}" for k in keys])
        widths = [max(len(r[c]) for r in rows) for c in range(len(header))]
        lines = []
        for r in rows:
            lines.append("  ".join(cell.rjust(w) for cell, w in zip(r, widths)))
        return "\n".join(lines)


def score_image(image_id, gt_masks, pred_masks, confidences=None,
                thresholds=THRESHOLDS) -> ImageMetrics:
    """Evaluate one image's predictions against its ground truth."""
    iou = pairwise_iou(gt_masks, pred_masks)
    n_gt, n_pred = iou.shape
    metrics = ImageMetrics(
        image_id=image_id, n_gt=n_gt, n_pred=n_pred,
        miou=mean_iou(iou, confidences),
        segmented=match_instances(iou, 0.5, confidences).tp,
    )
    for t in thresholds:
        tp = match_instances(iou, t, confidences).tp
        fp = n_pred - tp
        fn = n_gt - tp
        metrics.by_threshold[t] = {
            "tp": tp,
            "fp": fp,
            "fn": fn,
            "precision": tp / (tp + fp) if tp + fp else 0.0,
            "recall": tp / (tp + fn) if tp + fn else 0.0,
            "ap": tp / (tp + fp + fn) if tp + fp + fn else 1.0,
        }
    return metrics


def _dataset_ids(gt_dir):
    ids = sorted(os.path.splitext(name)[0] for name in os.listdir(gt_dir)
                 if name.endswith(".json") and name != "manifest.json")
    if not ids:
        raise ValueError(f"no ground-truth records in {gt_dir}")
    return ids


def _load_predictions(pred_dir, image_id):
    """Masks plus optional confidences for one image's predictions."""
    pgm_path = os.path.join(pred_dir, f"{image_id}.pgm")
    json_path = os.path.join(pred_dir, f"{image_id}.json")
    if os.path.isfile(pgm_path):
        try:
            canvas = read_pgm(pgm_path)
        except ValueError as exc:
            raise ValueError(f"unreadable prediction {pgm_path}: {exc}") from exc
        return masks_from_graymap(canvas), None
    if os.path.isfile(json_path):
        try:
            with open(json_path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
            masks = []
            confs = []
            for inst in doc["instances"]:
                x, y, w, h = (int(v) for v in inst["bbox"])
                rle = [(int(s), int(n)) for s, n in inst["rle"]]
                masks.append(MaskInstance(x=x, y=y, mask=decode_rle(rle, w, h)))
                confs.append(float(inst.get("confidence", 0.0)))
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise ValueError(f"unreadable prediction {json_path}: {exc}") from exc
        has_conf = any(c != 0.0 for c in confs)
        return masks, (confs if has_conf else None)
    return None, None


def evaluate_dataset(gt_dir, pred_dir, amodal=False,
                     thresholds=THRESHOLDS) -> MetricsReport:
    """Score a prediction directory against a generated dataset.

    Ground truth is the visible (graymap) segmentation by default, or
    the amodal RLE masks with ``amodal`` True.  Predictions are per
    image either ``<id>.pgm`` (each nonzero id one instance) or
    ``<id>.json`` with ``{"instances": [{"bbox", "rle",
    "confidence"?}]}`` entries.
    """
    ids = _dataset_ids(gt_dir)
    missing = []
    loaded = {}
    for image_id in ids:
        masks, confs = _load_predictions(pred_dir, image_id)
        if masks is None:
            missing.append(image_id)
        else:
            loaded[image_id] = (masks, confs)
    if missing:
        raise ValueError(
            "missing predictions for: " + ", ".join(missing)
        )

    report = MetricsReport(thresholds=tuple(thresholds))
    for image_id in ids:
        record = read_metadata(os.path.join(gt_dir, f"{image_id}.json"))
        if amodal:
            gt_masks = masks_from_record(record, amodal=True)
        else:
            gt_path = os.path.join(gt_dir, f"{image_id}.pgm")
            gt_masks = masks_from_graymap(read_pgm(gt_path))
        pred_masks, confs = loaded[image_id]
        report.images.append(
            score_image(image_id, gt_masks, pred_masks, confs, thresholds)
        )
    return report
