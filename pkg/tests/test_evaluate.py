"""Evaluation harness: matching, mIoU, AP, dataset scoring."""

import json

import numpy as np
import pytest

import aggsynth as ag
from aggsynth.evaluate import (
    MaskInstance,
    _load_predictions,
    ap_at,
    pairwise_iou,
    score_image,
)
from aggsynth.formats import instance_canvas_mask

from conftest import counts_for, stage
from oracles import greedy_match_scan, iou_of

# mIoU and AP here follow the harness's own fixed definitions: mean
# best-match IoU over ground truth, and the detection-set Jaccard
# TP / (TP + FP + FN) without any confidence sweep.


def strip(x, width, row=0):
    """Single-row horizontal strip instance at (x, row)."""
    return MaskInstance(x=x, y=row, mask=np.ones((1, width), dtype=bool))


def materialize(instances, width=64, height=64):
    out = []
    for inst in instances:
        canvas = np.zeros((height, width), dtype=bool)
        h, w = inst.mask.shape
        canvas[inst.y:inst.y + h, inst.x:inst.x + w] = inst.mask
        out.append(canvas)
    return out


def disc_instance(cx, cy, r):
    yy, xx = np.mgrid[0:2 * r + 1, 0:2 * r + 1]
    mask = (yy - r) ** 2 + (xx - r) ** 2 <= r * r
    return MaskInstance(x=cx - r, y=cy - r, mask=mask)


def random_layout(rng, n, jitter=0):
    out = []
    for k in range(n):
        cx = 8 + int(rng.integers(0, 6)) + 12 * (k % 4)
        cy = 8 + 12 * (k // 4)
        r = int(rng.integers(3, 6))
        out.append(disc_instance(cx + int(rng.integers(-jitter, jitter + 1)) if jitter else cx,
                                 cy, r))
    return out


# ---------------------------------------------------------------------------
# Mask extraction


def test_masks_from_graymap_known():
    canvas = np.zeros((8, 8), dtype=np.uint16)
    canvas[1:3, 1:4] = 2
    canvas[5:8, 5:7] = 1
    got = ag.masks_from_graymap(canvas)
    assert len(got) == 2
    assert (got[0].x, got[0].y, got[0].area) == (5, 5, 6)  # ascending id
    assert (got[1].x, got[1].y, got[1].area) == (1, 1, 6)
    assert got[1].mask.shape == (2, 3)


def test_masks_from_graymap_empty():
    assert ag.masks_from_graymap(np.zeros((4, 4), dtype=np.uint16)) == []


def test_masks_from_record_matches_canvas_masks(catalog03):
    # Rotated ellipses give non-square bboxes, so any width/height mixup
    # in the RLE decode would scramble these masks.
    scene = ag.compose_l2(catalog03, counts_for({4: 8}), stage("L2", (4,), size=256),
                          np.random.default_rng(70))
    record = ag.build_record(scene, "t")
    masks = ag.masks_from_record(record)
    assert len(masks) == len(record.instances)
    for inst, got in zip(record.instances, masks):
        x, y, w, h = inst.bbox
        assert (got.x, got.y) == (x, y)
        assert got.mask.shape == (h, w)
        full = np.zeros((record.height, record.width), dtype=bool)
        full[y:y + h, x:x + w] = got.mask
        assert (full == instance_canvas_mask(inst, record.width, record.height)).all()


def test_masks_from_record_amodal_flag(catalog03):
    scene = ag.compose_l3(catalog03, counts_for({1: 60, 6: 3}),
                          stage("L3", tuple(range(1, 9)), size=320),
                          np.random.default_rng(71))
    record = ag.build_record(scene, "t")
    buried = [i for i in record.instances if i.visible_area == 0]
    assert buried, "layout should bury at least one particle"
    amodal = ag.masks_from_record(record, amodal=True)
    visible = ag.masks_from_record(record, amodal=False)
    assert len(amodal) == len(record.instances)
    assert len(visible) == len(record.instances) - len(buried)


# ---------------------------------------------------------------------------
# Pairwise IoU


def test_pairwise_iou_matches_canvas_oracle():
    rng = np.random.default_rng(72)
    for _ in range(10):
        gt = random_layout(rng, int(rng.integers(1, 9)))
        pred = random_layout(rng, int(rng.integers(1, 9)), jitter=3)
        got = pairwise_iou(gt, pred)
        gt_full = materialize(gt)
        pred_full = materialize(pred)
        for i, g in enumerate(gt_full):
            for j, p in enumerate(pred_full):
                assert got[i, j] == iou_of(g, p)


def test_pairwise_iou_empty_sides():
    inst = [strip(0, 5)]
    assert pairwise_iou([], inst).shape == (0, 1)
    assert pairwise_iou(inst, []).shape == (1, 0)
    assert pairwise_iou([], []).shape == (0, 0)


def test_pairwise_iou_disjoint_boxes_stay_zero():
    a = [strip(0, 5, row=0)]
    b = [strip(0, 5, row=10)]
    assert pairwise_iou(a, b)[0, 0] == 0.0


# ---------------------------------------------------------------------------
# Matching


def test_match_identity():
    gt = [strip(0, 10), strip(20, 10)]
    iou = pairwise_iou(gt, gt)
    result = ag.match_instances(iou, 0.5)
    assert result.matches == ((0, 0, 1.0), (1, 1, 1.0))
    assert result.unmatched_gt == () and result.unmatched_pred == ()


def test_match_is_one_to_one_with_duplicates():
    gt = [strip(0, 10)]
    pred = [strip(0, 10), strip(0, 10)]
    result = ag.match_instances(pairwise_iou(gt, pred), 0.5)
    assert result.tp == 1
    assert result.matches[0][:2] == (0, 0)  # index tie falls to pred 0
    assert result.unmatched_pred == (1,)


def test_match_confidence_breaks_ties():
    gt = [strip(0, 10)]
    pred = [strip(0, 10), strip(0, 10)]
    iou = pairwise_iou(gt, pred)
    result = ag.match_instances(iou, 0.5, confidences=[0.2, 0.9])
    assert result.matches[0][:2] == (0, 1)
    with pytest.raises(ValueError, match="one confidence per prediction"):
        ag.match_instances(iou, 0.5, confidences=[0.2])


def test_match_prefers_higher_iou_not_gt_order():
    # gt0 overlaps pred0 weakly, gt1 overlaps pred0 strongly: the
    # strong pair wins even though gt0 comes first.
    gt = [strip(0, 10), strip(4, 10)]
    pred = [strip(4, 10)]
    result = ag.match_instances(pairwise_iou(gt, pred), 0.1)
    assert result.matches[0][:2] == (1, 0)
    assert result.unmatched_gt == (0,)


def test_match_threshold_excludes_weak_pairs():
    gt = [strip(0, 31)]
    pred = [strip(9, 31)]  # IoU 22/40 = 0.55
    iou = pairwise_iou(gt, pred)
    assert iou[0, 0] == 0.55
    assert ag.match_instances(iou, 0.5).tp == 1
    assert ag.match_instances(iou, 0.6).tp == 0


def test_match_agrees_with_scan_oracle():
    rng = np.random.default_rng(73)
    for _ in range(20):
        n_gt, n_pred = rng.integers(1, 10, size=2)
        iou = np.round(rng.random((n_gt, n_pred)) * (rng.random((n_gt, n_pred)) < 0.4), 3)
        conf = rng.random(n_pred)
        for t in (0.3, 0.5, 0.7):
            got = ag.match_instances(iou, t, confidences=conf)
            want = greedy_match_scan(iou, t, conf)
            assert [m[:2] for m in got.matches] == want


def test_match_permutation_invariant():
    rng = np.random.default_rng(74)
    gt = random_layout(rng, 8)
    pred = random_layout(rng, 8, jitter=3)
    iou = pairwise_iou(gt, pred)
    base = ag.match_instances(iou, 0.3)
    pairs = {(g, p) for g, p, _ in base.matches}
    for _ in range(5):
        perm = rng.permutation(len(pred))
        shuffled = [pred[j] for j in perm]
        got = ag.match_instances(pairwise_iou(gt, shuffled), 0.3)
        unshuffled = {(g, int(perm[p])) for g, p, _ in got.matches}
        assert unshuffled == pairs


# ---------------------------------------------------------------------------
# mIoU and AP


def test_mean_iou_identity_and_empty():
    gt = [strip(0, 10), strip(20, 10)]
    assert ag.mean_iou(pairwise_iou(gt, gt)) == 1.0
    assert ag.mean_iou(pairwise_iou(gt, [])) == 0.0
    with pytest.raises(ValueError, match="no ground truth"):
        ag.mean_iou(pairwise_iou([], []))


def test_mean_iou_counts_any_positive_overlap():
    gt = [strip(0, 10)]
    pred = [strip(9, 10)]  # IoU 1/19, below every AP threshold
    miou = ag.mean_iou(pairwise_iou(gt, pred))
    assert miou == 1 / 19


def test_ap_at_threshold_edges():
    gt = [strip(0, 31)]
    pred = [strip(9, 31)]
    iou = pairwise_iou(gt, pred)
    assert ap_at(iou, 0.5) == 1.0
    assert ap_at(iou, 0.6) == 0.0
    assert ap_at(np.zeros((0, 0)), 0.5) == 1.0  # vacuous
    assert ap_at(np.zeros((2, 0)), 0.5) == 0.0  # no predictions


def test_background_prediction_lowers_ap_not_miou():
    gt = [strip(0, 10, row=1)]
    perfect = [strip(0, 10, row=1)]
    noisy = perfect + [strip(40, 10, row=40)]
    iou_p = pairwise_iou(gt, perfect)
    iou_n = pairwise_iou(gt, noisy)
    assert ag.mean_iou(iou_p) == ag.mean_iou(iou_n) == 1.0
    assert ap_at(iou_p, 0.5) == 1.0
    assert ap_at(iou_n, 0.5) == 0.5  # 1 TP, 1 FP


def test_ap_monotone_in_threshold():
    rng = np.random.default_rng(75)
    for _ in range(30):
        n_gt, n_pred = rng.integers(0, 8, size=2)
        iou = rng.random((n_gt, n_pred)) * (rng.random((n_gt, n_pred)) < 0.5)
        values = [ap_at(iou, t) for t in np.linspace(0.05, 0.95, 10)]
        assert all(a >= b for a, b in zip(values, values[1:]))


# ---------------------------------------------------------------------------
# Image scores and report aggregation


def test_score_image_counts():
    gt = [strip(0, 31, row=0), strip(0, 10, row=5)]
    pred = [strip(9, 31, row=0)]  # matches gt0 at 0.55 only
    m = score_image("img", gt, pred)
    assert (m.n_gt, m.n_pred) == (2, 1)
    assert m.segmented == 1
    t50 = m.by_threshold[0.5]
    assert (t50["tp"], t50["fp"], t50["fn"]) == (1, 0, 1)
    assert t50["precision"] == 1.0 and t50["recall"] == 0.5
    assert t50["ap"] == 0.5
    t60 = m.by_threshold[0.6]
    assert (t60["tp"], t60["fp"], t60["fn"]) == (0, 1, 2)
    assert t60["precision"] == 0.0 and t60["recall"] == 0.0
    assert m.miou == (0.55 + 0.0) / 2


def test_report_aggregate_means_and_sums():
    gt_a = [strip(0, 10)]
    gt_b = [strip(0, 31), strip(0, 10, row=5)]
    pred_b = [strip(9, 31)]
    report = ag.MetricsReport()
    report.images.append(score_image("a", gt_a, gt_a))
    report.images.append(score_image("b", gt_b, pred_b))
    agg = report.aggregate
    assert agg["images"] == 2
    assert agg["total_gt"] == 3
    assert agg["segmented"] == 2
    assert agg["miou"] == (1.0 + 0.275) / 2
    t50 = agg["thresholds"]["50"]
    assert (t50["tp"], t50["fp"], t50["fn"]) == (2, 0, 1)
    assert t50["ap"] == (1.0 + 0.5) / 2  # unweighted mean over images
    t60 = agg["thresholds"]["60"]
    assert (t60["tp"], t60["fp"], t60["fn"]) == (1, 1, 2)


def test_report_table_shape():
    gt = [strip(0, 10)]
    report = ag.MetricsReport()
    report.images.append(score_image("img_0", gt, gt))
    text = report.table()
    lines = text.splitlines()
    assert lines[0].split() == ["image", "gt", "seg", "mIoU",
                                "mAP50", "mAP60", "mAP70", "mAP80", "mAP90"]
    assert lines[1].split()[0] == "img_0"
    assert lines[-1].split()[0] == "aggregate"
    assert "100.00" in lines[-1]


def test_report_empty_raises():
    with pytest.raises(ValueError, match="no images"):
        _ = ag.MetricsReport().aggregate


# ---------------------------------------------------------------------------
# Dataset evaluation


@pytest.fixture()
def tiny_dataset(catalog03, tmp_path):
    gt_dir = tmp_path / "gt"
    gt_dir.mkdir()
    records = {}
    for idx in range(2):
        scene = ag.compose_l2(catalog03, counts_for({3: 6}),
                              stage("L2", (3,), size=128),
                              np.random.default_rng(80 + idx), seed=idx)
        image_id = f"L2_{idx:05d}"
        ag.write_pgm(ag.rasterize_graymap(scene), gt_dir / f"{image_id}.pgm")
        record = ag.build_record(scene, image_id)
        ag.write_metadata(record, gt_dir / f"{image_id}.json")
        records[image_id] = record
    return gt_dir, records


def test_evaluate_dataset_self_is_perfect(tiny_dataset, tmp_path):
    gt_dir, _ = tiny_dataset
    pred_dir = tmp_path / "pred"
    pred_dir.mkdir()
    for pgm in gt_dir.glob("*.pgm"):
        (pred_dir / pgm.name).write_bytes(pgm.read_bytes())
    report = ag.evaluate_dataset(gt_dir, pred_dir)
    agg = report.aggregate
    assert agg["images"] == 2
    assert agg["miou"] == 1.0
    assert agg["segmented"] == agg["total_gt"]
    for key in ("50", "70", "90"):
        assert agg["thresholds"][key]["ap"] == 1.0
        assert agg["thresholds"][key]["fp"] == 0
        assert agg["thresholds"][key]["fn"] == 0


def test_evaluate_dataset_json_predictions(tiny_dataset, tmp_path):
    gt_dir, _ = tiny_dataset
    pred_dir = tmp_path / "pred"
    pred_dir.mkdir()
    for pgm in gt_dir.glob("*.pgm"):
        masks = ag.masks_from_graymap(ag.read_pgm(pgm))
        doc = {"instances": [
            {"bbox": [m.x, m.y, m.mask.shape[1], m.mask.shape[0]],
             "rle": [list(run) for run in ag.encode_rle(m.mask)],
             "confidence": 0.9}
            for m in masks
        ]}
        (pred_dir / f"{pgm.stem}.json").write_text(json.dumps(doc))
    report = ag.evaluate_dataset(gt_dir, pred_dir)
    assert report.aggregate["miou"] == 1.0
    masks, confs = _load_predictions(pred_dir, "L2_00000")
    assert confs is not None and all(c == 0.9 for c in confs)


def test_evaluate_dataset_amodal_ground_truth(tiny_dataset, tmp_path):
    gt_dir, records = tiny_dataset
    pred_dir = tmp_path / "pred"
    pred_dir.mkdir()
    for image_id, record in records.items():
        doc = {"instances": [
            {"bbox": list(inst.bbox),
             "rle": [list(run) for run in inst.amodal_rle]}
            for inst in record.instances
        ]}
        (pred_dir / f"{image_id}.json").write_text(json.dumps(doc))
    report = ag.evaluate_dataset(gt_dir, pred_dir, amodal=True)
    assert report.aggregate["miou"] == 1.0
    assert report.aggregate["thresholds"]["90"]["ap"] == 1.0


def test_evaluate_dataset_missing_predictions(tiny_dataset, tmp_path):
    gt_dir, _ = tiny_dataset
    pred_dir = tmp_path / "pred"
    pred_dir.mkdir()
    (pred_dir / "L2_00000.pgm").write_bytes((gt_dir / "L2_00000.pgm").read_bytes())
    with pytest.raises(ValueError, match="missing predictions for: L2_00001"):
        ag.evaluate_dataset(gt_dir, pred_dir)


def test_evaluate_dataset_unreadable_prediction(tiny_dataset, tmp_path):
    gt_dir, _ = tiny_dataset
    pred_dir = tmp_path / "pred"
    pred_dir.mkdir()
    for pgm in gt_dir.glob("*.pgm"):
        (pred_dir / pgm.name).write_bytes(b"P5\nbroken")
    with pytest.raises(ValueError, match="unreadable prediction"):
        ag.evaluate_dataset(gt_dir, pred_dir)
    for name in ("L2_00000", "L2_00001"):
        (pred_dir / f"{name}.pgm").unlink()
        (pred_dir / f"{name}.json").write_text('{"instances": [{"bbox": [0, 0]}]}')
    with pytest.raises(ValueError, match="unreadable prediction"):
        ag.evaluate_dataset(gt_dir, pred_dir)


def test_evaluate_dataset_empty_predictions_score_zero(tiny_dataset, tmp_path):
    gt_dir, _ = tiny_dataset
    pred_dir = tmp_path / "pred"
    pred_dir.mkdir()
    for pgm in gt_dir.glob("*.pgm"):
        shape = ag.read_pgm(pgm).shape
        ag.write_pgm(np.zeros(shape, dtype=np.uint16), pred_dir / pgm.name)
    agg = ag.evaluate_dataset(gt_dir, pred_dir).aggregate
    assert agg["miou"] == 0.0
    assert agg["thresholds"]["50"]["ap"] == 0.0
    assert agg["segmented"] == 0


def test_evaluate_dataset_requires_ground_truth(tmp_path):
    empty = tmp_path / "none"
    empty.mkdir()
    with pytest.raises(ValueError, match="no ground-truth records"):
        ag.evaluate_dataset(empty, empty)
