"""Score degraded predictions against generated ground truth.

Builds a tiny dataset, then fakes three predictors: perfect copies,
eroded masks, and masks with every third instance dropped.

Run: python3 demos/06_evaluate.py
Writes demos/output/eval/.
"""

from pathlib import Path

import numpy as np

import aggsynth as ag
from _common import demo_catalog

OUT = Path(__file__).parent / "output" / "eval"


def write_gt(catalog):
    gt = OUT / "gt"
    gt.mkdir(parents=True, exist_ok=True)
    for idx in range(3):
        stage = ag.StageSpec(stage="L2", classes=(3,), width=256, height=256,
                             mm_per_px=0.3)
        counts = np.zeros(8, dtype=np.int64)
        counts[2] = 20
        scene = ag.compose(catalog, counts, stage,
                           np.random.default_rng(600 + idx), seed=idx)
        image_id = f"L2_{idx:05d}"
        ag.write_pgm(ag.rasterize_graymap(scene), gt / f"{image_id}.pgm")
        ag.write_metadata(ag.build_record(scene, image_id), gt / f"{image_id}.json")
    return gt


def degrade(gt, name, transform):
    pred = OUT / name
    pred.mkdir(parents=True, exist_ok=True)
    for pgm in sorted(gt.glob("*.pgm")):
        graymap = ag.read_pgm(pgm)
        out = np.zeros_like(graymap)
        for inst_id in np.unique(graymap):
            if inst_id == 0:
                continue
            mask = transform(int(inst_id), graymap == inst_id)
            out[mask] = inst_id
        ag.write_pgm(out, pred / pgm.name)
    return pred


def main():
    gt = write_gt(demo_catalog())
    predictors = {
        "perfect": degrade(gt, "perfect", lambda i, m: m),
        "eroded": degrade(gt, "eroded", lambda i, m: ag.erode(m, 2)),
        "dropper": degrade(gt, "dropper",
                           lambda i, m: m if i % 3 else np.zeros_like(m)),
    }
    for name, pred in predictors.items():
        report = ag.evaluate_dataset(gt, pred)
        agg = report.aggregate
        print(f"=== {name}: mIoU {100 * agg['miou']:.2f}, "
              f"mAP50 {100 * agg['thresholds']['50']['ap']:.2f}, "
              f"mAP90 {100 * agg['thresholds']['90']['ap']:.2f}")
        print(report.table())
        print()


if __name__ == "__main__":
    main()
