"""Ground-truth anatomy: graymap, amodal RLE, repaint cross-check.

Run: python3 demos/05_ground_truth.py  (after 04_generate_scenes.py)
"""

from pathlib import Path

import numpy as np

import aggsynth as ag
from aggsynth.formats import instance_canvas_mask

SCENES = Path(__file__).parent / "output" / "scenes"


def main():
    if not (SCENES / "L3.json").exists():
        raise SystemExit("run 04_generate_scenes.py first")

    record = ag.read_metadata(SCENES / "L3.json")
    graymap = ag.read_pgm(SCENES / "L3.pgm")
    print(f"{record.image_id}: {record.width}x{record.height}, "
          f"{len(record.instances)} instances, seed {record.seed}")
    print(f"psd histogram {list(record.psd_histogram)}")

    # the graymap stores visible pixels only; the metadata stores the
    # full amodal mask per instance as RLE over its bbox
    inst = min(record.instances, key=lambda i: i.visibility)
    amodal_px = sum(n for _, n in inst.amodal_rle)
    print(f"\nmost occluded instance: id {inst.instance_id}, "
          f"class {inst.size_class} on layer {inst.layer}, z {inst.z}")
    print(f"  amodal {amodal_px} px, visible {inst.visible_area} px "
          f"-> visibility {inst.visibility:.3f}")

    visible_now = int(np.count_nonzero(graymap == inst.instance_id))
    assert visible_now == inst.visible_area

    # repaint every amodal mask in z order; the survivors must equal the
    # stored graymap exactly
    repaint = np.zeros_like(graymap)
    for i in sorted(record.instances, key=lambda i: i.z):
        repaint[instance_canvas_mask(i, record.width, record.height)] = (
            i.instance_id)
    assert (repaint == graymap).all()
    print("\nrepaint of stored amodal masks reproduces the graymap exactly")

    masks = ag.masks_from_record(record, amodal=True)
    print(f"decoded {len(masks)} amodal masks; largest "
          f"{max(int(m.mask.sum()) for m in masks)} px")


if __name__ == "__main__":
    main()
