"""Folds that keep input order inherit the dataset's camera layout.

A 568-image list with the first 86 from one camera, split into three
contiguous folds, puts that camera in fold 1 only. Seeded folds fix this
and are reproducible from the seed alone.
"""

from ccbench.groundtruth import GroundTruthTable
from ccbench.hygiene import audit_folds, make_folds

ids = [str(i) for i in range(1, 569)]
gt = GroundTruthTable.from_items(
    (i, (1.0, 1.0, 1.0), "canon1d" if int(i) <= 86 else "canon5d") for i in ids)

for mode, seed in (("none", None), ("seeded", 2024)):
    spec = make_folds(ids, 3, mode, seed)
    print(f"mode={mode}: fold sizes {[len(f) for f in spec.folds]}")
    for f in audit_folds(spec, gt):
        if f.check_id == "fold_camera_coverage":
            print(f"  {f.severity}: {f.message}")
            print(f"  composition: {f.evidence['composition']}")
