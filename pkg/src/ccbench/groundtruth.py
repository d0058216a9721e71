"""Ground-truth extraction from achromatic chart patches, and table diffs."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, PreprocessingError
from .estimators import Illuminant
from .evaluation import ErrorStats, angular_error, compute_stats
from .imaging import LinearImage, SaturationMask, saturation_mask

DEFAULT_INSET = 0.15


@dataclass(frozen=True, eq=False)
class PatchAnnotation:
    """Achromatic patches of one image, brightest first.

    Each patch is a convex quadrilateral given as four (x, y) vertices in
    pixel coordinates, where pixel (col, row) covers [col, col+1) x
    [row, row+1). ``inset`` shrinks each quad toward its centroid by a
    factor ``1 - 2*inset`` before sampling.
    """

    image_id: str
    patches: tuple
    inset: float = DEFAULT_INSET

    def __post_init__(self):
        quads = tuple(np.asarray(q, dtype=np.float64).reshape(4, 2) for q in self.patches)
        if not quads:
            raise DataError(f"{self.image_id}: annotation has no patches")
        if not 0 <= self.inset < 0.5:
            raise DataError(f"{self.image_id}: inset must be in [0, 0.5)")
        object.__setattr__(self, "patches", quads)

    def to_dict(self) -> dict:
        return {"image_id": self.image_id,
                "patches": [q.tolist() for q in self.patches],
                "inset": self.inset}

    @classmethod
    def from_dict(cls, d) -> PatchAnnotation:
        return cls(str(d["image_id"]), tuple(d["patches"]), float(d.get("inset", DEFAULT_INSET)))


def read_annotations(path) -> dict[str, PatchAnnotation]:
    with open(path) as f:
        items = json.load(f)
    out = {}
    for d in items:
        ann = PatchAnnotation.from_dict(d)
        if ann.image_id in out:
            raise DataError(f"{path}: duplicate annotation for {ann.image_id!r}")
        out[ann.image_id] = ann
    return out


def write_annotations(annotations, path) -> None:
    with open(path, "w") as f:
        json.dump([a.to_dict() for a in annotations], f, indent=2)
        f.write("\n")


def quad_pixels(quad, width: int, height: int, inset: float = 0.0) -> np.ndarray:
    """Boolean (height, width) mask of pixels whose centers lie in the quad."""
    quad = np.asarray(quad, dtype=np.float64).reshape(4, 2)
    if (quad[:, 0].min() < 0 or quad[:, 1].min() < 0
            or quad[:, 0].max() > width or quad[:, 1].max() > height):
        raise DataError(f"patch {quad.tolist()} lies outside the {width}x{height} image")
    centroid = quad.mean(axis=0)
    quad = centroid + (1.0 - 2.0 * inset) * (quad - centroid)
    ys, xs = np.mgrid[0:height, 0:width]
    px, py = xs + 0.5, ys + 0.5
    signs = []
    for i in range(4):
        (x0, y0), (x1, y1) = quad[i], quad[(i + 1) % 4]
        signs.append((x1 - x0) * (py - y0) - (y1 - y0) * (px - x0))
    signs = np.stack(signs)
    return np.all(signs >= 0, axis=0) | np.all(signs <= 0, axis=0)


def patch_means(img: LinearImage, ann: PatchAnnotation,
                mask: SaturationMask | None = None) -> list[np.ndarray | None]:
    """Mean RGB of each patch interior; ``None`` for patches with clipped pixels."""
    if mask is None:
        mask = saturation_mask(img)
    out = []
    for quad in ann.patches:
        inside = quad_pixels(quad, img.width, img.height, ann.inset)
        if not inside.any():
            raise DataError(f"{ann.image_id}: patch {quad.tolist()} covers no pixel after inset")
        if mask.flags[inside].any():
            out.append(None)
        else:
            out.append(img.data[inside].mean(axis=0))
    return out


def extract_ground_truth(img: LinearImage, ann: PatchAnnotation,
                         mask: SaturationMask | None = None,
                         allow_unsubtracted: bool = False) -> Illuminant:
    """Illuminant from the achromatic patches of a black-subtracted image.

    Patches containing any clipped pixel are discarded whole; the result
    is the normalized equal-weight mean of the surviving patch means.
    """
    if not img.black_subtracted and not allow_unsubtracted:
        raise PreprocessingError(
            f"{ann.image_id}: ground truth must be extracted after black-level "
            "subtraction; run subtract_black() first"
        )
    means = [m for m in patch_means(img, ann, mask) if m is not None]
    if not means:
        raise DataError(f"{ann.image_id}: no usable achromatic patch (all clipped)")
    return Illuminant(np.mean(means, axis=0))


@dataclass(frozen=True)
class GroundTruthRecord:
    illuminant: Illuminant
    camera_id: str


@dataclass
class GroundTruthTable:
    """Ordered map image_id -> (illuminant, camera_id)."""

    records: dict[str, GroundTruthRecord] = field(default_factory=dict)

    @classmethod
    def from_items(cls, items) -> GroundTruthTable:
        table = cls()
        for image_id, rgb, camera_id in items:
            table.add(image_id, rgb, camera_id)
        return table

    def add(self, image_id: str, rgb, camera_id: str = "unknown") -> None:
        if image_id in self.records:
            raise DataError(f"duplicate image_id {image_id!r}")
        e = rgb if isinstance(rgb, Illuminant) else Illuminant(rgb)
        self.records[image_id] = GroundTruthRecord(e, camera_id)

    def __len__(self):
        return len(self.records)

    def __contains__(self, image_id):
        return image_id in self.records

    def __getitem__(self, image_id) -> GroundTruthRecord:
        return self.records[image_id]

    @property
    def ids(self) -> list[str]:
        return list(self.records)

    def illuminants(self) -> dict[str, Illuminant]:
        return {k: r.illuminant for k, r in self.records.items()}

    def cameras(self) -> dict[str, str]:
        return {k: r.camera_id for k, r in self.records.items()}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["image_id", "R", "G", "B", "camera_id"])
            for image_id, r in self.records.items():
                w.writerow([image_id, *(repr(v) for v in r.illuminant), r.camera_id])

    @classmethod
    def from_csv(cls, path) -> GroundTruthTable:
        """Load a table; unnormalized RGB triples are normalized on load."""
        table = cls()
        with open(path, newline="") as f:
            reader = csv.DictReader(f)
            need = {"image_id", "R", "G", "B"}
            if reader.fieldnames is None or not need <= set(reader.fieldnames):
                raise DataError(f"{path}: expected header image_id,R,G,B,camera_id")
            for row in reader:
                try:
                    rgb = [float(row[c]) for c in "RGB"]
                except (TypeError, ValueError):
                    raise DataError(f"{path}: bad RGB for {row.get('image_id')!r}") from None
                table.add(row["image_id"], rgb, row.get("camera_id") or "unknown")
        return table


@dataclass
class GroundTruthDiff:
    per_image_angle: dict[str, float]
    stats: ErrorStats
    p75: float

    @property
    def max(self) -> float:
        return self.stats.max

    def to_dict(self) -> dict:
        return {"per_image_angle": dict(self.per_image_angle),
                "stats": self.stats.as_dict(),
                "p75": self.p75,
                "max": self.max,
                "n_images": len(self.per_image_angle)}


def diff_ground_truths(a: GroundTruthTable, b: GroundTruthTable) -> GroundTruthDiff:
    """Per-image angular difference between two ground-truth versions."""
    shared = [k for k in a.ids if k in b]
    if not shared:
        raise DataError("ground-truth tables share no image ids")
    angles = {k: angular_error(a[k].illuminant, b[k].illuminant) for k in shared}
    values = list(angles.values())
    return GroundTruthDiff(angles, compute_stats(values),
                           float(np.quantile(values, 0.75, method="linear")))
