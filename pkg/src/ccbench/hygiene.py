"""Dataset-hygiene checks for color-constancy benchmarks.

Every check returns ``Finding`` objects keyed by an id from ``CHECKS``:

* ``black_level_presence``  pedestal still present in an image
* ``pipeline_identity``     two estimate sets that should differ are the same
* ``pipeline_provenance``   which ground-truth version an estimate set matches
* ``camera_split``          ground truth from several sensors lies on separate lines
* ``fold_camera_coverage``  a camera present in only one cross-validation fold
* ``fold_centroid_spread``  folds with different illuminant distributions
* ``uniform_illumination``  achromatic regions of one image disagree in color
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import DataError
from .evaluation import angular_error
from .groundtruth import GroundTruthTable, quad_pixels
from .imaging import LinearImage, rb_chromaticity, saturation_mask

CHECKS = {
    "black_level_presence": "black level appears not to be subtracted",
    "pipeline_identity": "estimates identical across allegedly different pipelines",
    "pipeline_provenance": "ground-truth version an estimate set agrees with",
    "camera_split": "ground truth forms one rb-line per camera",
    "fold_camera_coverage": "camera confined to a single fold",
    "fold_centroid_spread": "illuminant distribution differs between folds",
    "uniform_illumination": "achromatic regions lit by different illuminants",
}
SEVERITIES = ("info", "warn", "fail")

DEFAULT_PEDESTAL_THRESHOLD = 0.01
DEFAULT_IDENTITY_ANGLE = 0.01
DEFAULT_IDENTITY_FRACTION = 0.99
DEFAULT_SPLIT_FACTOR = 3.0
DEFAULT_CENTROID_THRESHOLD = 0.02
DEFAULT_UNIFORMITY_THRESHOLD = 1.0


@dataclass(frozen=True)
class Finding:
    check_id: str
    severity: str
    message: str
    evidence: dict = field(default_factory=dict)
    image_id: str | None = None

    def __post_init__(self):
        if self.check_id not in CHECKS:
            raise DataError(f"unregistered check id {self.check_id!r}")
        if self.severity not in SEVERITIES:
            raise DataError(f"bad severity {self.severity!r}")

    def to_dict(self) -> dict:
        d = {"check_id": self.check_id, "severity": self.severity,
             "message": self.message, "evidence": self.evidence}
        if self.image_id is not None:
            d["image_id"] = self.image_id
        return d


@dataclass
class HygieneReport:
    findings: list[Finding] = field(default_factory=list)

    def extend(self, findings) -> None:
        if isinstance(findings, Finding):
            findings = [findings]
        self.findings.extend(findings)

    def sorted(self) -> list[Finding]:
        # stable: ties keep insertion order
        return sorted(self.findings, key=lambda f: (f.check_id, f.image_id or ""))

    def worst(self) -> str:
        if not self.findings:
            return "info"
        return max((f.severity for f in self.findings), key=SEVERITIES.index)

    def failed(self, fail_on: str = "fail") -> bool:
        level = SEVERITIES.index(fail_on)
        return any(SEVERITIES.index(f.severity) >= level for f in self.findings)

    def to_dict(self) -> dict:
        return {"findings": [f.to_dict() for f in self.sorted()]}


# -- black level presence -----------------------------------------------------


def detect_unsubtracted_black(img: LinearImage, threshold: float = DEFAULT_PEDESTAL_THRESHOLD,
                              image_id: str | None = None) -> Finding:
    """Flag an image whose darkest pixels sit on a pedestal.

    A real scene nearly always has some near-black pixels; if the 0.1th
    percentile of every channel stays above ``threshold`` of saturation the
    black level was most likely never removed.
    """
    floor = np.percentile(img.data.reshape(-1, 3), 0.1, axis=0)
    ratio = floor / img.saturation_level
    evidence = {"floor": floor.tolist(), "floor_fraction": ratio.tolist(),
                "threshold": threshold, "black_subtracted_flag": img.black_subtracted}
    if ratio.min() > threshold:
        return Finding("black_level_presence", "warn",
                       f"darkest pixels sit at >= {100 * ratio.min():.2f}% of saturation; "
                       "black level is probably not subtracted", evidence, image_id)
    return Finding("black_level_presence", "info", "no black-level pedestal detected",
                   evidence, image_id)


# -- pipeline forensics -------------------------------------------------------


def _median(values) -> float:
    return float(np.quantile(np.asarray(values, dtype=np.float64), 0.5, method="linear"))


def pipeline_forensics(run_a: dict, run_b: dict, gt_sub: GroundTruthTable,
                       gt_unsub: GroundTruthTable,
                       identity_angle: float = DEFAULT_IDENTITY_ANGLE,
                       identity_fraction: float = DEFAULT_IDENTITY_FRACTION,
                       names=("run_a", "run_b")) -> list[Finding]:
    """Compare two estimate sets that claim to come from different pipelines.

    Emits one ``pipeline_identity`` finding (fail when the two sets agree
    within ``identity_angle`` on at least ``identity_fraction`` of images)
    and one ``pipeline_provenance`` finding per set saying which ground
    truth it scores better against, with the median-error gap.
    """
    shared = [k for k in run_a if k in run_b and k in gt_sub and k in gt_unsub]
    if not shared:
        raise DataError("estimate sets and ground truths share no image ids")
    findings = []
    diffs = [angular_error(run_a[k], run_b[k]) for k in shared]
    same = float(np.mean(np.asarray(diffs) < identity_angle))
    evidence = {"n_images": len(shared), "fraction_identical": same,
                "median_difference": _median(diffs), "identity_angle": identity_angle}
    if same >= identity_fraction:
        findings.append(Finding("pipeline_identity", "fail",
                                f"identical estimates across pipelines: {names[0]} and "
                                f"{names[1]} agree within {identity_angle} deg on "
                                f"{100 * same:.1f}% of images", evidence))
    else:
        findings.append(Finding("pipeline_identity", "info",
                                f"{names[0]} and {names[1]} differ", evidence))

    sub_t, unsub_t = gt_sub.illuminants(), gt_unsub.illuminants()
    for name, run in zip(names, (run_a, run_b)):
        med_sub = _median([angular_error(run[k], sub_t[k]) for k in shared])
        med_unsub = _median([angular_error(run[k], unsub_t[k]) for k in shared])
        gap = med_sub - med_unsub
        closer = "gt_unsub" if gap > 0 else "gt_sub"
        ev = {"run": name, "median_vs_gt_sub": med_sub, "median_vs_gt_unsub": med_unsub,
              "gap": gap, "closer_to": closer}
        if closer == "gt_unsub":
            findings.append(Finding("pipeline_provenance", "warn",
                                    f"{name} is closer to gt_unsub by {gap:.3f} deg median: "
                                    "its estimates look computed without black-level "
                                    "subtraction", ev))
        else:
            findings.append(Finding("pipeline_provenance", "info",
                                    f"{name} is closer to gt_sub by {-gap:.3f} deg median", ev))
    return findings


# -- multiple sensors ---------------------------------------------------------


@dataclass
class LineFit:
    point: np.ndarray
    direction: np.ndarray
    rms_residual: float

    def distances(self, pts) -> np.ndarray:
        d = np.asarray(pts, dtype=np.float64) - self.point
        normal = np.array([-self.direction[1], self.direction[0]])
        return np.abs(d @ normal)


def fit_line_tls(points) -> LineFit:
    """Orthogonal-regression line through 2-D points."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise DataError("line fit needs at least two 2-D points")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    _, vecs = np.linalg.eigh(centered.T @ centered)
    direction = vecs[:, -1]
    # fix the sign so the fit does not depend on point order
    if direction[0] < 0 or (direction[0] == 0 and direction[1] < 0):
        direction = -direction
    normal = np.array([-direction[1], direction[0]])
    rms = float(np.sqrt(np.mean((centered @ normal) ** 2)))
    return LineFit(centroid, direction, rms)


@dataclass
class CameraSplitReport:
    points: dict[str, np.ndarray]
    lines: dict[str, LineFit]
    separations: dict[tuple[str, str], float]
    finding: Finding

    @property
    def residuals(self) -> dict[str, float]:
        return {k: v.rms_residual for k, v in self.lines.items()}

    @property
    def cross_separation(self) -> float:
        return max(self.separations.values(), default=0.0)


def camera_split_analysis(gt: GroundTruthTable,
                          factor: float = DEFAULT_SPLIT_FACTOR) -> CameraSplitReport:
    """Fit one rb-chromaticity line per camera and measure how far apart they are.

    The cross separation of two cameras is the average of (mean distance of
    A's points to B's line) and (mean distance of B's points to A's line).
    Warns when it exceeds ``factor`` times the largest within-camera RMS
    residual, this artifact's criterion for a two-line signature.
    """
    groups: dict[str, list] = {}
    for image_id, rec in gt.records.items():
        groups.setdefault(rec.camera_id, []).append(rb_chromaticity(rec.illuminant))
    points = {k: np.array(v) for k, v in groups.items()}
    small = [k for k, v in points.items() if len(v) < 2]
    if small:
        raise DataError(f"camera groups with fewer than 2 images: {small}")
    lines = {k: fit_line_tls(v) for k, v in points.items()}
    seps = {}
    for a, b in combinations(sorted(points), 2):
        seps[(a, b)] = 0.5 * (float(lines[b].distances(points[a]).mean())
                              + float(lines[a].distances(points[b]).mean()))
    max_resid = max(l.rms_residual for l in lines.values())
    cross = max(seps.values(), default=0.0)
    evidence = {
        "counts": {k: len(v) for k, v in points.items()},
        "rms_residual": {k: l.rms_residual for k, l in lines.items()},
        "cross_separation": {f"{a}|{b}": s for (a, b), s in seps.items()},
        "factor": factor,
        "criterion": "cross separation > factor x max within-camera RMS residual "
                     "(artifact-defined two-line rule)",
    }
    if len(points) > 1 and cross > factor * max_resid:
        finding = Finding("camera_split", "warn",
                          f"ground truth splits into {len(points)} camera lines: separation "
                          f"{cross:.5f} > {factor:g} x residual {max_resid:.5f}; results mix "
                          "sensors with different illuminant distributions", evidence)
    else:
        finding = Finding("camera_split", "info",
                          f"{len(points)} camera group(s); no distinct per-camera lines",
                          evidence)
    return CameraSplitReport(points, lines, seps, finding)


# -- folds ----------------------------------------------------------------------

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 generator, bit-exact with the reference C version.

    ``next()``::

        state = (state + 0x9E3779B97F4A7C15) mod 2^64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) mod 2^64
        return z ^ (z >> 31)
    """

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        """Unbiased integer in [0, bound): reject draws under 2^64 mod bound."""
        threshold = (1 << 64) % bound
        while True:
            r = self.next()
            if r >= threshold:
                return r % bound


def seeded_permutation(items, seed: int) -> list:
    """Fisher-Yates: for i = n-1 down to 1, swap items[i] and items[below(i+1)]."""
    out = list(items)
    rng = SplitMix64(seed)
    for i in range(len(out) - 1, 0, -1):
        j = rng.below(i + 1)
        out[i], out[j] = out[j], out[i]
    return out


def _contiguous(ids, k):
    base, extra = divmod(len(ids), k)
    folds, start = [], 0
    for i in range(k):
        size = base + (i < extra)
        folds.append(list(ids[start:start + size]))
        start += size
    return folds


@dataclass
class FoldSpec:
    folds: list[list[str]]
    shuffle_mode: str = "none"
    seed: int | None = None
    source: str | None = None

    @property
    def k(self) -> int:
        return len(self.folds)

    def validate(self, ids=None) -> None:
        seen = set()
        for fold in self.folds:
            for i in fold:
                if i in seen:
                    raise DataError(f"id {i!r} appears in more than one fold")
                seen.add(i)
        if ids is not None and seen != set(ids):
            missing = sorted(set(ids) - seen)[:5]
            extra = sorted(seen - set(ids))[:5]
            raise DataError(f"folds do not cover the dataset (missing {missing}, unknown {extra})")
        if self.shuffle_mode in ("none", "seeded") and self.folds:
            sizes = [len(f) for f in self.folds]
            if max(sizes) - min(sizes) > 1:
                raise DataError("fold sizes differ by more than one")

    def to_dict(self) -> dict:
        d = {"k": self.k, "mode": self.shuffle_mode, "seed": self.seed, "folds": self.folds}
        if self.source is not None:
            d["source"] = self.source
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def fold_of(self) -> dict[str, int]:
        return {i: n for n, fold in enumerate(self.folds) for i in fold}


def load_fold_file(path, ids=None) -> FoldSpec:
    with open(path) as f:
        d = json.load(f)
    folds = [[str(i) for i in fold] for fold in d["folds"]]
    if "k" in d and d["k"] != len(folds):
        raise DataError(f"{path}: k={d['k']} but {len(folds)} folds listed")
    spec = FoldSpec(folds, "external", d.get("seed"), str(path))
    spec.validate(ids)
    return spec


def make_folds(ids, k: int = 3, mode: str = "none", seed: int | None = None,
               source=None) -> FoldSpec:
    """Split ids into k folds.

    ``none`` keeps input order, ``seeded`` shuffles with SplitMix64-driven
    Fisher-Yates first, ``external`` loads and validates a fold file.
    Contiguous splits put the extra ids in the leading folds.
    """
    ids = [str(i) for i in ids]
    if len(set(ids)) != len(ids):
        raise DataError("ids must be unique")
    if mode == "external":
        if source is None:
            raise DataError("external folds need a source file")
        spec = load_fold_file(source, ids)
        if spec.k != k:
            raise DataError(f"fold file has {spec.k} folds, expected {k}")
        return spec
    if not 2 <= k <= len(ids):
        raise DataError(f"need 2 <= k <= {len(ids)}, got k={k}")
    if mode == "none":
        spec = FoldSpec(_contiguous(ids, k), "none")
    elif mode == "seeded":
        if seed is None:
            raise DataError("seeded folds need a seed")
        spec = FoldSpec(_contiguous(seeded_permutation(ids, seed), k), "seeded", int(seed))
    else:
        raise DataError(f"unknown fold mode {mode!r}")
    spec.validate(ids)
    return spec


def audit_folds(spec: FoldSpec, gt: GroundTruthTable,
                centroid_threshold: float = DEFAULT_CENTROID_THRESHOLD) -> list[Finding]:
    """Check camera composition and rb-centroid spread across folds."""
    unknown = [i for fold in spec.folds for i in fold if i not in gt]
    if unknown:
        raise DataError(f"fold ids missing from ground truth: {unknown[:5]}")
    spec.validate()
    composition = []
    centroids = []
    for fold in spec.folds:
        counts: dict[str, int] = {}
        for i in fold:
            counts[gt[i].camera_id] = counts.get(gt[i].camera_id, 0) + 1
        composition.append(dict(sorted(counts.items())))
        centroids.append(np.mean([rb_chromaticity(gt[i].illuminant) for i in fold], axis=0))

    findings = []
    cameras = sorted({c for comp in composition for c in comp})
    for cam in cameras:
        where = [n + 1 for n, comp in enumerate(composition) if cam in comp]
        if len(where) == 1 and spec.k > 1:
            findings.append(Finding(
                "fold_camera_coverage", "warn",
                f"camera {cam} present only in fold {where[0]}",
                {"camera_id": cam, "folds": where, "composition": composition}))
    if not any(f.check_id == "fold_camera_coverage" for f in findings):
        findings.append(Finding("fold_camera_coverage", "info",
                                "every camera appears in more than one fold",
                                {"composition": composition}))

    dist = max((float(np.linalg.norm(a - b)) for a, b in combinations(centroids, 2)),
               default=0.0)
    ev = {"centroids": [c.tolist() for c in centroids], "max_distance": dist,
          "threshold": centroid_threshold}
    if dist > centroid_threshold:
        findings.append(Finding("fold_centroid_spread", "warn",
                                f"fold rb-centroids differ by up to {dist:.4f} "
                                f"(> {centroid_threshold})", ev))
    else:
        findings.append(Finding("fold_centroid_spread", "info",
                                f"fold rb-centroids within {dist:.4f}", ev))
    return findings


# -- uniform illumination -------------------------------------------------------


@dataclass
class UniformityReport:
    labels: list[str]
    means: np.ndarray
    angles: np.ndarray
    findings: list[Finding]

    @property
    def max_angle(self) -> float:
        return float(self.angles.max())


def uniform_illumination_check(img: LinearImage, regions: dict,
                               threshold: float = DEFAULT_UNIFORMITY_THRESHOLD,
                               margin: float = 0.02, image_id: str | None = None
                               ) -> UniformityReport:
    """Pairwise angles between regions assumed to be achromatic.

    One warn finding per pair above ``threshold`` degrees, or a single
    info finding when all pairs agree.
    """
    if not img.black_subtracted:
        raise DataError("uniform-illumination check needs a black-subtracted image")
    if len(regions) < 2:
        raise DataError("need at least two regions")
    mask = saturation_mask(img, margin)
    labels = list(regions)
    means = []
    for label in labels:
        inside = quad_pixels(regions[label], img.width, img.height)
        if not inside.any():
            raise DataError(f"region {label!r} covers no pixel")
        if mask.flags[inside].any():
            raise DataError(f"region {label!r} contains clipped pixels")
        means.append(img.data[inside].mean(axis=0))
    n = len(labels)
    angles = np.zeros((n, n))
    for i, j in combinations(range(n), 2):
        angles[i, j] = angles[j, i] = angular_error(means[i], means[j])
    findings = []
    for i, j in combinations(range(n), 2):
        if angles[i, j] > threshold:
            findings.append(Finding(
                "uniform_illumination", "warn",
                f"regions {labels[i]!r} and {labels[j]!r} differ by {angles[i, j]:.2f} deg "
                f"(> {threshold:g}); uniform illumination assumption violated",
                {"pair": [labels[i], labels[j]], "angle": float(angles[i, j]),
                 "threshold": threshold}, image_id))
    if not findings:
        findings.append(Finding("uniform_illumination", "info",
                                f"all regions within {angles.max():.2f} deg",
                                {"max_angle": float(angles.max()), "threshold": threshold},
                                image_id))
    return UniformityReport(labels, np.array(means), angles, findings)
