"""Angular error, error statistics and evaluation runs."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DataError, MixedGroundTruthError
from .estimators import Illuminant

PIPELINES = ("subtracted", "unsubtracted")

METHODOLOGY_WARNING = (
    "estimates were computed on images WITHOUT black-level subtraction; "
    "errors against a ground truth extracted from subtracted images measure "
    "the pipeline mismatch, not the method"
)


def angular_error(a, b) -> float:
    """Angle in degrees between two RGB directions.

    Computed as ``atan2(|a x b|, a . b)``, which equals the clamped arccos
    of the normalized dot product but stays accurate near 0 degrees.
    """
    u = np.asarray(a, dtype=np.float64).reshape(3)
    v = np.asarray(b, dtype=np.float64).reshape(3)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise DataError("angular error is undefined for a zero vector")
    u, v = u / nu, v / nv
    return math.degrees(math.atan2(np.linalg.norm(np.cross(u, v)), float(np.dot(u, v))))


@dataclass(frozen=True)
class ErrorStats:
    mean: float
    median: float
    trimean: float
    best25_mean: float
    worst25_mean: float
    max: float

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> ErrorStats:
        return cls(**{k: float(d[k]) for k in cls.__dataclass_fields__})


def quartiles(values) -> tuple[float, float, float]:
    """Q1, median, Q3 by linear interpolation at positions (n-1)q."""
    q1, q2, q3 = np.quantile(np.asarray(values, dtype=np.float64), [0.25, 0.5, 0.75],
                             method="linear")
    return float(q1), float(q2), float(q3)


def compute_stats(errors) -> ErrorStats:
    """Summary statistics used in color-constancy tables.

    Best/worst 25% are the means of the lowest/highest ``ceil(n/4)`` errors.
    """
    x = np.sort(np.asarray(list(errors), dtype=np.float64))
    if x.size == 0:
        raise DataError("cannot summarize an empty error set")
    q1, q2, q3 = quartiles(x)
    k = math.ceil(x.size / 4)
    return ErrorStats(
        mean=float(x.mean()),
        median=q2,
        trimean=(q1 + 2 * q2 + q3) / 4,
        best25_mean=float(x[:k].mean()),
        worst25_mean=float(x[-k:].mean()),
        max=float(x[-1]),
    )


@dataclass
class EvaluationRun:
    estimator: str
    pipeline: str
    per_image_error: dict[str, float]
    stats: ErrorStats
    ground_truth_id: str
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.pipeline not in PIPELINES:
            raise DataError(f"pipeline must be one of {PIPELINES}, got {self.pipeline!r}")

    @property
    def methodology_warning(self) -> str | None:
        return METHODOLOGY_WARNING if self.pipeline == "unsubtracted" else None

    def to_dict(self) -> dict:
        d = {
            "estimator": self.estimator,
            "pipeline": self.pipeline,
            "ground_truth_id": self.ground_truth_id,
            "per_image_error": dict(self.per_image_error),
            "stats": self.stats.as_dict(),
            "n_images": len(self.per_image_error),
        }
        if self.methodology_warning:
            d["methodology_warning"] = self.methodology_warning
        if self.config:
            d["config"] = self.config
        return d

    @classmethod
    def from_dict(cls, d) -> EvaluationRun:
        return cls(
            estimator=d["estimator"],
            pipeline=d["pipeline"],
            per_image_error={k: float(v) for k, v in d["per_image_error"].items()},
            stats=ErrorStats.from_dict(d["stats"]),
            ground_truth_id=d["ground_truth_id"],
            config=d.get("config", {}),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def evaluate(estimates: dict, gt, estimator: str = "unknown",
             pipeline: str = "subtracted", ground_truth_id: str = "unknown") -> EvaluationRun:
    """Score ``estimates`` (image_id -> RGB) against a ground-truth table.

    Only ids present in both are scored; order follows ``estimates``.
    """
    truth = gt.illuminants() if hasattr(gt, "illuminants") else gt
    shared = [k for k in estimates if k in truth]
    if not shared:
        raise DataError("estimates and ground truth share no image ids")
    errs = {k: angular_error(estimates[k], truth[k]) for k in shared}
    if pipeline == "unsubtracted":
        warnings.warn(METHODOLOGY_WARNING, stacklevel=2)
    return EvaluationRun(estimator, pipeline, errs, compute_stats(errs.values()),
                         ground_truth_id)


def tabulate_runs(runs, force_mixed: bool = False) -> list[dict]:
    """One summary row per run.

    Runs scored against different ground truths are not comparable, so
    mixing them is refused unless ``force_mixed`` is set.
    """
    runs = list(runs)
    ids = sorted({r.ground_truth_id for r in runs})
    if len(ids) > 1 and not force_mixed:
        raise MixedGroundTruthError(
            f"runs use different ground truths {ids}; pass force_mixed to tabulate anyway"
        )
    rows = []
    for r in runs:
        row = {"estimator": r.estimator, "pipeline": r.pipeline,
               "ground_truth_id": r.ground_truth_id, "n_images": len(r.per_image_error)}
        row.update(r.stats.as_dict())
        rows.append(row)
    return rows


def write_table_csv(rows, path) -> None:
    if not rows:
        raise DataError("nothing to tabulate")
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def read_estimates_csv(path) -> dict[str, Illuminant]:
    """Read an ``image_id,R,G,B`` CSV."""
    out = {}
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or not {"image_id", "R", "G", "B"} <= set(reader.fieldnames):
            raise DataError(f"{path}: expected header image_id,R,G,B")
        for row in reader:
            image_id = row["image_id"]
            if image_id in out:
                raise DataError(f"{path}: duplicate image_id {image_id!r}")
            out[image_id] = Illuminant([float(row[c]) for c in "RGB"])
    return out


def write_estimates_csv(estimates: dict, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["image_id", "R", "G", "B"])
        for image_id, e in estimates.items():
            w.writerow([image_id, *(repr(float(v)) for v in np.asarray(e))])


def oracle_mismatch_experiment(dataset, black_level, margin: float = 0.02
                               ) -> tuple[EvaluationRun, EvaluationRun]:
    """Score a perfect oracle under the wrong and the right methodology.

    Every image of a synthetic dataset is rendered with ``black_level``
    injected. Ground truth is extracted twice with the same clip mask: from
    the black-subtracted image (``gt_sub``) and from the raw image
    (``gt_unsub``). The right run scores ``gt_sub`` against itself; the
    wrong run scores an oracle that is perfect on raw images, i.e.
    ``gt_unsub``, against ``gt_sub``. Returns ``(wrong_run, right_run)``.
    """
    from .groundtruth import extract_ground_truth, patch_means
    from .imaging import saturation_mask, subtract_black

    gt_sub, gt_unsub = {}, {}
    darkest = math.inf
    for item in dataset.items:
        raw, _ = dataset.render_item(item, inject_black=True, black_level=black_level)
        sub = subtract_black(raw)
        mask = saturation_mask(sub, margin)
        ann = item.annotation
        gt_sub[item.image_id] = extract_ground_truth(sub, ann, mask)
        gt_unsub[item.image_id] = extract_ground_truth(raw, ann, mask, allow_unsubtracted=True)
        means = [m for m in patch_means(sub, ann, mask) if m is not None]
        darkest = min(darkest, min(float(m.min()) for m in means))
    bl = float(np.max(black_level))
    if bl >= darkest:
        warnings.warn(f"black level {bl:g} reaches the darkest usable patch value "
                      f"{darkest:.1f}; wrong-run errors may not grow monotonically",
                      stacklevel=2)
    tag = f"synthetic:bl={bl:g}"
    right = evaluate(gt_sub, gt_sub, "oracle", "subtracted", tag)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        wrong = evaluate(gt_unsub, gt_sub, "oracle", "unsubtracted", tag)
    return wrong, right
