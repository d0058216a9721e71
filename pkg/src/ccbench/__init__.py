"""Color-constancy benchmark harness and dataset-hygiene linter."""

from .errors import CCBenchError, DataError, PreprocessingError
from .estimators import EstimatorSpec, Illuminant, estimate, gaussian_derivative, parse_estimator
from .evaluation import (
    ErrorStats,
    EvaluationRun,
    angular_error,
    compute_stats,
    evaluate,
    oracle_mismatch_experiment,
    tabulate_runs,
)
from .groundtruth import (
    GroundTruthTable,
    PatchAnnotation,
    diff_ground_truths,
    extract_ground_truth,
)
from .hygiene import (
    Finding,
    FoldSpec,
    HygieneReport,
    audit_folds,
    camera_split_analysis,
    detect_unsubtracted_black,
    make_folds,
    pipeline_forensics,
    uniform_illumination_check,
)
from .imaging import (
    LinearImage,
    SaturationMask,
    rb_chromaticity,
    read_ppm16,
    saturation_mask,
    subtract_black,
    write_ppm16,
)
from .synthetic import (
    CameraModel,
    SpectralScene,
    make_benchmark,
    planckian_spd,
    render,
)

__version__ = "0.1.0"
