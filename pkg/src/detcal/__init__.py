"""detcal: evaluation and confidence recalibration for object detection.

Matches predicted boxes to ground truth, computes precision/recall/F1 and
Expected Calibration Error, and fits a dependent logistic calibration map (a
multivariate Gaussian log-likelihood ratio over confidence and box-center
features) that rewrites detection confidences.
"""

from .annotations import (
    DatasetManifest,
    Detection,
    GroundTruth,
    ManifestEntry,
    SplitSpec,
    load_manifest,
    load_model,
    parse_detections,
    parse_ground_truth,
    save_manifest,
    save_model,
    split_records,
)
from .calibration import (
    FeatureSpec,
    GaussianLrModel,
    LabeledSample,
    calibrate,
    calibrate_detections,
    extract_features,
    fit,
    log_likelihood_ratio,
)
from .calibration_error import (
    BinStatistics,
    bin_outcomes,
    expected_calibration_error,
    reliability_rows,
)
from .errors import (
    DataError,
    DetcalError,
    GeometryError,
    InsufficientDataError,
    NumericError,
    ParseError,
    UsageError,
    ValidationError,
)
from .geometry import Box, CornerBox, flip_horizontal, from_corners, iou, to_corners
from .matching import (
    MatchOutcome,
    MatchSummary,
    aggregate,
    f1,
    match_scene,
    precision,
    recall,
)

__version__ = "0.1.0"
