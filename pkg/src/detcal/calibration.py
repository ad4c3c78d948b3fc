"""Dependent logistic calibration: sigmoid of a Gaussian log-likelihood ratio.

The calibration map is fitted in closed form. Correct and incorrect
detections each get a mean vector and a full covariance matrix over the
chosen features (by default confidence, center-x, center-y), so correlations
between confidence and box position are modeled rather than ignored. The
recalibrated confidence of a detection with feature vector s is

    g(s) = sigmoid( 1/2 [ (s-mu_-)' Sigma_-^-1 (s-mu_-)
                        - (s-mu_+)' Sigma_+^-1 (s-mu_+) ] + c )

with c = 1/2 (log det Sigma_- - log det Sigma_+), i.e. the exact log-ratio of
the two Gaussian densities. An optional prior term log(N+/N-) can be added at
fit time for class-imbalanced calibration sets; it is stored separately so c
keeps its determinant-only definition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .annotations import Detection
from .errors import InsufficientDataError, NumericError, ValidationError

__all__ = [
    "FeatureSpec",
    "LabeledSample",
    "GaussianLrModel",
    "extract_features",
    "fit",
    "log_likelihood_ratio",
    "calibrate",
    "calibrate_detections",
    "DEFAULT_LAMBDA",
    "DEFAULT_EPSILON",
]

DEFAULT_LAMBDA = 1e-6
DEFAULT_EPSILON = 1e-6

_FEATURE_ORDER = ("confidence", "cx", "cy", "w", "h")


@dataclass(frozen=True)
class FeatureSpec:
    """Selects which detection attributes feed the calibration map."""

    use_confidence: bool = True
    use_center_x: bool = True
    use_center_y: bool = True
    use_width: bool = False
    use_height: bool = False
    confidence_transform: str = "raw"  # "raw" | "logit"

    def __post_init__(self):
        if self.confidence_transform not in ("raw", "logit"):
            raise ValidationError(
                f"unknown confidence_transform {self.confidence_transform!r}"
            )
        if self.dimension == 0:
            raise ValidationError("feature spec enables no features")

    @property
    def flags(self) -> tuple[bool, ...]:
        return (
            self.use_confidence,
            self.use_center_x,
            self.use_center_y,
            self.use_width,
            self.use_height,
        )

    @property
    def names(self) -> list[str]:
        return [n for n, used in zip(_FEATURE_ORDER, self.flags) if used]

    @property
    def dimension(self) -> int:
        return sum(self.flags)

    @classmethod
    def from_names(cls, names, confidence_transform="raw"):
        unknown = set(names) - set(_FEATURE_ORDER)
        if unknown:
            raise ValidationError(f"unknown feature names: {sorted(unknown)}")
        return cls(
            use_confidence="confidence" in names,
            use_center_x="cx" in names,
            use_center_y="cy" in names,
            use_width="w" in names,
            use_height="h" in names,
            confidence_transform=confidence_transform,
        )


@dataclass(frozen=True)
class LabeledSample:
    features: np.ndarray
    correct: bool


@dataclass
class GaussianLrModel:
    """Fitted calibration map; immutable in practice, safe to share."""

    spec: FeatureSpec
    mu_plus: np.ndarray
    mu_minus: np.ndarray
    sigma_plus: np.ndarray
    sigma_minus: np.ndarray
    c: float
    lambda_reg: float = DEFAULT_LAMBDA
    epsilon_clamp: float = DEFAULT_EPSILON
    prior_log_odds: float = 0.0
    _inv_plus: np.ndarray = field(default=None, repr=False, compare=False)
    _inv_minus: np.ndarray = field(default=None, repr=False, compare=False)

    def _inverses(self):
        if self._inv_plus is None:
            self._inv_plus = np.linalg.inv(self.sigma_plus)
            self._inv_minus = np.linalg.inv(self.sigma_minus)
        return self._inv_plus, self._inv_minus


def extract_features(d: Detection, spec: FeatureSpec, epsilon=DEFAULT_EPSILON) -> np.ndarray:
    """Project a detection onto the enabled features, in fixed order."""
    conf = d.confidence
    if spec.confidence_transform == "logit":
        conf = min(max(conf, epsilon), 1.0 - epsilon)
        conf = math.log(conf / (1.0 - conf))
    values = (conf, d.box.cx, d.box.cy, d.box.w, d.box.h)
    return np.array([v for v, used in zip(values, spec.flags) if used])


def _class_stats(x, lambda_reg):
    mu = x.mean(axis=0)
    sigma = np.cov(x, rowvar=False, ddof=1).reshape(x.shape[1], x.shape[1])
    sigma = sigma + lambda_reg * np.eye(x.shape[1])
    try:
        np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise NumericError(
            "class covariance is not positive definite after regularization"
        ) from None
    sign, logdet = np.linalg.slogdet(sigma)
    if sign <= 0:
        raise NumericError("class covariance has non-positive determinant")
    return mu, sigma, logdet


def fit(
    samples,
    lambda_reg=DEFAULT_LAMBDA,
    spec: FeatureSpec | None = None,
    with_prior_term=False,
    epsilon_clamp=DEFAULT_EPSILON,
) -> GaussianLrModel:
    """Fit class means/covariances and the log-volume offset from labeled samples.

    Requires at least d+1 samples per class so the (n-1)-denominator
    covariances are full rank before regularization kicks in.
    """
    spec = spec or FeatureSpec()
    d = spec.dimension
    x = np.asarray([np.asarray(s.features, dtype=float) for s in samples])
    if x.ndim != 2 or (x.size and x.shape[1] != d):
        raise ValidationError(f"samples must have dimension {d}")
    labels = np.asarray([bool(s.correct) for s in samples])

    x_plus = x[labels]
    x_minus = x[~labels]
    for name, cls in (("correct", x_plus), ("incorrect", x_minus)):
        if cls.shape[0] < d + 1:
            raise InsufficientDataError(
                f"need at least {d + 1} {name} samples to fit, got {cls.shape[0]}"
            )

    mu_plus, sigma_plus, logdet_plus = _class_stats(x_plus, lambda_reg)
    mu_minus, sigma_minus, logdet_minus = _class_stats(x_minus, lambda_reg)
    c = 0.5 * (logdet_minus - logdet_plus)
    prior = math.log(x_plus.shape[0] / x_minus.shape[0]) if with_prior_term else 0.0

    return GaussianLrModel(
        spec=spec,
        mu_plus=mu_plus,
        mu_minus=mu_minus,
        sigma_plus=sigma_plus,
        sigma_minus=sigma_minus,
        c=float(c),
        lambda_reg=lambda_reg,
        epsilon_clamp=epsilon_clamp,
        prior_log_odds=prior,
    )


def log_likelihood_ratio(m: GaussianLrModel, s) -> float | np.ndarray:
    """Quadratic log-likelihood ratio; accepts one vector or an (n, d) batch."""
    s = np.asarray(s, dtype=float)
    single = s.ndim == 1
    pts = s[None, :] if single else s
    if pts.shape[-1] != m.spec.dimension:
        raise ValidationError(
            f"feature dimension {pts.shape[-1]} does not match model dimension {m.spec.dimension}"
        )
    inv_plus, inv_minus = m._inverses()
    dp = pts - m.mu_plus
    dm = pts - m.mu_minus
    q_plus = np.einsum("ij,jk,ik->i", dp, inv_plus, dp)
    q_minus = np.einsum("ij,jk,ik->i", dm, inv_minus, dm)
    lr = 0.5 * (q_minus - q_plus) + m.c + m.prior_log_odds
    return float(lr[0]) if single else lr


def calibrate(m: GaussianLrModel, s) -> float | np.ndarray:
    """Sigmoid of the log-likelihood ratio, clamped strictly inside (0, 1)."""
    g = expit(log_likelihood_ratio(m, s))
    g = np.clip(g, 1e-308, 1.0 - 1e-16)
    return float(g) if np.ndim(g) == 0 else g


def calibrate_detections(m: GaussianLrModel, detections) -> list[Detection]:
    """Replace each detection's confidence by the calibrated score."""
    out = []
    for d in detections:
        g = calibrate(m, extract_features(d, m.spec, m.epsilon_clamp))
        out.append(Detection(d.class_id, float(g), d.box))
    return out
