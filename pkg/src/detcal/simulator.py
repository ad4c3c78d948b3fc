"""Synthetic detection streams with known calibration behavior.

Two generators:

* `generate_feature_stream` draws labeled feature vectors from known Gaussian
  class conditionals, providing an analytic posterior (`bayes_posterior`)
  against which a fitted calibration map can be checked.

* `generate_scenes` builds whole scenes (ground truths plus detections) whose
  confidence/correctness relationship follows a chosen link exactly: within
  narrow confidence strata, the number of correct detections is set by quota
  to the sum of link probabilities, rather than trusting geometric jitter
  alone. Correct detections are realized as jittered copies of their truth
  (IoU kept above 0.55); incorrect ones become small decoy boxes that cannot
  reach the matching threshold against any truth. `jitter_sigma == 0` is the
  degenerate perfect detector: every detection sits exactly on its truth with
  confidence 1, which satisfies every link trivially.

All generation is a pure function of the stream parameters. Seeding uses NumPy's
SeedSequence spawning so per-scene substreams are independent and identical
whether scenes are generated serially or in parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import expit

from .annotations import Detection, GroundTruth
from .calibration import LabeledSample
from .errors import ValidationError
from .geometry import Box, iou

__all__ = [
    "GaussianStreamSpec",
    "SceneStreamSpec",
    "ConfidenceLink",
    "Scene",
    "generate_feature_stream",
    "bayes_posterior",
    "generate_scenes",
    "labeled_confidences",
]

_QUOTA_STRATA = 100
_MIN_TP_IOU = 0.55  # safety margin above the default 0.5 matching threshold


@dataclass(frozen=True)
class GaussianStreamSpec:
    mu_plus: tuple[float, ...]
    mu_minus: tuple[float, ...]
    sigma_plus: tuple[tuple[float, ...], ...]
    sigma_minus: tuple[tuple[float, ...], ...]
    prior_correct: float
    n: int
    seed: int

    def __post_init__(self):
        if not (0.0 < self.prior_correct < 1.0):
            raise ValidationError("prior_correct must be strictly inside (0, 1)")
        d = len(self.mu_plus)
        for name, mat in (("sigma_plus", self.sigma_plus), ("sigma_minus", self.sigma_minus)):
            m = np.asarray(mat, dtype=float)
            if m.shape != (d, d):
                raise ValidationError(f"{name} must be {d}x{d}")
            if not np.allclose(m, m.T):
                raise ValidationError(f"{name} must be symmetric")
            if np.linalg.eigvalsh(m).min() <= 0:
                raise ValidationError(f"{name} must be positive definite")

    @property
    def dimension(self) -> int:
        return len(self.mu_plus)


def generate_feature_stream(spec: GaussianStreamSpec) -> list[LabeledSample]:
    """Draw n labeled samples: Bernoulli class, then the class's Gaussian."""
    rng = np.random.default_rng(spec.seed)
    labels = rng.random(spec.n) < spec.prior_correct
    d = spec.dimension
    chol_plus = np.linalg.cholesky(np.asarray(spec.sigma_plus, dtype=float))
    chol_minus = np.linalg.cholesky(np.asarray(spec.sigma_minus, dtype=float))
    z = rng.standard_normal((spec.n, d))
    features = np.where(
        labels[:, None],
        np.asarray(spec.mu_plus) + z @ chol_plus.T,
        np.asarray(spec.mu_minus) + z @ chol_minus.T,
    )
    return [LabeledSample(features[i], bool(labels[i])) for i in range(spec.n)]


def bayes_posterior(spec: GaussianStreamSpec, s) -> float | np.ndarray:
    """Exact P(correct | s) from the stream's true parameters and prior."""
    s = np.asarray(s, dtype=float)
    single = s.ndim == 1
    pts = s[None, :] if single else s
    if pts.shape[-1] != spec.dimension:
        raise ValidationError(
            f"feature dimension {pts.shape[-1]} does not match spec dimension {spec.dimension}"
        )
    sig_p = np.asarray(spec.sigma_plus, dtype=float)
    sig_m = np.asarray(spec.sigma_minus, dtype=float)
    dp = pts - np.asarray(spec.mu_plus)
    dm = pts - np.asarray(spec.mu_minus)
    q_plus = np.einsum("ij,jk,ik->i", dp, np.linalg.inv(sig_p), dp)
    q_minus = np.einsum("ij,jk,ik->i", dm, np.linalg.inv(sig_m), dm)
    c = 0.5 * (np.linalg.slogdet(sig_m)[1] - np.linalg.slogdet(sig_p)[1])
    lr = 0.5 * (q_minus - q_plus) + c
    post = expit(lr + math.log(spec.prior_correct / (1.0 - spec.prior_correct)))
    return float(post[0]) if single else post


# --- scene generation -------------------------------------------------------


@dataclass(frozen=True)
class ConfidenceLink:
    """Maps reported confidence c to true correctness probability.

    kinds: "identity" (P = c), "power" (P = c**gamma; gamma > 1 is an
    overconfident detector, gamma < 1 underconfident), "affine" (P = a*c + b,
    clipped to [0, 1]).
    """

    kind: str = "identity"
    gamma: float = 1.0
    a: float = 1.0
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in ("identity", "power", "affine"):
            raise ValidationError(f"unknown link kind {self.kind!r}")
        if self.kind == "power" and self.gamma <= 0:
            raise ValidationError("power link needs gamma > 0")

    @classmethod
    def parse(cls, text: str) -> "ConfidenceLink":
        """Parse "identity", "power:G" or "affine:A:B"."""
        parts = text.split(":")
        if parts[0] == "identity" and len(parts) == 1:
            return cls("identity")
        if parts[0] == "power" and len(parts) == 2:
            return cls("power", gamma=float(parts[1]))
        if parts[0] == "affine" and len(parts) == 3:
            return cls("affine", a=float(parts[1]), b=float(parts[2]))
        raise ValidationError(f"cannot parse confidence link {text!r}")

    def prob_correct(self, c):
        c = np.asarray(c, dtype=float)
        if self.kind == "identity":
            p = c
        elif self.kind == "power":
            p = c**self.gamma
        else:
            p = self.a * c + self.b
        return np.clip(p, 0.0, 1.0)

    def confidence_from_latent(self, p):
        """Invert the link so a latent correctness probability becomes a score."""
        p = np.asarray(p, dtype=float)
        if self.kind == "identity":
            c = p
        elif self.kind == "power":
            c = p ** (1.0 / self.gamma)
        else:
            c = (p - self.b) / self.a
        return np.clip(c, 1e-6, 1.0)

    def __str__(self):
        if self.kind == "identity":
            return "identity"
        if self.kind == "power":
            return f"power:{self.gamma:g}"
        return f"affine:{self.a:g}:{self.b:g}"


@dataclass(frozen=True)
class SceneStreamSpec:
    n_scenes: int
    truths_min: int = 1
    truths_max: int = 4
    jitter_sigma: float = 0.02
    link: ConfidenceLink = ConfidenceLink()
    seed: int = 0
    # Latent correctness-probability prior Beta(alpha, beta); skewed toward
    # mostly-correct detectors, which keeps the two power-link acceptance
    # profiles well separated.
    latent_alpha: float = 8.0
    latent_beta: float = 3.0

    def __post_init__(self):
        if self.jitter_sigma < 0:
            raise ValidationError("jitter_sigma must be >= 0")
        if not (1 <= self.truths_min <= self.truths_max):
            raise ValidationError("need 1 <= truths_min <= truths_max")


class Scene(NamedTuple):
    truths: list[GroundTruth]
    detections: list[Detection]


def _quota_correctness(confidences, link, rng):
    """Per-stratum quota assignment so P(correct | c) tracks link(c) exactly."""
    n = confidences.size
    correct = np.zeros(n, dtype=bool)
    strata = np.clip(np.ceil(confidences * _QUOTA_STRATA).astype(int) - 1, 0, _QUOTA_STRATA - 1)
    probs = link.prob_correct(confidences)
    for s in range(_QUOTA_STRATA):
        members = np.flatnonzero(strata == s)
        if members.size == 0:
            continue
        quota = int(round(probs[members].sum()))
        picked = rng.permutation(members)[:quota]
        correct[picked] = True
    return correct


def _jittered_true_positive(box, sigma, rng):
    """A copy of `box` with its center jittered but IoU kept above 0.55."""
    for attempt in range(12):
        scale = 0.5**attempt
        dx, dy = rng.normal(0.0, sigma * scale, 2)
        cx = min(max(box.cx + dx, 0.01), 0.99)
        cy = min(max(box.cy + dy, 0.01), 0.99)
        candidate = Box(cx, cy, box.w, box.h)
        if iou(candidate, box) >= _MIN_TP_IOU:
            return candidate
    return box


def generate_scenes(spec: SceneStreamSpec) -> list[Scene]:
    """Generate scenes whose detections realize the requested confidence link."""
    root = np.random.SeedSequence(spec.seed)
    children = root.spawn(spec.n_scenes + 1)
    master = np.random.default_rng(children[0])

    counts = master.integers(spec.truths_min, spec.truths_max + 1, spec.n_scenes)
    n_total = int(counts.sum())

    if spec.jitter_sigma == 0.0:
        confidences = np.ones(n_total)
        correct = np.ones(n_total, dtype=bool)
    else:
        latent = master.beta(spec.latent_alpha, spec.latent_beta, n_total)
        confidences = spec.link.confidence_from_latent(latent)
        correct = _quota_correctness(confidences, spec.link, master)

    scenes = []
    cursor = 0
    for scene_idx in range(spec.n_scenes):
        rng = np.random.default_rng(children[scene_idx + 1])
        k = int(counts[scene_idx])
        truths = []
        detections = []
        for j in range(k):
            cx, cy = rng.uniform(0.2, 0.8, 2)
            w, h = rng.uniform(0.08, 0.18, 2)
            truth_box = Box(cx, cy, w, h)
            truths.append(GroundTruth(0, truth_box))

            conf = float(confidences[cursor])
            if correct[cursor]:
                det_box = _jittered_true_positive(truth_box, spec.jitter_sigma, rng)
            else:
                # Decoy far below any truth's matchable size: IoU with a truth
                # of width >= 0.08 is at most 0.0625, never a true positive.
                # Centers follow the truth-center distribution so box position
                # carries no correctness signal.
                dx, dy = rng.uniform(0.2, 0.8, 2)
                det_box = Box(dx, dy, 0.02, 0.02)
            detections.append(Detection(0, conf, det_box))
            cursor += 1
        order = rng.permutation(len(detections))
        scenes.append(Scene(truths, [detections[i] for i in order]))
    return scenes


def labeled_confidences(scenes, iou_threshold=0.5):
    """Match every scene and return (confidence, correct) pairs for ECE."""
    from .matching import match_scene

    pairs = []
    for scene in scenes:
        summary = match_scene(scene.detections, scene.truths, iou_threshold)
        for outcome in summary.outcomes:
            pairs.append((scene.detections[outcome.detection_index].confidence, outcome.correct))
    return pairs
