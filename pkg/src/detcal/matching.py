"""IoU matching of detections to ground truth and count-based metrics.

Matching is greedy and one-to-one: detections are processed in descending
confidence (ties broken by input order) and each takes the highest-IoU
unmatched ground truth of the same class with IoU at or above the threshold.
Unmatched detections are false positives, unmatched truths false negatives.
Dataset-level metrics come from summed counts over scenes, never from
averaging per-scene ratios.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ValidationError
from .geometry import iou

__all__ = [
    "MatchOutcome",
    "MatchSummary",
    "match_scene",
    "precision",
    "recall",
    "f1",
    "aggregate",
]

DEFAULT_IOU_THRESHOLD = 0.5


@dataclass(frozen=True)
class MatchOutcome:
    detection_index: int
    truth_index: int | None
    iou: float
    correct: bool


@dataclass
class MatchSummary:
    tp: int
    fp: int
    fn: int
    outcomes: list[MatchOutcome] = field(default_factory=list)


def match_scene(detections, truths, iou_threshold=DEFAULT_IOU_THRESHOLD) -> MatchSummary:
    """Greedily match one scene's detections against its ground truths."""
    if not (0.0 < iou_threshold < 1.0):
        raise ValidationError(f"iou_threshold must be in (0, 1), got {iou_threshold}")

    order = sorted(range(len(detections)), key=lambda i: (-detections[i].confidence, i))
    taken = [False] * len(truths)
    matched: dict[int, tuple[int, float]] = {}

    for di in order:
        det = detections[di]
        best_ti = None
        best_iou = 0.0
        for ti, truth in enumerate(truths):
            if taken[ti] or truth.class_id != det.class_id:
                continue
            overlap = iou(det.box, truth.box)
            if overlap >= iou_threshold and overlap > best_iou:
                best_ti = ti
                best_iou = overlap
        if best_ti is not None:
            taken[best_ti] = True
            matched[di] = (best_ti, best_iou)

    outcomes = []
    for di in range(len(detections)):
        if di in matched:
            ti, overlap = matched[di]
            outcomes.append(MatchOutcome(di, ti, overlap, True))
        else:
            outcomes.append(MatchOutcome(di, None, 0.0, False))

    tp = len(matched)
    return MatchSummary(tp=tp, fp=len(detections) - tp, fn=len(truths) - tp, outcomes=outcomes)


def precision(s: MatchSummary) -> float:
    """TP / (TP + FP); defined as 0 when there are no detections."""
    denom = s.tp + s.fp
    return s.tp / denom if denom else 0.0


def recall(s: MatchSummary) -> float:
    """TP / (TP + FN); defined as 1 when there are no truths to find."""
    denom = s.tp + s.fn
    return s.tp / denom if denom else 1.0


def f1(s: MatchSummary) -> float:
    """Harmonic mean of precision and recall; 0 when both vanish."""
    p = precision(s)
    r = recall(s)
    return 2.0 * p * r / (p + r) if p + r > 0.0 else 0.0


def aggregate(summaries) -> MatchSummary:
    """Component-wise sum of per-scene counts with concatenated outcomes."""
    total = MatchSummary(tp=0, fp=0, fn=0, outcomes=[])
    for s in summaries:
        total.tp += s.tp
        total.fp += s.fp
        total.fn += s.fn
        total.outcomes.extend(s.outcomes)
    return total
