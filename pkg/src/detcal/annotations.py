"""Annotation, manifest and model-file I/O plus deterministic dataset splits.

Text formats (all UTF-8, LF or CRLF, `#`-prefixed comment lines ignored):

* ground truth: one box per line, ``class_id cx cy w h`` (normalized values)
* detections:   one box per line, ``class_id confidence cx cy w h``
* manifest:     blank-line separated key/value records with keys
  ``id``, ``image``, ``truth`` and optional ``detections``; an image path of
  ``-`` marks a detection-only record with no raster file
* model file:   key/value lines holding the fitted calibration map; float
  fields use shortest round-trip decimals so load(save(m)) is bit-exact

The storage format is a convention of this artifact, not something inherited
from upstream detector tooling, but it matches the de-facto normalized
one-line-per-box layout most detectors emit.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ParseError, ValidationError
from .geometry import Box

__all__ = [
    "GroundTruth",
    "Detection",
    "ManifestEntry",
    "DatasetManifest",
    "SplitSpec",
    "parse_ground_truth",
    "parse_detections",
    "format_ground_truth",
    "format_detections",
    "load_manifest",
    "save_manifest",
    "split_records",
    "save_model",
    "load_model",
]

_TOKEN = re.compile(r"\S+")


@dataclass(frozen=True)
class GroundTruth:
    class_id: int
    box: Box

    def __post_init__(self):
        object.__setattr__(self, "class_id", int(self.class_id))
        if self.class_id < 0:
            raise ValidationError(f"class_id must be non-negative, got {self.class_id}")


@dataclass(frozen=True)
class Detection:
    class_id: int
    confidence: float
    box: Box

    def __post_init__(self):
        object.__setattr__(self, "class_id", int(self.class_id))
        object.__setattr__(self, "confidence", float(self.confidence))
        if self.class_id < 0:
            raise ValidationError(f"class_id must be non-negative, got {self.class_id}")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValidationError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    image_path: str | None  # None for detection-only records
    truth_path: str
    detection_path: str | None = None


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry] = field(default_factory=list)

    def __post_init__(self):
        ids = [e.image_id for e in self.entries]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValidationError(f"duplicate image ids in manifest: {dupes}")


@dataclass(frozen=True)
class SplitSpec:
    fractions: tuple[float, ...]
    seed: int

    def __post_init__(self):
        if len(self.fractions) < 2:
            raise ValidationError("split needs at least two fractions")
        if any(f <= 0.0 for f in self.fractions):
            raise ValidationError("split fractions must be positive")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValidationError(f"split fractions must sum to 1, got {sum(self.fractions)}")


def _iter_content_lines(text):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, raw


def _parse_fields(raw, lineno, names, int_fields):
    tokens = list(_TOKEN.finditer(raw))
    if len(tokens) != len(names):
        raise ParseError(
            f"expected {len(names)} fields ({' '.join(names)}), got {len(tokens)}",
            line=lineno,
            column=tokens[len(names)].start() + 1 if len(tokens) > len(names) else 1,
        )
    values = []
    for name, tok in zip(names, tokens):
        col = tok.start() + 1
        try:
            values.append(int(tok.group()) if name in int_fields else float(tok.group()))
        except ValueError:
            raise ParseError(f"invalid {name} value {tok.group()!r}", line=lineno, column=col) from None
    return values, tokens


def parse_ground_truth(text: str) -> list[GroundTruth]:
    """Parse `class_id cx cy w h` lines into GroundTruth records."""
    out = []
    for lineno, raw in _iter_content_lines(text):
        (cls, cx, cy, w, h), tokens = _parse_fields(
            raw, lineno, ["class_id", "cx", "cy", "w", "h"], {"class_id"}
        )
        try:
            out.append(GroundTruth(cls, Box(cx, cy, w, h)))
        except ValidationError as exc:
            raise ParseError(str(exc), line=lineno, column=tokens[0].start() + 1) from None
    return out


def parse_detections(text: str) -> list[Detection]:
    """Parse `class_id confidence cx cy w h` lines, preserving input order."""
    out = []
    for lineno, raw in _iter_content_lines(text):
        (cls, conf, cx, cy, w, h), tokens = _parse_fields(
            raw, lineno, ["class_id", "confidence", "cx", "cy", "w", "h"], {"class_id"}
        )
        try:
            out.append(Detection(cls, conf, Box(cx, cy, w, h)))
        except ValidationError as exc:
            raise ParseError(str(exc), line=lineno, column=tokens[0].start() + 1) from None
    return out


def format_ground_truth(truths) -> str:
    lines = [f"{t.class_id} {t.box.cx!r} {t.box.cy!r} {t.box.w!r} {t.box.h!r}" for t in truths]
    return "".join(line + "\n" for line in lines)


def format_detections(detections) -> str:
    lines = [
        f"{d.class_id} {d.confidence!r} {d.box.cx!r} {d.box.cy!r} {d.box.w!r} {d.box.h!r}"
        for d in detections
    ]
    return "".join(line + "\n" for line in lines)


# --- manifest ---------------------------------------------------------------


def load_manifest(path, require_files=True) -> DatasetManifest:
    """Load a manifest; relative paths are resolved against the manifest dir."""
    base = os.path.dirname(os.path.abspath(path))
    with open(path, encoding="utf-8") as fh:
        text = fh.read()

    entries = []
    record: dict[str, str] = {}
    record_line = 0

    def flush():
        if not record:
            return
        if "id" not in record or "truth" not in record:
            raise ParseError("manifest record needs 'id' and 'truth' keys", line=record_line)
        image = record.get("image", "-")
        entry = ManifestEntry(
            image_id=record["id"],
            image_path=None if image == "-" else os.path.join(base, image),
            truth_path=os.path.join(base, record["truth"]),
            detection_path=(
                os.path.join(base, record["detections"]) if "detections" in record else None
            ),
        )
        entries.append(entry)
        record.clear()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("#"):
            continue
        if not line:
            flush()
            continue
        if ":" not in line:
            raise ParseError("manifest line is not 'key: value'", line=lineno, column=1)
        key, value = line.split(":", 1)
        if not record:
            record_line = lineno
        record[key.strip()] = value.strip()
    flush()

    manifest = DatasetManifest(entries)
    if require_files:
        for e in manifest.entries:
            for p in (e.image_path, e.truth_path, e.detection_path):
                if p is not None and not os.path.exists(p):
                    raise DataError(f"manifest references missing file: {p}")
    return manifest


def save_manifest(manifest: DatasetManifest, path) -> None:
    """Write a manifest; paths are stored relative to the manifest dir."""
    base = os.path.dirname(os.path.abspath(path))

    def rel(p):
        if p is None:
            return None
        return os.path.relpath(p, base)

    blocks = []
    for e in manifest.entries:
        lines = [f"id: {e.image_id}"]
        lines.append(f"image: {rel(e.image_path) if e.image_path else '-'}")
        lines.append(f"truth: {rel(e.truth_path)}")
        if e.detection_path:
            lines.append(f"detections: {rel(e.detection_path)}")
        blocks.append("\n".join(lines))
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n\n".join(blocks) + "\n")
    os.replace(tmp, path)


# --- splitting --------------------------------------------------------------


def _largest_remainder_sizes(n, fractions):
    total = sum(fractions)
    scaled = [f / total * n for f in fractions]
    sizes = [math.floor(s) for s in scaled]
    remainders = sorted(
        range(len(fractions)), key=lambda i: (-(scaled[i] - sizes[i]), i)
    )
    for i in remainders[: n - sum(sizes)]:
        sizes[i] += 1
    return sizes


def split_records(n: int, spec: SplitSpec) -> list[list[int]]:
    """Deterministically partition indices 0..n-1 by the given fractions.

    Indices are shuffled with a seeded generator, then cut into contiguous
    runs whose sizes come from largest-remainder rounding. Identical
    (n, spec) inputs always give identical partitions.
    """
    if n < len(spec.fractions):
        raise DataError(f"cannot split {n} records into {len(spec.fractions)} parts")
    sizes = _largest_remainder_sizes(n, spec.fractions)
    order = np.random.default_rng(spec.seed).permutation(n)
    parts = []
    start = 0
    for size in sizes:
        parts.append(sorted(int(i) for i in order[start : start + size]))
        start += size
    return parts


# --- model persistence ------------------------------------------------------

_MODEL_HEADER = "detcal-model v1"


def save_model(model, path) -> None:
    """Write a fitted calibration model with bit-exact float round-trip."""
    spec = model.spec
    lines = [
        _MODEL_HEADER,
        f"features: {' '.join(spec.names)}",
        f"confidence_transform: {spec.confidence_transform}",
        f"d: {spec.dimension}",
        "mu_plus: " + " ".join(repr(float(v)) for v in model.mu_plus),
        "mu_minus: " + " ".join(repr(float(v)) for v in model.mu_minus),
        "sigma_plus: " + " ".join(repr(float(v)) for v in np.asarray(model.sigma_plus).ravel()),
        "sigma_minus: " + " ".join(repr(float(v)) for v in np.asarray(model.sigma_minus).ravel()),
        f"c: {float(model.c)!r}",
        f"prior_log_odds: {float(model.prior_log_odds)!r}",
        f"lambda_reg: {float(model.lambda_reg)!r}",
        f"epsilon_clamp: {float(model.epsilon_clamp)!r}",
    ]
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def load_model(path):
    """Load a calibration model file, validating shape and symmetry."""
    from .calibration import FeatureSpec, GaussianLrModel

    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or lines[0] != _MODEL_HEADER:
        raise DataError(f"not a detcal model file (expected header {_MODEL_HEADER!r}): {path}")
    fields = {}
    for ln in lines[1:]:
        if ":" not in ln:
            raise DataError(f"malformed model file line: {ln!r}")
        key, value = ln.split(":", 1)
        fields[key.strip()] = value.strip()

    try:
        names = fields["features"].split()
        transform = fields["confidence_transform"]
        d = int(fields["d"])
        mu_plus = np.array([float(v) for v in fields["mu_plus"].split()])
        mu_minus = np.array([float(v) for v in fields["mu_minus"].split()])
        sigma_plus = np.array([float(v) for v in fields["sigma_plus"].split()])
        sigma_minus = np.array([float(v) for v in fields["sigma_minus"].split()])
        c = float(fields["c"])
        prior_log_odds = float(fields.get("prior_log_odds", "0.0"))
        lambda_reg = float(fields["lambda_reg"])
        epsilon_clamp = float(fields["epsilon_clamp"])
    except KeyError as exc:
        raise DataError(f"model file missing field {exc}") from None
    except ValueError as exc:
        raise DataError(f"model file has invalid value: {exc}") from None

    spec = FeatureSpec.from_names(names, confidence_transform=transform)
    if spec.dimension != d:
        raise DataError(f"model header d={d} but {len(names)} features listed")
    for name, vec in (("mu_plus", mu_plus), ("mu_minus", mu_minus)):
        if vec.shape != (d,):
            raise DataError(f"model field {name} has {vec.size} entries, expected {d}")
    mats = {}
    for name, flat in (("sigma_plus", sigma_plus), ("sigma_minus", sigma_minus)):
        if flat.size != d * d:
            raise DataError(f"model field {name} has {flat.size} entries, expected {d * d}")
        mat = flat.reshape(d, d)
        if not np.array_equal(mat, mat.T):
            raise DataError(f"model field {name} is not symmetric")
        mats[name] = mat

    return GaussianLrModel(
        spec=spec,
        mu_plus=mu_plus,
        mu_minus=mu_minus,
        sigma_plus=mats["sigma_plus"],
        sigma_minus=mats["sigma_minus"],
        c=c,
        lambda_reg=lambda_reg,
        epsilon_clamp=epsilon_clamp,
        prior_log_odds=prior_log_odds,
    )
