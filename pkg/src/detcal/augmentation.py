"""Training-set augmentation: motion blur and horizontal flip.

Each source image yields exactly two augmented copies: a motion-blurred one
(annotations unchanged) and a horizontally flipped one (annotations
mirrored). No vertical flips or rotations are ever produced; the transform
set is fixed to {blur, horizontal flip} because the imaging geometry has a
fixed light-propagation axis.

Images are single-channel, decoded to float intensities in [0, 1] from 8- or
16-bit grayscale PNG or PGM, and written back at the input's bit depth.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image
from scipy import ndimage

from .annotations import (
    DatasetManifest,
    ManifestEntry,
    format_ground_truth,
    parse_ground_truth,
)
from .errors import DataError, ValidationError
from .geometry import flip_horizontal

__all__ = [
    "ImageRaster",
    "BlurSpec",
    "motion_blur_kernel",
    "motion_blur",
    "flip_horizontal_pair",
    "augment_dataset",
    "load_image",
    "save_image",
    "TRANSFORM_SET",
]

TRANSFORM_SET = ("blur", "horizontal_flip")


@dataclass
class ImageRaster:
    """Grayscale raster with row-major intensities in [0, 1]."""

    width: int
    height: int
    intensities: np.ndarray  # shape (height, width), float64

    def __post_init__(self):
        self.intensities = np.asarray(self.intensities, dtype=float)
        if self.intensities.shape != (self.height, self.width):
            raise ValidationError(
                f"intensity buffer shape {self.intensities.shape} does not match "
                f"{self.height}x{self.width}"
            )
        if self.intensities.size and (
            self.intensities.min() < 0.0 or self.intensities.max() > 1.0
        ):
            raise ValidationError("intensities must lie in [0, 1]")


@dataclass(frozen=True)
class BlurSpec:
    length: int = 7
    angle: float = 0.0  # degrees; 0 is the lateral (x) direction

    def __post_init__(self):
        if self.length < 3 or self.length % 2 == 0:
            raise ValidationError(f"blur length must be odd and >= 3, got {self.length}")


def motion_blur_kernel(spec: BlurSpec) -> np.ndarray:
    """Linear motion kernel: a rasterized line segment, weights summing to 1.

    The segment is sampled at `length` points centered on the kernel middle
    and binned to the nearest pixel, so weights start as integer counts and
    the kernel is point-symmetric. The float sum is nudged back to exactly
    1.0 on the center tap after normalization.
    """
    radius = (spec.length - 1) // 2
    size = 2 * radius + 1
    counts = np.zeros((size, size), dtype=np.int64)
    theta = math.radians(spec.angle)
    for t in range(spec.length):
        offset = t - radius
        col = radius + int(round(offset * math.cos(theta)))
        row = radius - int(round(offset * math.sin(theta)))
        counts[row, col] += 1
    kernel = counts / counts.sum()
    kernel[radius, radius] += 1.0 - kernel.sum()
    return kernel


def motion_blur(img: ImageRaster, spec: BlurSpec) -> ImageRaster:
    """Convolve with the motion kernel using reflective border padding."""
    kernel = motion_blur_kernel(spec)
    blurred = ndimage.correlate(img.intensities, kernel, mode="reflect")
    return ImageRaster(img.width, img.height, np.clip(blurred, 0.0, 1.0))


def flip_horizontal_pair(img: ImageRaster, truths):
    """Mirror an image and its annotations across the vertical midline."""
    flipped = ImageRaster(img.width, img.height, img.intensities[:, ::-1].copy())
    return flipped, [type(t)(t.class_id, flip_horizontal(t.box)) for t in truths]


# --- image file I/O ---------------------------------------------------------


def load_image(path) -> tuple[ImageRaster, int]:
    """Read an 8- or 16-bit grayscale PNG/PGM; returns (raster, bit_depth)."""
    try:
        with Image.open(path) as im:
            if im.mode == "L":
                depth = 8
            elif im.mode in ("I", "I;16"):
                depth = 16
            else:
                raise DataError(f"unsupported image mode {im.mode!r} in {path}")
            data = np.asarray(im, dtype=np.float64)
    except (OSError, Image.UnidentifiedImageError) as exc:
        raise DataError(f"cannot read image {path}: {exc}") from None
    scale = float(2**depth - 1)
    return ImageRaster(data.shape[1], data.shape[0], data / scale), depth


def save_image(path, img: ImageRaster, bit_depth=8) -> None:
    """Write a grayscale image at the given bit depth (atomic replace)."""
    scale = 2**bit_depth - 1
    quantized = np.rint(img.intensities * scale)
    if bit_depth == 8:
        pil = Image.fromarray(quantized.astype(np.uint8))
    elif bit_depth == 16:
        pil = Image.fromarray(quantized.astype(np.uint16))
    else:
        raise ValidationError(f"unsupported bit depth {bit_depth}")
    fmt = "PPM" if str(path).lower().endswith((".pgm", ".ppm")) else "PNG"
    tmp = f"{path}.tmp"
    pil.save(tmp, format=fmt)
    os.replace(tmp, path)


# --- dataset-level augmentation ---------------------------------------------


@dataclass
class AugmentationReport:
    manifest: DatasetManifest
    errors: list[tuple[str, str]] = field(default_factory=list)  # (image_id, message)


def augment_dataset(manifest: DatasetManifest, spec: BlurSpec, out_dir) -> AugmentationReport:
    """Write blurred and flipped copies of every entry into `out_dir`.

    Returns the expanded manifest (originals plus both copies, 3x entries)
    and a per-entry error list; unreadable inputs are reported and skipped
    rather than aborting the run.
    """
    os.makedirs(out_dir, exist_ok=True)
    entries: list[ManifestEntry] = []
    errors: list[tuple[str, str]] = []

    for entry in manifest.entries:
        entries.append(entry)
        if entry.image_path is None:
            errors.append((entry.image_id, "no image file; skipped"))
            continue
        try:
            img, depth = load_image(entry.image_path)
            with open(entry.truth_path, encoding="utf-8") as fh:
                truth_text = fh.read()
            truths = parse_ground_truth(truth_text)
        except DataError as exc:
            errors.append((entry.image_id, str(exc)))
            continue

        ext = os.path.splitext(entry.image_path)[1] or ".png"

        blur_id = f"{entry.image_id}__blur"
        blur_img_path = os.path.join(out_dir, blur_id + ext)
        blur_truth_path = os.path.join(out_dir, blur_id + ".txt")
        save_image(blur_img_path, motion_blur(img, spec), depth)
        _write_text(blur_truth_path, truth_text)  # blur does not move boxes
        entries.append(ManifestEntry(blur_id, blur_img_path, blur_truth_path))

        flip_id = f"{entry.image_id}__flip"
        flip_img_path = os.path.join(out_dir, flip_id + ext)
        flip_truth_path = os.path.join(out_dir, flip_id + ".txt")
        flipped_img, flipped_truths = flip_horizontal_pair(img, truths)
        save_image(flip_img_path, flipped_img, depth)
        _write_text(flip_truth_path, format_ground_truth(flipped_truths))
        entries.append(ManifestEntry(flip_id, flip_img_path, flip_truth_path))

    return AugmentationReport(DatasetManifest(entries), errors)


def _write_text(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)
