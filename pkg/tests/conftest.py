import os

import numpy as np
import pytest

from detcal.annotations import (
    DatasetManifest,
    ManifestEntry,
    format_detections,
    format_ground_truth,
    save_manifest,
)


def write_scene_dataset(scenes, root):
    """Write truth/detection files + manifest for a list of simulator scenes."""
    truth_dir = os.path.join(root, "truths")
    det_dir = os.path.join(root, "detections")
    os.makedirs(truth_dir, exist_ok=True)
    os.makedirs(det_dir, exist_ok=True)
    entries = []
    for i, scene in enumerate(scenes):
        image_id = f"scene_{i:05d}"
        truth_path = os.path.join(truth_dir, f"{image_id}.txt")
        det_path = os.path.join(det_dir, f"{image_id}.txt")
        with open(truth_path, "w") as fh:
            fh.write(format_ground_truth(scene.truths))
        with open(det_path, "w") as fh:
            fh.write(format_detections(scene.detections))
        entries.append(ManifestEntry(image_id, None, truth_path, det_path))
    manifest_path = os.path.join(root, "manifest.txt")
    save_manifest(DatasetManifest(entries), manifest_path)
    return manifest_path


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def dyadic(rng, lo, hi, denom=1024):
    """Random value on the 1/denom dyadic grid inside [lo, hi]."""
    lo_i = int(np.ceil(lo * denom))
    hi_i = int(np.floor(hi * denom))
    return int(rng.integers(lo_i, hi_i + 1)) / denom
