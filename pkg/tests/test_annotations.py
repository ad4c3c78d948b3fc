import os

import numpy as np
import pytest

from detcal.annotations import (
    DatasetManifest,
    ManifestEntry,
    SplitSpec,
    format_detections,
    format_ground_truth,
    load_manifest,
    load_model,
    parse_detections,
    parse_ground_truth,
    save_manifest,
    save_model,
    split_records,
)
from detcal.calibration import FeatureSpec, LabeledSample, fit
from detcal.errors import DataError, ParseError, ValidationError
from detcal.geometry import Box


class TestGroundTruthParsing:
    def test_single_line(self):
        [t] = parse_ground_truth("0 0.5 0.5 0.2 0.1")
        assert t.class_id == 0
        assert t.box == Box(0.5, 0.5, 0.2, 0.1)

    def test_empty_file(self):
        assert parse_ground_truth("") == []

    def test_comments_and_blank_lines(self):
        text = "# header\n\n1 0.25 0.25 0.5 0.5\n"
        [t] = parse_ground_truth(text)
        assert t.class_id == 1

    def test_out_of_range_center(self):
        with pytest.raises(ParseError) as exc:
            parse_ground_truth("0 1.5 0.5 0.2 0.1")
        assert exc.value.line == 1

    def test_malformed_line_provenance(self):
        with pytest.raises(ParseError) as exc:
            parse_ground_truth("0 0.5 0.5 0.2 0.1\n0 0.5 oops 0.2 0.1")
        assert exc.value.line == 2
        assert exc.value.column == 7

    def test_wrong_field_count(self):
        with pytest.raises(ParseError) as exc:
            parse_ground_truth("0 0.5 0.5 0.2")
        assert exc.value.line == 1


class TestDetectionParsing:
    def test_single_line(self):
        [d] = parse_detections("0 0.91 0.5 0.5 0.2 0.1")
        assert d.confidence == 0.91
        assert d.box == Box(0.5, 0.5, 0.2, 0.1)

    def test_confidence_out_of_range(self):
        with pytest.raises(ParseError):
            parse_detections("0 1.2 0.5 0.5 0.2 0.1")

    def test_order_preserved(self):
        dets = parse_detections("0 0.2 0.5 0.5 0.2 0.1\n0 0.9 0.25 0.25 0.1 0.1")
        assert [d.confidence for d in dets] == [0.2, 0.9]

    def test_round_trip_canonical(self):
        text = "0 0.91 0.5 0.5 0.2 0.1\n1 0.125 0.3 0.7 0.25 0.0625\n"
        once = format_detections(parse_detections(text))
        assert format_detections(parse_detections(once)) == once

    def test_truth_round_trip_canonical(self):
        text = "# c\n0 0.5 0.5 0.2 0.1\n"
        once = format_ground_truth(parse_ground_truth(text))
        assert format_ground_truth(parse_ground_truth(once)) == once


class TestSplit:
    def test_exact_fractions(self):
        parts = split_records(10, SplitSpec((0.6, 0.4), 7))
        assert [len(p) for p in parts] == [6, 4]
        assert sorted(parts[0] + parts[1]) == list(range(10))

    def test_deterministic(self):
        spec = SplitSpec((0.6, 0.4), 7)
        assert split_records(10, spec) == split_records(10, spec)

    def test_largest_remainder_943(self):
        parts = split_records(943, SplitSpec((1 / 3, 1 / 3, 1 / 3), 11))
        assert sorted(len(p) for p in parts) == [314, 314, 315]
        assert sorted(i for p in parts for i in p) == list(range(943))

    def test_partitions_disjoint(self):
        parts = split_records(101, SplitSpec((0.5, 0.3, 0.2), 3))
        seen = [i for p in parts for i in p]
        assert len(seen) == len(set(seen)) == 101

    def test_too_few_records(self):
        with pytest.raises(DataError):
            split_records(1, SplitSpec((0.6, 0.4), 0))

    def test_bad_fractions(self):
        with pytest.raises(ValidationError):
            SplitSpec((0.6, 0.6), 0)
        with pytest.raises(ValidationError):
            SplitSpec((1.0,), 0)
        with pytest.raises(ValidationError):
            SplitSpec((0.6, -0.4, 0.8), 0)


class TestManifest:
    def make(self, tmp_path, with_dets=True):
        truth = tmp_path / "a.txt"
        truth.write_text("0 0.5 0.5 0.2 0.1\n")
        det = tmp_path / "a_det.txt"
        det.write_text("0 0.9 0.5 0.5 0.2 0.1\n")
        entry = ManifestEntry("a", None, str(truth), str(det) if with_dets else None)
        path = tmp_path / "manifest.txt"
        save_manifest(DatasetManifest([entry]), str(path))
        return str(path)

    def test_round_trip(self, tmp_path):
        path = self.make(tmp_path)
        m = load_manifest(path)
        assert len(m.entries) == 1
        assert m.entries[0].image_id == "a"
        assert m.entries[0].image_path is None
        assert os.path.exists(m.entries[0].truth_path)

    def test_missing_file_rejected(self, tmp_path):
        path = self.make(tmp_path)
        os.remove(tmp_path / "a_det.txt")
        with pytest.raises(DataError):
            load_manifest(path)

    def test_duplicate_ids_rejected(self, tmp_path):
        truth = tmp_path / "a.txt"
        truth.write_text("")
        with pytest.raises(ValidationError):
            DatasetManifest(
                [ManifestEntry("a", None, str(truth)), ManifestEntry("a", None, str(truth))]
            )


def fitted_model():
    rng = np.random.default_rng(5)
    samples = [
        LabeledSample(rng.normal([0.8, 0.5, 0.5], 0.05), True) for _ in range(50)
    ] + [LabeledSample(rng.normal([0.4, 0.5, 0.5], 0.1), False) for _ in range(50)]
    return fit(samples, spec=FeatureSpec())


class TestModelPersistence:
    def test_round_trip_field_identical(self, tmp_path):
        model = fitted_model()
        path = str(tmp_path / "model.txt")
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.spec == model.spec
        assert np.array_equal(loaded.mu_plus, model.mu_plus)
        assert np.array_equal(loaded.mu_minus, model.mu_minus)
        assert np.array_equal(loaded.sigma_plus, model.sigma_plus)
        assert np.array_equal(loaded.sigma_minus, model.sigma_minus)
        assert loaded.c == model.c
        assert loaded.lambda_reg == model.lambda_reg
        assert loaded.epsilon_clamp == model.epsilon_clamp
        assert loaded.prior_log_odds == model.prior_log_odds

    def test_non_symmetric_sigma_rejected(self, tmp_path):
        model = fitted_model()
        path = str(tmp_path / "model.txt")
        save_model(model, path)
        text = open(path).read()
        bad = []
        for line in text.splitlines():
            if line.startswith("sigma_plus:"):
                vals = line.split(":", 1)[1].split()
                vals[1] = repr(float(vals[1]) + 0.5)  # break (0,1) vs (1,0)
                line = "sigma_plus: " + " ".join(vals)
            bad.append(line)
        open(path, "w").write("\n".join(bad) + "\n")
        with pytest.raises(DataError, match="not symmetric"):
            load_model(path)

    def test_dimension_mismatch_rejected(self, tmp_path):
        model = fitted_model()
        path = str(tmp_path / "model.txt")
        save_model(model, path)
        text = open(path).read().replace("d: 3", "d: 2")
        open(path, "w").write(text)
        with pytest.raises(DataError):
            load_model(path)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "model.txt"
        path.write_text("something else\n")
        with pytest.raises(DataError):
            load_model(str(path))
