"""Vowel dataset synthesis, normalization, CSV schema, splitting."""

import numpy as np
import pytest

from photonn import constants
from photonn.dataset import (
    CLASS_NAMES,
    CSV_HEADER,
    VowelDataset,
    ingest_vowel_csv,
    max_normalize,
    synthesize_vowels,
    train_test_split,
    write_vowel_csv,
)
from photonn.errors import DataError


class TestSynthesis:
    def test_default_size_and_balance(self):
        ds = synthesize_vowels(seed=1)
        assert len(ds) == 834
        counts = np.bincount(ds.labels, minlength=6)
        assert np.array_equal(counts, np.full(6, 139))

    def test_reproducible(self):
        a = synthesize_vowels(120, seed=7)
        b = synthesize_vowels(120, seed=7)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)
        c = synthesize_vowels(120, seed=8)
        assert not np.array_equal(a.features, c.features)

    def test_rows_max_normalized(self):
        ds = synthesize_vowels(90, seed=2)
        assert np.allclose(ds.features.max(axis=1), 1.0, atol=1e-12)
        assert np.all(ds.features > 0)
        assert np.all(ds.features <= 1 + 1e-12)

    def test_uneven_count_distributes_remainder(self):
        ds = synthesize_vowels(20, seed=3)
        counts = np.bincount(ds.labels, minlength=6)
        assert counts.sum() == 20
        assert counts.max() - counts.min() <= 1

    def test_speaker_scale_cancels_under_normalization(self):
        # with jitter off, every sample of a class collapses to one vector
        # regardless of the speaker draw
        ds = synthesize_vowels(60, seed=4, jitter=0.0)
        for k in range(6):
            rows = ds.features[ds.labels == k]
            assert np.allclose(rows, rows[0], atol=1e-12)

    def test_class_means_separate(self):
        ds = synthesize_vowels(600, seed=5)
        means = np.array([ds.features[ds.labels == k].mean(axis=0) for k in range(6)])
        for i in range(6):
            for j in range(i + 1, 6):
                assert np.linalg.norm(means[i] - means[j]) > 0.02

    def test_rejects_bad_count(self):
        with pytest.raises(DataError):
            synthesize_vowels(0)


class TestNormalize:
    def test_scales_rows(self):
        out = max_normalize(np.array([[1.0, 2.0, 4.0], [5.0, 5.0, 2.5]]))
        assert np.allclose(out, [[0.25, 0.5, 1.0], [1.0, 1.0, 0.5]])

    def test_rejects_nonpositive_rows(self):
        with pytest.raises(DataError):
            max_normalize(np.array([[0.0, 0.0, 0.0]]))


class TestSplit:
    def test_reference_split(self):
        ds = synthesize_vowels(seed=6)
        train, test = train_test_split(ds, seed=0)
        assert len(train) == constants.TRAIN_SPLIT == 540
        assert len(test) == constants.TEST_SPLIT == 294

    def test_proportional_for_other_sizes(self):
        ds = synthesize_vowels(300, seed=6)
        train, test = train_test_split(ds)
        assert len(train) == 194
        assert len(test) == 106

    def test_partition_is_disjoint_and_complete(self):
        ds = synthesize_vowels(100, seed=9)
        key = ds.features @ np.arange(1, 7)  # row fingerprint
        train, test = train_test_split(ds, seed=3)
        got = np.sort(
            np.concatenate([train.features @ np.arange(1, 7), test.features @ np.arange(1, 7)])
        )
        assert np.allclose(got, np.sort(key), atol=1e-12)

    def test_seeded_shuffle_reproducible(self):
        ds = synthesize_vowels(100, seed=9)
        t1, _ = train_test_split(ds, seed=5)
        t2, _ = train_test_split(ds, seed=5)
        t3, _ = train_test_split(ds, seed=6)
        assert np.array_equal(t1.features, t2.features)
        assert not np.array_equal(t1.features, t3.features)

    def test_rejects_degenerate_split(self):
        ds = synthesize_vowels(10, seed=1)
        with pytest.raises(DataError):
            train_test_split(ds, train_count=10)


class TestCsv:
    def test_round_trip(self, tmp_path):
        ds = synthesize_vowels(48, seed=11)
        path = tmp_path / "vowels.csv"
        write_vowel_csv(ds, path)
        again = ingest_vowel_csv(path)
        assert np.allclose(again.features, ds.features, atol=1e-12)
        assert np.array_equal(again.labels, ds.labels)

    def test_header_text(self, tmp_path):
        ds = synthesize_vowels(6, seed=11)
        path = tmp_path / "vowels.csv"
        write_vowel_csv(ds, path)
        first = path.read_text().splitlines()[0]
        assert first == ",".join(CSV_HEADER)

    def test_ingest_normalizes_raw_formants(self, tmp_path):
        path = tmp_path / "raw.csv"
        path.write_text(
            ",".join(CSV_HEADER)
            + "\niy,270,2290,3010,280,2300,3000\n"
        )
        ds = ingest_vowel_csv(path)
        assert ds.features.max() == pytest.approx(1.0)
        assert ds.labels[0] == CLASS_NAMES.index("iy")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(DataError, match="empty"):
            ingest_vowel_csv(path)

    def test_header_only(self, tmp_path):
        path = tmp_path / "header.csv"
        path.write_text(",".join(CSV_HEADER) + "\n")
        with pytest.raises(DataError, match="no data rows"):
            ingest_vowel_csv(path)

    def test_wrong_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n")
        with pytest.raises(DataError, match="line 1"):
            ingest_vowel_csv(path)

    def test_wrong_column_count_reports_line(self, tmp_path):
        path = tmp_path / "cols.csv"
        path.write_text(
            ",".join(CSV_HEADER)
            + "\niy,270,2290,3010,280,2300,3000\nih,1,2,3\n"
        )
        with pytest.raises(DataError, match="line 3"):
            ingest_vowel_csv(path)

    def test_unknown_label_reports_line(self, tmp_path):
        path = tmp_path / "label.csv"
        path.write_text(
            ",".join(CSV_HEADER) + "\nzz,270,2290,3010,280,2300,3000\n"
        )
        with pytest.raises(DataError, match="line 2.*zz"):
            ingest_vowel_csv(path)

    def test_non_numeric_reports_line(self, tmp_path):
        path = tmp_path / "nan.csv"
        path.write_text(
            ",".join(CSV_HEADER) + "\niy,270,x,3010,280,2300,3000\n"
        )
        with pytest.raises(DataError, match="line 2"):
            ingest_vowel_csv(path)

    def test_nonpositive_reports_line(self, tmp_path):
        path = tmp_path / "neg.csv"
        path.write_text(
            ",".join(CSV_HEADER) + "\niy,-270,2290,3010,280,2300,3000\n"
        )
        with pytest.raises(DataError, match="line 2.*positive"):
            ingest_vowel_csv(path)


class TestDatasetContainer:
    def test_validates_shapes(self):
        with pytest.raises(DataError):
            VowelDataset(np.zeros((3, 5)), np.zeros(3, dtype=int))
        with pytest.raises(DataError):
            VowelDataset(np.ones((3, 6)), np.zeros(2, dtype=int))
        with pytest.raises(DataError):
            VowelDataset(np.ones((3, 6)), np.array([0, 1, 9]))
