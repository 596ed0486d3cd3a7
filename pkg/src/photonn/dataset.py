"""Spoken-vowel feature vectors: synthesis, CSV ingest, splitting.

Each sample is six formant frequencies, the first three at steady state and
the same three measured at half duration, max-normalized per vector so the
amplitudes suit an optical encoder with |x| <= 1. Normalization makes the
features speaker-relative: a speaker's overall vocal-tract scale multiplies
every formant and divides back out.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import constants
from .errors import DataError

CLASS_NAMES = ("iy", "ih", "eh", "ae", "ah", "uw")

# steady-state formant centers (Hz), one row per class
FORMANT_MEANS_HZ = {
    "iy": (270.0, 2290.0, 3010.0),
    "ih": (390.0, 1990.0, 2550.0),
    "eh": (530.0, 1840.0, 2480.0),
    "ae": (660.0, 1720.0, 2410.0),
    "ah": (730.0, 1090.0, 2440.0),
    "uw": (300.0, 870.0, 2240.0),
}

CSV_HEADER = (
    "label",
    "f1_steady",
    "f2_steady",
    "f3_steady",
    "f1_50",
    "f2_50",
    "f3_50",
)

FEATURE_COUNT = 6


@dataclass(frozen=True)
class VowelDataset:
    """Feature matrix (n, 6), integer labels, and the label vocabulary."""

    features: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...] = CLASS_NAMES

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=float)
        labels = np.asarray(self.labels, dtype=int)
        if feats.ndim != 2 or feats.shape[1] != FEATURE_COUNT:
            raise DataError(
                f"features must be (n, {FEATURE_COUNT}), got {feats.shape}"
            )
        if labels.shape != (feats.shape[0],):
            raise DataError("one label per feature row required")
        if labels.size and (labels.min() < 0 or labels.max() >= len(self.class_names)):
            raise DataError("labels must index class_names")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_names", tuple(self.class_names))

    def __len__(self) -> int:
        return self.features.shape[0]

    def subset(self, index) -> "VowelDataset":
        return VowelDataset(
            self.features[index], self.labels[index], self.class_names
        )


def max_normalize(features: np.ndarray) -> np.ndarray:
    """Scale each row by its largest entry; rows must be positive."""
    feats = np.asarray(features, dtype=float)
    peak = feats.max(axis=-1, keepdims=True)
    if np.any(peak <= 0):
        raise DataError("feature rows must contain positive values")
    return feats / peak


def synthesize_vowels(
    count: int = constants.TRAIN_SPLIT + constants.TEST_SPLIT,
    seed=0,
    speaker_sigma: float = constants.SYNTH_SPEAKER_SIGMA,
    jitter: float = constants.SYNTH_JITTER,
    drift_lo: float = constants.SYNTH_DRIFT_LO,
    drift_hi: float = constants.SYNTH_DRIFT_HI,
) -> VowelDataset:
    """Generate ``count`` labeled utterances, classes as balanced as the
    count allows.

    Per class, the half-duration formants drift from steady state by a fixed
    factor drawn once from U(drift_lo, drift_hi) per formant. Per utterance,
    a speaker scale N(1, speaker_sigma) multiplies all six values (removed
    again by normalization) and a per-formant N(1, jitter) roughens them.
    """
    if count < 1:
        raise DataError("count must be positive")
    rng = np.random.default_rng(seed)
    n_classes = len(CLASS_NAMES)
    per_class = [
        count // n_classes + (1 if k < count % n_classes else 0)
        for k in range(n_classes)
    ]
    drift = rng.uniform(drift_lo, drift_hi, size=(n_classes, 3))
    rows = []
    labels = []
    for k, name in enumerate(CLASS_NAMES):
        steady = np.array(FORMANT_MEANS_HZ[name])
        base = np.concatenate([steady, steady * drift[k]])
        for _ in range(per_class[k]):
            speaker = rng.normal(1.0, speaker_sigma)
            sample = base * speaker * rng.normal(1.0, jitter, FEATURE_COUNT)
            rows.append(np.abs(sample))
            labels.append(k)
    order = rng.permutation(len(rows))
    feats = max_normalize(np.array(rows)[order])
    return VowelDataset(feats, np.array(labels)[order])


def train_test_split(
    dataset: VowelDataset, train_count: int | None = None, seed=0
):
    """Seeded shuffle into train and test; the default split keeps the
    540/834 train proportion of the reference split."""
    n = len(dataset)
    if train_count is None:
        train_count = int(
            n * constants.TRAIN_SPLIT / (constants.TRAIN_SPLIT + constants.TEST_SPLIT)
        )
    if not 0 < train_count < n:
        raise DataError(f"train_count must split {n} samples, got {train_count}")
    order = np.random.default_rng(seed).permutation(n)
    return dataset.subset(order[:train_count]), dataset.subset(order[train_count:])


def write_vowel_csv(dataset: VowelDataset, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for row, label in zip(dataset.features, dataset.labels):
            writer.writerow(
                [dataset.class_names[label]] + [repr(float(v)) for v in row]
            )


def ingest_vowel_csv(path) -> VowelDataset:
    """Read the vowel CSV schema; malformed content raises DataError with
    the offending line number."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path.name}: empty file") from None
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise DataError(
                f"{path.name} line 1: expected header {','.join(CSV_HEADER)}"
            )
        feats = []
        labels = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise DataError(
                    f"{path.name} line {lineno}: expected {len(CSV_HEADER)} "
                    f"columns, got {len(row)}"
                )
            name = row[0].strip()
            if name not in CLASS_NAMES:
                raise DataError(
                    f"{path.name} line {lineno}: unknown label {name!r}"
                )
            try:
                values = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise DataError(
                    f"{path.name} line {lineno}: {exc}"
                ) from None
            if any(v <= 0 for v in values):
                raise DataError(
                    f"{path.name} line {lineno}: formants must be positive"
                )
            feats.append(values)
            labels.append(CLASS_NAMES.index(name))
    if not feats:
        raise DataError(f"{path.name}: no data rows")
    return VowelDataset(max_normalize(np.array(feats)), np.array(labels))
