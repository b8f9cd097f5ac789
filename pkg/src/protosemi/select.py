"""Agreement-based sample selection and prototype-guided label correction.

The dataset is split into a *confident* set (classifier prediction
agrees with the current working label) and an *unconfident* set (labels
withheld).  Class prototypes are mean embeddings over the confident
set; each unconfident sample is then scored by its best cosine
similarity to any prototype and falls into one of three zones:

  small circle   best similarity >= alpha: take the prototype's class,
                 correcting the label outright if it differs;
  ring           beta <= best similarity < alpha: matching labels are
                 retained, differing labels are corrected with
                 probability rising linearly from 0 at beta to 1 at
                 alpha;
  outside        best similarity < beta: left unconfident, untouched.

Samples in either circle move to the confident set, and corrected
labels are written back to the dataset so later epochs see them.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import NoisyDataset
from .errors import (
    DegenerateClassError,
    DegenerateGeometryError,
    FormatError,
    ParameterError,
)
from .net import Network

ZONES = ("small", "ring", "outside")
ACTIONS = ("corrected", "retained", "unmoved")
LOG_COLUMNS = ("index", "d_max", "proto_label", "prior_label",
               "zone", "action", "p_correct", "true_label")


@dataclass(frozen=True)
class Thresholds:
    """Similarity cutoffs: alpha bounds the small circle, beta the ring."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (1.0 >= self.alpha > self.beta >= -1.0):
            raise ParameterError(
                f"thresholds must satisfy 1 >= alpha > beta >= -1, got "
                f"alpha={self.alpha}, beta={self.beta}"
            )


@dataclass(eq=False)
class Partition:
    """Index split of a dataset; confident samples carry an assigned label."""

    confident_idx: np.ndarray     # (m,) int64, strictly increasing
    confident_labels: np.ndarray  # (m,) int64
    unconfident_idx: np.ndarray   # (u,) int64, strictly increasing

    def __post_init__(self):
        self.confident_idx = np.asarray(self.confident_idx, dtype=np.int64)
        self.confident_labels = np.asarray(self.confident_labels, dtype=np.int64)
        self.unconfident_idx = np.asarray(self.unconfident_idx, dtype=np.int64)
        if self.confident_idx.shape != self.confident_labels.shape:
            raise ParameterError("confident indices and labels must align")

    def covers_exactly(self, n: int) -> bool:
        """True iff confident and unconfident together tile {0..n-1}."""
        merged = np.concatenate([self.confident_idx, self.unconfident_idx])
        return merged.size == n and np.array_equal(np.sort(merged), np.arange(n))

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return (
            np.array_equal(self.confident_idx, other.confident_idx)
            and np.array_equal(self.confident_labels, other.confident_labels)
            and np.array_equal(self.unconfident_idx, other.unconfident_idx)
        )


@dataclass(frozen=True)
class PrototypeMatrix:
    """One mean embedding per class with the confident support counts."""

    rows: np.ndarray            # (K, M)
    support_counts: np.ndarray  # (K,) int64


@dataclass(frozen=True)
class CorrectionRecord:
    """Per-sample outcome of one repartition pass."""

    index: int
    d_max: float
    proto_label: int
    prior_label: int
    zone: str    # small | ring | outside
    action: str  # corrected | retained | unmoved
    p_correct: float


@dataclass(frozen=True)
class StatsRow:
    """Correction summary: how many labels moved, and how well."""

    unconfident_size: int
    small_circle: int
    corrected: int
    right: int
    accuracy_pct: float | None  # None when nothing was corrected

    def accuracy_text(self) -> str:
        return "n/a" if self.accuracy_pct is None else f"{self.accuracy_pct:.2f}%"


def split_by_agreement(net: Network, ds: NoisyDataset) -> Partition:
    """Confident = samples whose predicted class matches the working label."""
    preds = np.argmax(net.forward(ds.features), axis=1)
    agree = preds == ds.working_labels
    confident = np.flatnonzero(agree)
    return Partition(
        confident_idx=confident,
        confident_labels=ds.working_labels[confident].copy(),
        unconfident_idx=np.flatnonzero(~agree),
    )


def build_prototypes(net: Network, ds: NoisyDataset, partition: Partition) -> PrototypeMatrix:
    """Mean embedding of the confident samples of each class.

    Raises :class:`DegenerateClassError` if any class has no confident
    samples, since its prototype would be undefined.
    """
    k = ds.num_classes
    counts = np.bincount(partition.confident_labels, minlength=k) \
        if partition.confident_labels.size else np.zeros(k, dtype=np.int64)
    if np.any(counts == 0):
        empty = int(np.argmin(counts))
        raise DegenerateClassError(
            f"class {empty} has no confident samples; prototype undefined",
            class_index=empty,
        )
    embeddings = net.embed(ds.features[partition.confident_idx])
    rows = np.empty((k, net.embed_dim))
    for c in range(k):
        members = embeddings[partition.confident_labels == c]
        # anchor-plus-mean-deviation keeps the all-identical case an
        # exact fixed point of the mean
        anchor = members[0]
        rows[c] = anchor + (members - anchor).mean(axis=0)
    return PrototypeMatrix(rows=rows, support_counts=counts.astype(np.int64))


def cosine_to_rows(vec: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Cosine similarity of one vector against each row of a matrix."""
    vec_norm = np.linalg.norm(vec)
    row_norms = np.linalg.norm(rows, axis=1)
    if vec_norm == 0.0:
        raise DegenerateGeometryError("cosine undefined for a zero embedding")
    if np.any(row_norms == 0.0):
        zero = int(np.argmin(row_norms))
        raise DegenerateGeometryError(f"prototype row {zero} is the zero vector")
    return np.clip((rows @ vec) / (row_norms * vec_norm), -1.0, 1.0)


def similarity_to_prototypes(net: Network, x: np.ndarray,
                             prototypes: PrototypeMatrix) -> np.ndarray:
    """Cosine similarity between the embedding of x and every prototype."""
    return cosine_to_rows(net.embed(x), prototypes.rows)


def correction_probability(d_max: float, thresholds: Thresholds) -> float:
    """Linear ramp over the ring: 0 at beta, 1 at alpha."""
    if not thresholds.beta <= d_max <= thresholds.alpha:
        raise ParameterError(
            f"d_max={d_max} outside the ring [{thresholds.beta}, {thresholds.alpha}]"
        )
    return (d_max - thresholds.beta) / (thresholds.alpha - thresholds.beta)


def repartition(net: Network, ds: NoisyDataset, partition: Partition,
                thresholds: Thresholds, rng: np.random.Generator
                ) -> tuple[Partition, list[CorrectionRecord]]:
    """Resolve every unconfident sample against the class prototypes.

    Prototypes are built once from the incoming partition.  Unconfident
    samples are visited in ascending index order and the rng is consumed
    one uniform draw per ring-zone sample whose prototype class differs
    from its current label, so decisions are reproducible from the seed.
    Corrected labels are written back into ``ds.working_labels``; the
    returned log records one entry per unconfident sample.
    """
    prototypes = build_prototypes(net, ds, partition)
    log: list[CorrectionRecord] = []
    moved_idx: list[int] = []
    moved_labels: list[int] = []
    stay: list[int] = []

    unconf = partition.unconfident_idx
    embeddings = net.embed(ds.features[unconf]) if unconf.size else np.empty((0, net.embed_dim))
    for pos, i in enumerate(unconf):
        sims = cosine_to_rows(embeddings[pos], prototypes.rows)
        proto_label = int(np.argmax(sims))  # ties -> lowest class index
        d_max = float(sims[proto_label])
        prior = int(ds.working_labels[i])

        if d_max >= thresholds.alpha:
            zone, p = "small", 1.0
            action = "retained" if proto_label == prior else "corrected"
        elif d_max >= thresholds.beta:
            zone = "ring"
            p = correction_probability(d_max, thresholds)
            if proto_label == prior:
                action = "retained"
            else:
                action = "corrected" if rng.random() < p else "retained"
        else:
            zone, p, action = "outside", 0.0, "unmoved"

        if action == "corrected":
            ds.working_labels[i] = proto_label
            moved_idx.append(int(i))
            moved_labels.append(proto_label)
        elif action == "retained":
            moved_idx.append(int(i))
            moved_labels.append(prior)
        else:
            stay.append(int(i))
        log.append(CorrectionRecord(int(i), d_max, proto_label, prior, zone, action, p))

    new_idx = np.concatenate([partition.confident_idx, np.array(moved_idx, dtype=np.int64)])
    new_labels = np.concatenate([partition.confident_labels, np.array(moved_labels, dtype=np.int64)])
    order = np.argsort(new_idx)
    return (
        Partition(new_idx[order], new_labels[order], np.array(sorted(stay), dtype=np.int64)),
        log,
    )


def correction_stats(log: list[CorrectionRecord], ds: NoisyDataset) -> StatsRow:
    """Small-circle correction quality, judged against the true labels."""
    small = [r for r in log if r.zone == "small"]
    corrected = [r for r in small if r.action == "corrected"]
    for r in corrected:
        if not 0 <= r.index < ds.n:
            raise FormatError(f"log entry references index {r.index} outside dataset of {ds.n}")
    right = sum(1 for r in corrected if r.proto_label == ds.true_labels[r.index])
    accuracy = 100.0 * right / len(corrected) if corrected else None
    return StatsRow(
        unconfident_size=len(log),
        small_circle=len(small),
        corrected=len(corrected),
        right=right,
        accuracy_pct=accuracy,
    )


def save_correction_log(log: list[CorrectionRecord], ds: NoisyDataset, path) -> None:
    """CSV export of a repartition log, one row per unconfident sample."""
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_COLUMNS)
        for r in log:
            writer.writerow([
                r.index, repr(r.d_max), r.proto_label, r.prior_label,
                r.zone, r.action, repr(r.p_correct), int(ds.true_labels[r.index]),
            ])


def load_correction_log(path) -> list[CorrectionRecord]:
    """Read a CSV written by :func:`save_correction_log`."""
    records: list[CorrectionRecord] = []
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(LOG_COLUMNS):
            raise FormatError(f"{path}: bad header {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(LOG_COLUMNS):
                raise FormatError(f"line {lineno}: expected {len(LOG_COLUMNS)} fields")
            try:
                rec = CorrectionRecord(
                    index=int(row[0]),
                    d_max=float(row[1]),
                    proto_label=int(row[2]),
                    prior_label=int(row[3]),
                    zone=row[4],
                    action=row[5],
                    p_correct=float(row[6]),
                )
            except ValueError:
                raise FormatError(f"line {lineno}: unparsable field") from None
            if rec.zone not in ZONES or rec.action not in ACTIONS:
                raise FormatError(f"line {lineno}: unknown zone or action")
            if rec.index < 0:
                raise FormatError(f"line {lineno}: negative index")
            records.append(rec)
    return records
