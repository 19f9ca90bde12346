"""Evaluation: accuracy, binned Overconfidence Error and Expected Calibration
Error, and per-sample diagnostic records (score/loss scatter data)."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .model import MlpModel, predict_proba
from .sampling import score_rankedms


@dataclass(frozen=True)
class EvalRecord:
    sample_index: int
    true_label: int
    predicted_label: int
    confidence: float  # max posterior probability
    certainty_score: float  # rank-weighted margin of the posterior
    xent_loss: float  # cross-entropy against the true label

    def __post_init__(self):
        if not 0.0 < self.confidence <= 1.0:
            raise ValueError(f"confidence must be in (0, 1], got {self.confidence}")
        if self.xent_loss < 0.0 or not math.isfinite(self.xent_loss):
            raise ValueError(f"cross-entropy loss must be finite and >= 0, got {self.xent_loss}")


@dataclass(frozen=True)
class BinStats:
    bin_low: float
    bin_high: float
    count: int
    mean_confidence: float
    accuracy: float


def _bin_index(confidence: float, num_bins: int) -> int:
    # half-open bins (low, high] partitioning (0, 1]; an edge value belongs to
    # the bin it tops
    idx = math.ceil(confidence * num_bins) - 1
    return min(num_bins - 1, max(0, idx))


def bin_stats(records, num_bins: int = 10) -> list[BinStats]:
    """Equal-width confidence-bin statistics over (0, 1]."""
    records = list(records)
    if not records:
        raise ValueError("no records to bin")
    if num_bins < 1:
        raise ValueError(f"num_bins must be >= 1, got {num_bins}")
    confidences = [[] for _ in range(num_bins)]
    correct = [0] * num_bins
    for r in records:
        k = _bin_index(r.confidence, num_bins)
        confidences[k].append(r.confidence)
        correct[k] += int(r.predicted_label == r.true_label)
    out = []
    for k in range(num_bins):
        count = len(confidences[k])
        # fsum is exactly rounded, so the stats are independent of record order
        mean_conf = math.fsum(confidences[k]) / count if count else 0.0
        acc = correct[k] / count if count else 0.0
        out.append(BinStats(k / num_bins, (k + 1) / num_bins, count, mean_conf, acc))
    return out


def accuracy(records) -> float:
    """Fraction of records whose prediction matches the true label."""
    records = list(records)
    if not records:
        raise ValueError("no records to score")
    hits = sum(int(r.predicted_label == r.true_label) for r in records)
    return hits / len(records)


def overconfidence_error(records, num_bins: int = 10) -> float:
    """Binned overconfidence: sum over bins of
    weight * confidence * max(confidence - accuracy, 0)."""
    records = list(records)
    stats = bin_stats(records, num_bins)
    n = len(records)
    return sum(
        (s.count / n) * s.mean_confidence * max(s.mean_confidence - s.accuracy, 0.0)
        for s in stats
        if s.count
    )


def expected_calibration_error(records, num_bins: int = 10) -> float:
    """Binned mean absolute confidence/accuracy gap."""
    records = list(records)
    stats = bin_stats(records, num_bins)
    n = len(records)
    return sum(
        (s.count / n) * abs(s.mean_confidence - s.accuracy) for s in stats if s.count
    )


def evaluate(model: MlpModel, test: Dataset) -> list[EvalRecord]:
    """One diagnostic record per test sample from a single deterministic pass."""
    probs = predict_proba(model, test.features)
    records = []
    for i in range(test.n):
        row = probs[i]
        pred = int(np.argmax(row))
        true = test.labels[i]
        p_true = float(row[true])
        records.append(
            EvalRecord(
                sample_index=i,
                true_label=true,
                predicted_label=pred,
                confidence=float(row[pred]),
                certainty_score=score_rankedms(row),
                xent_loss=float(-np.log(max(p_true, 1e-300))),
            )
        )
    return records


def save_records_csv(records, path) -> None:
    """Per-sample dump: index,true,pred,confidence,rankedms,xent."""
    records = list(records)
    if not records:
        raise ValueError("no records to write")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "true", "pred", "confidence", "rankedms", "xent"])
        for r in records:
            writer.writerow(
                [
                    r.sample_index,
                    r.true_label,
                    r.predicted_label,
                    repr(r.confidence),
                    repr(r.certainty_score),
                    repr(r.xent_loss),
                ]
            )
