"""EER, AUC, accuracy over score files, and first-diff histograms.

The EER estimator sweeps thresholds over the unique scores (predicting
positive at score >= t), then linearly interpolates FPR and FNR between
the two sweep points that bracket their crossing.  AUC is the
Mann-Whitney statistic computed from midranks, which prices ties at one
half without enumerating pairs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from pobkit.generator import BinSpec
from pobkit.util import atomic_write_text


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class ScoreSet:
    """Scored trials: (id, score, label) with unique ids."""

    entries: tuple[tuple[str, float, bool], ...]

    def __post_init__(self):
        ids = [e[0] for e in self.entries]
        if len(set(ids)) != len(ids):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise MetricError(f"duplicate score id {dup!r}")
        for _, s, _ in self.entries:
            if not np.isfinite(s):
                raise MetricError(f"non-finite score {s!r}")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def scores(self) -> np.ndarray:
        return np.array([s for _, s, _ in self.entries], dtype=float)

    @property
    def labels(self) -> np.ndarray:
        return np.array([l for _, _, l in self.entries], dtype=bool)

    @property
    def n_pos(self) -> int:
        return int(self.labels.sum())

    @property
    def n_neg(self) -> int:
        return len(self) - self.n_pos

    @classmethod
    def from_rows(cls, rows) -> "ScoreSet":
        return cls(tuple((str(i), float(s), bool(l)) for i, s, l in rows))


def write_scores_csv(path, scores: ScoreSet) -> None:
    lines = ["id,score,label"]
    for i, s, l in scores.entries:
        lines.append(f"{i},{float(s)!r},{1 if l else 0}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_scores_csv(path) -> ScoreSet:
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["id", "score", "label"]:
            raise MetricError(f"unexpected score header {reader.fieldnames} in {path}")
        for lineno, row in enumerate(reader, start=2):
            try:
                s = float(row["score"])
            except (TypeError, ValueError) as exc:
                raise MetricError(f"bad score on line {lineno}: {row['score']!r}") from exc
            if row["label"] not in ("0", "1"):
                raise MetricError(f"bad label on line {lineno}: {row['label']!r}")
            rows.append((row["id"], s, row["label"] == "1"))
    return ScoreSet.from_rows(rows)


def _require_both_classes(scores: ScoreSet):
    if scores.n_pos == 0 or scores.n_neg == 0:
        raise MetricError(
            f"need both classes, got {scores.n_pos} positive / {scores.n_neg} negative"
        )


def _sweep(scores: ScoreSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(thresholds, FPR, FNR) at t = each unique score, plus a virtual end.

    Predicting positive at score >= t: the lowest threshold accepts
    everything (FPR 1, FNR 0) and the virtual end accepts nothing.
    """
    s = scores.scores
    y = scores.labels
    thresholds = np.unique(s)
    fpr = np.empty(len(thresholds) + 1)
    fnr = np.empty(len(thresholds) + 1)
    for i, t in enumerate(thresholds):
        pred = s >= t
        fpr[i] = np.sum(pred & ~y) / scores.n_neg
        fnr[i] = np.sum(~pred & y) / scores.n_pos
    fpr[-1] = 0.0
    fnr[-1] = 1.0
    thresholds = np.append(thresholds, thresholds[-1] + 1.0)
    return thresholds, fpr, fnr


def eer_threshold(scores: ScoreSet) -> tuple[float, float]:
    """EER and the interpolated threshold where FPR meets FNR."""
    _require_both_classes(scores)
    thresholds, fpr, fnr = _sweep(scores)
    diff = fpr - fnr
    for i in range(len(diff) - 1):
        if diff[i] == 0.0:
            return float(fpr[i]), float(thresholds[i])
        if diff[i] > 0.0 >= diff[i + 1]:
            d0 = diff[i]
            d1 = -diff[i + 1]
            alpha = d0 / (d0 + d1) if d0 + d1 > 0 else 0.0
            rate = fpr[i] + alpha * (fpr[i + 1] - fpr[i])
            t = thresholds[i] + alpha * (thresholds[i + 1] - thresholds[i])
            return float(rate), float(t)
    # diff starts at +1 (or 0 handled above) and ends at -1, so a sign
    # change always exists; reaching here means a logic error
    raise AssertionError("no FPR/FNR crossing found")


def eer(scores: ScoreSet) -> float:
    return eer_threshold(scores)[0]


def auc(scores: ScoreSet) -> float:
    """P(positive score > negative score) with ties counted 0.5."""
    _require_both_classes(scores)
    s = scores.scores
    y = scores.labels
    order = np.argsort(s, kind="stable")
    ranks = np.empty(len(s))
    sorted_s = s[order]
    i = 0
    while i < len(s):
        j = i
        while j < len(s) and sorted_s[j] == sorted_s[i]:
            j += 1
        ranks[order[i:j]] = 0.5 * (i + 1 + j)  # midrank, 1-based
        i = j
    n_pos = scores.n_pos
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * scores.n_neg))


def accuracy(scores: ScoreSet, threshold: float = 0.5) -> float:
    if len(scores) == 0:
        raise MetricError("empty score set")
    pred = scores.scores >= threshold
    return float(np.mean(pred == scores.labels))


def metrics_summary(scores: ScoreSet, threshold: float = 0.5) -> dict:
    return {
        "eer": eer(scores),
        "auc": auc(scores),
        "acc": accuracy(scores, threshold),
        "threshold": threshold,
        "n_pos": scores.n_pos,
        "n_neg": scores.n_neg,
    }


@dataclass(frozen=True)
class HistogramResult:
    """Per-bin share of in-bin records; out-of-bin records counted aside."""

    bins: BinSpec
    counts: tuple[int, ...]
    overflow_count: int

    @property
    def total_in_bins(self) -> int:
        return sum(self.counts)

    @property
    def ratios(self) -> np.ndarray:
        return np.array([c / self.total_in_bins for c in self.counts])


def first_diff_histogram(records, bins: BinSpec | None = None) -> HistogramResult:
    """Distribution of first_diff_index over the given bins.

    Records falling outside every bin land in the overflow count and do
    not enter the ratio denominator, so the ratios always sum to one.
    """
    bins = bins or BinSpec()
    if not records:
        raise MetricError("no records to bin")
    counts = [0] * len(bins)
    overflow = 0
    for rec in records:
        idx = bins.index_of(rec.first_diff_index)
        if idx is None:
            overflow += 1
        else:
            counts[idx] += 1
    if sum(counts) == 0:
        raise MetricError("every record fell outside the bins")
    return HistogramResult(bins, tuple(counts), overflow)


def write_histogram_csv(path, hist: HistogramResult) -> None:
    lines = ["bin_lo,bin_hi,ratio"]
    for (lo, hi), ratio in zip(hist.bins.edges, hist.ratios):
        lines.append(f"{lo},{hi},{float(ratio)!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_histogram_csv(path) -> tuple[BinSpec, np.ndarray]:
    edges, ratios = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["bin_lo", "bin_hi", "ratio"]:
            raise MetricError(f"unexpected histogram header {reader.fieldnames}")
        for row in reader:
            edges.append((int(row["bin_lo"]), int(row["bin_hi"])))
            ratios.append(float(row["ratio"]))
    if not edges:
        raise MetricError(f"no histogram rows in {path}")
    return BinSpec(tuple(edges)), np.array(ratios)
