"""Prefix-bias measurements over scoring-layer weights.

Two views of where a scorer puts its weight:

* contributions C_i: Monte Carlo mean of |a_i . X_i| over aligned-feature
  samples, normalized to sum to one;
* prefix concentration rho(k): the share of total row norm carried by the
  first k positions, with the excess area over the identity line as a
  one-number summary.

For eps-kind weights every row is the same vector, so rho(k) = k/m with
no arithmetic involved: the norms cancel algebraically and we return the
ratio directly.  That keeps the identity exact instead of merely close.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from pobkit.util import atomic_write_text

KINDS = ("baseline", "eps")


class DiagnosticsError(ValueError):
    pass


@dataclass(frozen=True)
class ScoringWeights:
    """Final-layer weight matrix A (rows a_1..a_m) plus bias, tagged by kind."""

    kind: str
    rows: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scorer kind {self.kind!r}")
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
            raise ValueError(f"rows must be a nonempty 2-d matrix, got {rows.shape}")
        if not np.all(np.isfinite(rows)):
            raise ValueError("rows contain non-finite values")
        if self.kind == "eps" and not (rows == rows[0]).all():
            raise ValueError("eps-kind weights must have identical rows")
        object.__setattr__(self, "rows", rows)

    @property
    def m(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    @classmethod
    def eps(cls, w, m: int, bias: float = 0.0) -> "ScoringWeights":
        w = np.asarray(w, dtype=float).reshape(-1)
        return cls("eps", np.tile(w, (m, 1)), bias)


@dataclass(frozen=True)
class AlignedFeatureSample:
    """Feature matrix X (rows X_1..X_m); rows past valid_length are zero padding."""

    features: np.ndarray
    valid_length: int

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=float)
        if feats.ndim != 2:
            raise ValueError("features must be 2-d")
        if not 0 <= self.valid_length <= feats.shape[0]:
            raise ValueError(
                f"valid_length {self.valid_length} outside [0, {feats.shape[0]}]"
            )
        if self.valid_length < feats.shape[0]:
            if np.any(feats[self.valid_length :] != 0.0):
                raise ValueError("padding rows beyond valid_length must be zero")
        object.__setattr__(self, "features", feats)


def weight_norms(weights: ScoringWeights) -> np.ndarray:
    return np.linalg.norm(weights.rows, axis=1)


def prefix_concentration(weights: ScoringWeights, k: int) -> float:
    """rho(k): fraction of summed row norms in positions 1..k."""
    m = weights.m
    if not 1 <= k <= m:
        raise ValueError(f"k must be in [1, {m}], got {k}")
    norms = weight_norms(weights)
    total = norms.sum()
    if total == 0.0:
        raise DiagnosticsError("rho is undefined for all-zero weights")
    if weights.kind == "eps":
        return k / m
    return float(norms[:k].sum() / total)


def contributions(
    weights: ScoringWeights, samples: list[AlignedFeatureSample]
) -> np.ndarray:
    """Normalized mean absolute per-position score contribution.

    C_i = mean_s |a_i . X_i^(s)|, scaled so the vector sums to one.
    """
    if not samples:
        raise DiagnosticsError("contributions need at least one sample")
    raw = np.zeros(weights.m)
    for sample in samples:
        if sample.features.shape != weights.rows.shape:
            raise DiagnosticsError(
                f"sample shape {sample.features.shape} does not match weights "
                f"{weights.rows.shape}"
            )
        raw += np.abs(np.einsum("ij,ij->i", weights.rows, sample.features))
    raw /= len(samples)
    total = raw.sum()
    if total == 0.0:
        raise DiagnosticsError("all contributions are zero, cannot normalize")
    return raw / total


@dataclass(frozen=True)
class ConcentrationCurve:
    """Points (k, k/m, rho(k)) for k = 1..m and the summary excess area."""

    points: tuple[tuple[int, float, float], ...]
    excess_area: float

    @property
    def m(self) -> int:
        return len(self.points)


def concentration_curve(weights: ScoringWeights) -> ConcentrationCurve:
    """rho(k) for every k, plus excess area sum_k (rho(k) - k/m) / m."""
    m = weights.m
    if weight_norms(weights).sum() == 0.0:
        raise DiagnosticsError("rho is undefined for all-zero weights")
    if weights.kind == "eps":
        points = tuple((k, k / m, k / m) for k in range(1, m + 1))
        return ConcentrationCurve(points, 0.0)
    norms = weight_norms(weights)
    rho = np.cumsum(norms) / norms.sum()
    points = tuple((k, k / m, float(rho[k - 1])) for k in range(1, m + 1))
    excess = float(sum(r - f for _, f, r in points) / m)
    return ConcentrationCurve(points, excess)


def write_contributions_csv(path, norms, contrib) -> None:
    norms = np.asarray(norms, dtype=float)
    contrib = np.asarray(contrib, dtype=float)
    if norms.shape != contrib.shape:
        raise ValueError("norms and contributions differ in length")
    lines = ["i,norm,C_i"]
    for i, (n, c) in enumerate(zip(norms, contrib), start=1):
        lines.append(f"{i},{float(n)!r},{float(c)!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_contributions_csv(path) -> tuple[np.ndarray, np.ndarray]:
    norms, contrib = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["i", "norm", "C_i"]:
            raise DiagnosticsError(f"unexpected header {reader.fieldnames} in {path}")
        for expect, row in enumerate(reader, start=1):
            if int(row["i"]) != expect:
                raise DiagnosticsError(f"positions out of order at i={row['i']}")
            norms.append(float(row["norm"]))
            contrib.append(float(row["C_i"]))
    return np.array(norms), np.array(contrib)


def write_concentration_csv(path, curve: ConcentrationCurve) -> None:
    lines = ["k,k_over_m,rho"]
    for k, frac, rho in curve.points:
        lines.append(f"{k},{float(frac)!r},{float(rho)!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_concentration_csv(path) -> ConcentrationCurve:
    points = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["k", "k_over_m", "rho"]:
            raise DiagnosticsError(f"unexpected header {reader.fieldnames} in {path}")
        for expect, row in enumerate(reader, start=1):
            k = int(row["k"])
            if k != expect:
                raise DiagnosticsError(f"curve rows out of order at k={k}")
            points.append((k, float(row["k_over_m"]), float(row["rho"])))
    if not points:
        raise DiagnosticsError(f"no curve points in {path}")
    m = len(points)
    excess = float(sum(r - f for _, f, r in points) / m)
    return ConcentrationCurve(tuple(points), excess)
