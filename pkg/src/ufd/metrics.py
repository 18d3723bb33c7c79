"""Detection metrics: average precision, thresholded accuracy, calibration.

Fake is the positive class throughout. A decision is fake iff score >
threshold (strictly), so ties stay real. Scores arrive as (score, truth)
pairs; truth coerces through labels.as_label.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import EmptyInput, NonFiniteValue, SingleClassInput
from .labels import Label, as_label


class LabeledScore(NamedTuple):
    score: float
    truth: Label


def _split(pairs: Iterable) -> tuple[np.ndarray, np.ndarray]:
    scores = []
    truths = []
    for score, truth in pairs:
        scores.append(float(score))
        truths.append(int(as_label(truth)))
    if not scores:
        raise EmptyInput("no scored samples")
    s = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(s)):
        raise NonFiniteValue("scores contain NaN or infinity")
    return s, np.asarray(truths, dtype=np.uint8)


def _require_both_classes(truths: np.ndarray) -> tuple[int, int]:
    n_fake = int(truths.sum())
    n_real = truths.size - n_fake
    if n_real == 0 or n_fake == 0:
        raise SingleClassInput("need at least one real and one fake sample")
    return n_real, n_fake


def _sweep_groups(scores: np.ndarray, truths: np.ndarray):
    """Descending sweep over distinct score values.

    Equal scores enter as one atomic group. Returns cumulative true-positive
    and predicted-positive counts at each group boundary.
    """
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    t = truths[order]
    # last position of each distinct value
    is_end = np.empty(s.size, dtype=bool)
    is_end[:-1] = s[:-1] != s[1:]
    is_end[-1] = True
    ends = np.flatnonzero(is_end)
    tp = np.cumsum(t, dtype=np.int64)[ends]
    pp = ends + 1
    return s[ends], tp, pp


def pr_curve(pairs: Iterable) -> list[tuple[float, float]]:
    """(recall, precision) points, one per distinct score, plus (1.0, base rate).

    Points follow the sweep from the highest score down, so recall is
    non-decreasing along the list. Needs at least one fake sample; an all-fake
    input is fine (precision pins at 1).
    """
    scores, truths = _split(pairs)
    n_fake = int(truths.sum())
    n_real = truths.size - n_fake
    if n_fake == 0:
        raise SingleClassInput("recall is undefined with no fake samples")
    _, tp, pp = _sweep_groups(scores, truths)
    recall = tp / n_fake
    precision = tp / pp
    points = list(zip(recall.tolist(), precision.tolist()))
    base_rate = n_fake / (n_fake + n_real)
    if points[-1] != (1.0, base_rate):
        points.append((1.0, base_rate))
    return points


def average_precision(pairs: Iterable, *, convention: str = "step") -> float:
    """Area under precision-recall, fake positive.

    "step" (default): sum of (R_n - R_{n-1}) * P_n over sweep groups, no
    interpolation. "11point": mean of max precision at recall >= r for
    r in {0.0, 0.1, ..., 1.0}.
    """
    scores, truths = _split(pairs)
    n_real, n_fake = _require_both_classes(truths)
    _, tp, pp = _sweep_groups(scores, truths)
    recall = tp / n_fake
    precision = tp / pp
    if convention == "step":
        prev = np.concatenate([[0.0], recall[:-1]])
        return float(np.sum((recall - prev) * precision))
    if convention == "11point":
        # interpolated precision: max precision at any recall >= r
        interp = np.maximum.accumulate(precision[::-1])[::-1]
        levels = np.arange(11) / 10.0  # linspace would give dirty 0.30000000000000004
        # first sweep point whose recall covers the level
        pos = np.searchsorted(recall, levels, side="left")
        vals = [float(interp[p]) if p < interp.size else 0.0 for p in pos]
        return float(np.mean(vals))
    raise ValueError(f"unknown AP convention: {convention!r}")


def accuracy_at_threshold(pairs: Iterable, threshold: float) -> tuple[float, float, float]:
    """(accuracy, real_accuracy, fake_accuracy) deciding fake iff score > threshold.

    With equal class counts the accuracy is computed as the mean of the two
    class accuracies, so that identity holds exactly. A missing class yields
    NaN for its side and plain pooled accuracy overall.
    """
    scores, truths = _split(pairs)
    fake_mask = truths == 1
    pred_fake = scores > threshold
    n_fake = int(fake_mask.sum())
    n_real = truths.size - n_fake
    correct_fake = int(np.count_nonzero(pred_fake & fake_mask))
    correct_real = int(np.count_nonzero(~pred_fake & ~fake_mask))
    fake_acc = correct_fake / n_fake if n_fake else float("nan")
    real_acc = correct_real / n_real if n_real else float("nan")
    if n_real == n_fake and n_real > 0:
        acc = (real_acc + fake_acc) / 2.0
    else:
        acc = (correct_real + correct_fake) / truths.size
    return acc, real_acc, fake_acc


def _balanced_accuracy_curve(
    candidates: np.ndarray, real_sorted: np.ndarray, fake_sorted: np.ndarray
) -> np.ndarray:
    # reals are correct when score <= t, fakes when score > t
    r_ok = np.searchsorted(real_sorted, candidates, side="right")
    f_ok = fake_sorted.size - np.searchsorted(fake_sorted, candidates, side="right")
    return (r_ok / real_sorted.size + f_ok / fake_sorted.size) / 2.0


def threshold_candidates(scores: np.ndarray) -> np.ndarray:
    """Distinct scores, midpoints between neighbors, and +-1 sentinels."""
    distinct = np.unique(scores)
    mids = (distinct[:-1] + distinct[1:]) / 2.0
    lo = distinct[0] - 1.0
    hi = distinct[-1] + 1.0
    return np.unique(np.concatenate([[lo], distinct, mids, [hi]]))


def calibrate_threshold(pairs: Iterable) -> tuple[float, float]:
    """Threshold maximizing balanced accuracy over the candidate set.

    Candidates are the distinct scores, midpoints between adjacent distinct
    scores, and one sentinel below/above everything; no other threshold can
    beat the best of these. Ties prefer the candidate nearest the midpoint of
    the observed score range, then the smallest. Returns (threshold,
    balanced_accuracy).
    """
    scores, truths = _split(pairs)
    _require_both_classes(truths)
    real_sorted = np.sort(scores[truths == 0])
    fake_sorted = np.sort(scores[truths == 1])
    cands = threshold_candidates(scores)
    bal = _balanced_accuracy_curve(cands, real_sorted, fake_sorted)
    best = bal.max()
    tied = cands[bal == best]
    mid = (scores.min() + scores.max()) / 2.0
    gap = np.abs(tied - mid)
    tied = tied[gap == gap.min()]
    return float(tied.min()), float(best)


@dataclass(frozen=True)
class EvalReport:
    """Per-test-set evaluation summary."""

    ap: float
    accuracy: float
    real_accuracy: float
    fake_accuracy: float
    threshold: float
    threshold_source: str  # "oracle" | "validation" | "fixed"
    pr_curve: tuple[tuple[float, float], ...]
    counts: tuple[int, int]  # (n_real, n_fake)

    def to_dict(self) -> dict:
        return {
            "ap": self.ap,
            "accuracy": self.accuracy,
            "real_accuracy": self.real_accuracy,
            "fake_accuracy": self.fake_accuracy,
            "threshold": self.threshold,
            "threshold_source": self.threshold_source,
            "pr_curve": [list(p) for p in self.pr_curve],
            "counts": {"real": self.counts[0], "fake": self.counts[1]},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "EvalReport":
        return cls(
            ap=float(d["ap"]),
            accuracy=float(d["accuracy"]),
            real_accuracy=float(d["real_accuracy"]),
            fake_accuracy=float(d["fake_accuracy"]),
            threshold=float(d["threshold"]),
            threshold_source=str(d["threshold_source"]),
            pr_curve=tuple((float(r), float(p)) for r, p in d["pr_curve"]),
            counts=(int(d["counts"]["real"]), int(d["counts"]["fake"])),
        )


def evaluate_at(pairs: Sequence, threshold: float, source: str = "fixed", *,
                ap_convention: str = "step") -> EvalReport:
    """EvalReport at a given threshold (source records where it came from)."""
    pairs = list(pairs)
    scores, truths = _split(pairs)
    n_real, n_fake = _require_both_classes(truths)
    acc, r_acc, f_acc = accuracy_at_threshold(pairs, threshold)
    return EvalReport(
        ap=average_precision(pairs, convention=ap_convention),
        accuracy=acc,
        real_accuracy=r_acc,
        fake_accuracy=f_acc,
        threshold=float(threshold),
        threshold_source=source,
        pr_curve=tuple(pr_curve(pairs)),
        counts=(n_real, n_fake),
    )


def oracle_evaluate(pairs: Sequence, *, ap_convention: str = "step") -> EvalReport:
    """Evaluate at the best-achievable balanced-accuracy threshold (upper bound)."""
    pairs = list(pairs)
    threshold, _ = calibrate_threshold(pairs)
    return evaluate_at(pairs, threshold, "oracle", ap_convention=ap_convention)


def aggregate_map(reports: Mapping[str, EvalReport]) -> float:
    """Mean AP across test sets (simple mean, stable summation order by key order)."""
    if not reports:
        raise EmptyInput("no reports to aggregate")
    total = 0.0
    for rep in reports.values():
        total += rep.ap
    return total / len(reports)


def aggregate_accuracy(reports: Mapping[str, EvalReport]) -> float:
    """Mean accuracy across test sets."""
    if not reports:
        raise EmptyInput("no reports to aggregate")
    total = 0.0
    for rep in reports.values():
        total += rep.accuracy
    return total / len(reports)
