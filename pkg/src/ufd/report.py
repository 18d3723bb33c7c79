"""Result tables: one row per method run, one column per test set.

Values are percentages at two decimals. The trailing column is the mean over
test sets (mAP for the ap metric, average accuracy otherwise). Both a CSV and
a fixed-width text rendering are produced from the same numbers.
"""

from __future__ import annotations

from typing import Sequence

from .harness import SuiteResult
from .metrics import EvalReport

METRIC_FIELDS = {
    "ap": ("ap", "mAP"),
    "accuracy": ("accuracy", "avg_acc"),
    "real_accuracy": ("real_accuracy", "avg_real_acc"),
    "fake_accuracy": ("fake_accuracy", "avg_fake_acc"),
}


def _cells(result: SuiteResult, field: str, columns: Sequence[str]) -> list[float]:
    vals = [getattr(result.per_set[c], field) for c in columns]
    total = sum(vals) / len(vals)
    return [v * 100.0 for v in vals] + [total * 100.0]


def table_rows(
    runs: Sequence[tuple[str, SuiteResult]], metric: str = "ap"
) -> tuple[list[str], list[tuple[str, list[float]]]]:
    """(column names incl. trailing mean, [(row label, cell values)]).

    Column order follows the first run's per_set order; every run must cover
    the same test sets.
    """
    if metric not in METRIC_FIELDS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {sorted(METRIC_FIELDS)}")
    if not runs:
        raise ValueError("no runs to tabulate")
    field, total_name = METRIC_FIELDS[metric]
    columns = list(runs[0][1].per_set.keys())
    for label, res in runs:
        if set(res.per_set.keys()) != set(columns):
            raise ValueError(f"run {label!r} covers different test sets")
    rows = [(label, _cells(res, field, columns)) for label, res in runs]
    return columns + [total_name], rows


def render_csv(runs: Sequence[tuple[str, SuiteResult]], metric: str = "ap") -> str:
    header, rows = table_rows(runs, metric)
    lines = ["method," + ",".join(header)]
    for label, cells in rows:
        lines.append(label + "," + ",".join(f"{v:.2f}" for v in cells))
    return "\n".join(lines) + "\n"


def render_text(runs: Sequence[tuple[str, SuiteResult]], metric: str = "ap") -> str:
    header, rows = table_rows(runs, metric)
    labels = ["method"] + [label for label, _ in rows]
    label_w = max(len(s) for s in labels)
    widths = [max(len(h), 6) for h in header]
    out = [
        "method".ljust(label_w)
        + "  "
        + "  ".join(h.rjust(w) for h, w in zip(header, widths))
    ]
    for label, cells in rows:
        out.append(
            label.ljust(label_w)
            + "  "
            + "  ".join(f"{v:.2f}".rjust(w) for v, w in zip(cells, widths))
        )
    return "\n".join(out) + "\n"


def render_breakdown_csv(result: SuiteResult) -> str:
    """Per-set real/fake accuracy split for one run."""
    lines = ["set,real_accuracy,fake_accuracy,accuracy,ap"]
    for name, rep in result.per_set.items():
        lines.append(
            f"{name},{rep.real_accuracy * 100:.2f},{rep.fake_accuracy * 100:.2f},"
            f"{rep.accuracy * 100:.2f},{rep.ap * 100:.2f}"
        )
    return "\n".join(lines) + "\n"


def render_families_csv(result: SuiteResult) -> str:
    lines = ["family,sets,ap,accuracy"]
    for fam, agg in result.family_rollups.items():
        lines.append(f"{fam},{agg['sets']},{agg['ap'] * 100:.2f},{agg['accuracy'] * 100:.2f}")
    return "\n".join(lines) + "\n"
