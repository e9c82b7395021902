"""Report rendering: a delimited summary and figures next to it.

Takes one or more score-report documents (as produced by the score
subcommand), writes a wide summary.csv plus a per-difference-type CSV, and
renders bar-chart figures with chance levels marked.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .errors import NothingScored
from .scoring import DIFF_TYPES

_METRIC_COLUMNS = (
    ("labeled_s_accuracy", "Labeled-S", 0.25),
    ("vtwt_accuracy", "Two-word 2-AFC", 0.5),
    ("winoground.overall", "Group overall", 1.0 / 6.0),
    ("winoground.positive_context", "Group pos. ctx", 0.25),
    ("winoground.negative_context", "Group neg. ctx", 0.25),
    ("caption_meteor_mean", "Caption METEOR", None),
)


def _metric_value(doc: Mapping, dotted: str) -> float | None:
    node = doc
    for part in dotted.split("."):
        if not isinstance(node, Mapping) or part not in node:
            return None
        node = node[part]
    return float(node)


def write_summary_csv(reports: Mapping[str, Mapping], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] + [key for key, _, _ in _METRIC_COLUMNS])
        for label, doc in reports.items():
            row: list[object] = [label]
            for key, _, _ in _METRIC_COLUMNS:
                value = _metric_value(doc, key)
                row.append("" if value is None else f"{value:.4f}")
            writer.writerow(row)


def write_by_type_csv(reports: Mapping[str, Mapping], path: str | Path) -> bool:
    """Per-difference-type accuracies; returns False when no report has them."""
    rows = []
    for label, doc in reports.items():
        by_type = doc.get("vtwt_by_type") or {}
        counts = (doc.get("counts") or {}).get("vtwt_by_type") or {}
        for diff in DIFF_TYPES:
            if diff in by_type:
                rows.append([label, diff, f"{by_type[diff]:.4f}", counts.get(diff, "")])
    if not rows:
        return False
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "diff_type", "accuracy", "count"])
        writer.writerows(rows)
    return True


def _grouped_bars(ax, labels: Sequence[str], columns: Sequence[str], values) -> None:
    import numpy as np

    x = np.arange(len(columns), dtype=float)
    width = 0.8 / max(1, len(labels))
    for i, label in enumerate(labels):
        offs = x + (i - (len(labels) - 1) / 2.0) * width
        ax.bar(offs, values[i], width=width * 0.92, label=label)
    ax.set_xticks(x)
    ax.set_xticklabels(columns, rotation=20, ha="right", fontsize=8)


def render_score_figure(reports: Mapping[str, Mapping], path: str | Path) -> None:
    labels = list(reports)
    columns = []
    chance_levels = []
    present = []
    for key, title, chance in _METRIC_COLUMNS:
        if any(_metric_value(doc, key) is not None for doc in reports.values()):
            present.append(key)
            columns.append(title)
            chance_levels.append(chance)
    if not present:
        raise NothingScored("no metric present in any report")
    values = [
        [(_metric_value(reports[label], key) or 0.0) for key in present]
        for label in labels
    ]
    fig, ax = plt.subplots(figsize=(1.6 + 1.1 * len(present), 3.4))
    _grouped_bars(ax, labels, columns, values)
    for i, chance in enumerate(chance_levels):
        if chance is not None:
            ax.hlines(chance, i - 0.42, i + 0.42, colors="k", linestyles=":", linewidth=1)
    ax.set_ylim(0, 1)
    ax.set_ylabel("score")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_by_type_figure(reports: Mapping[str, Mapping], path: str | Path) -> bool:
    labels = [label for label, doc in reports.items() if doc.get("vtwt_by_type")]
    if not labels:
        return False
    types = [
        diff
        for diff in DIFF_TYPES
        if any(diff in (reports[label].get("vtwt_by_type") or {}) for label in labels)
    ]
    values = [
        [reports[label]["vtwt_by_type"].get(diff, 0.0) for diff in types]
        for label in labels
    ]
    fig, ax = plt.subplots(figsize=(1.6 + 1.0 * len(types), 3.2))
    _grouped_bars(ax, labels, types, values)
    ax.axhline(0.5, color="k", linestyle=":", linewidth=1)
    ax.set_ylim(0, 1)
    ax.set_ylabel("accuracy")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return True


def render_report(reports: Mapping[str, Mapping], out_dir: str | Path) -> list[Path]:
    """Write summary.csv, by-type CSV and figures; returns the created paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    created = []
    summary = out_dir / "summary.csv"
    write_summary_csv(reports, summary)
    created.append(summary)
    by_type = out_dir / "vtwt_by_type.csv"
    if write_by_type_csv(reports, by_type):
        created.append(by_type)
    scores_png = out_dir / "scores.png"
    render_score_figure(reports, scores_png)
    created.append(scores_png)
    types_png = out_dir / "vtwt_types.png"
    if render_by_type_figure(reports, types_png):
        created.append(types_png)
    return created
