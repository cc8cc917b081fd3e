"""Render the delimited plot-data files to PNG figures.

The regression and simulation commands emit data-only CSVs; this module is
the one place those tables are drawn. The Agg backend is forced so rendering
works headless, and the PNG ``Software`` tag is pinned so a rerun on the same
inputs produces byte-identical files.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_PNG_METADATA = {"Software": "brett"}
_DPI = 100

INTERVAL_HEADER = ["topic", "level", "estimate", "lower", "upper"]
MSE_HEADER = ["n_docs", "words_per_doc", "strategy", "mse"]


def _read_table(path, expected_header):
    with open(path, "r", encoding="utf-8", newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows or rows[0] != expected_header:
        raise ValueError(
            f"{path}: expected header {','.join(expected_header)!r}, "
            f"got {','.join(rows[0]) if rows else '<empty file>'!r}"
        )
    body = [row for row in rows[1:] if row]
    if not body:
        raise ValueError(f"{path}: no data rows")
    if any(len(row) != len(expected_header) for row in body):
        raise ValueError(f"{path}: rows must have {len(expected_header)} fields")
    return body


def _save(fig, out_png):
    out_png = Path(out_png)
    out_png.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_png, dpi=_DPI, metadata=_PNG_METADATA)
    plt.close(fig)
    return out_png


def render_interval_plot(plot_data_csv, out_png, title="predicted topic share"):
    """Draw estimates with interval whiskers per covariate level.

    Expects columns ``topic,level,estimate,lower,upper``; empty lower/upper
    cells (a run without intervals) draw points only. One series per topic,
    covariate levels along the x axis in file order.
    """
    body = _read_table(plot_data_csv, INTERVAL_HEADER)
    levels: list = []
    series: dict = {}
    for topic, level, est, lo, hi in body:
        if level not in levels:
            levels.append(level)
        series.setdefault(topic, {})[level] = (
            float(est),
            float(lo) if lo else None,
            float(hi) if hi else None,
        )

    fig, ax = plt.subplots(figsize=(1.2 + 1.1 * len(levels), 4.0))
    x = range(len(levels))
    for k, (topic, by_level) in enumerate(sorted(series.items())):
        # spread multiple topics slightly around each level's tick
        shift = 0.0 if len(series) == 1 else (k - (len(series) - 1) / 2.0) * 0.12
        xs = [i + shift for i, lv in enumerate(levels) if lv in by_level]
        points = [by_level[lv] for lv in levels if lv in by_level]
        est = [p[0] for p in points]
        if all(p[1] is not None and p[2] is not None for p in points):
            err = [
                [e - p[1] for e, p in zip(est, points)],
                [p[2] - e for e, p in zip(est, points)],
            ]
            ax.errorbar(xs, est, yerr=err, fmt="o", capsize=4, label=topic)
        else:
            ax.plot(xs, est, "o", label=topic)
    ax.set_xticks(list(x))
    ax.set_xticklabels(levels, rotation=20, ha="right")
    ax.set_xlabel("covariate level")
    ax.set_ylabel("estimate")
    ax.set_title(title)
    if len(series) > 1:
        ax.legend(title="topic", fontsize="small")
    fig.tight_layout()
    return _save(fig, out_png)


def render_mse_plot(mse_table_csv, out_png, title="effect recovery error"):
    """Draw replicate-averaged error against words per document.

    Expects columns ``n_docs,words_per_doc,strategy,mse``; one panel per
    document count, one line per strategy, log-scaled error axis.
    """
    body = _read_table(mse_table_csv, MSE_HEADER)
    table: dict = {}
    for n_docs, words, strategy, mse in body:
        table.setdefault(int(n_docs), {}).setdefault(strategy, []).append(
            (int(words), float(mse))
        )

    doc_counts = sorted(table)
    fig, axes = plt.subplots(
        len(doc_counts), 1, figsize=(5.5, 2.8 * len(doc_counts)),
        sharex=True, squeeze=False,
    )
    for ax, n_docs in zip(axes.ravel(), doc_counts):
        for strategy in sorted(table[n_docs]):
            pairs = sorted(table[n_docs][strategy])
            ax.plot([p[0] for p in pairs], [p[1] for p in pairs],
                    marker="o", label=strategy)
        ax.set_yscale("log")
        ax.set_ylabel("MSE")
        ax.set_title(f"{n_docs} documents", fontsize="medium")
        ax.legend(fontsize="small")
    axes.ravel()[-1].set_xlabel("words per document")
    fig.suptitle(title)
    fig.tight_layout()
    return _save(fig, out_png)
