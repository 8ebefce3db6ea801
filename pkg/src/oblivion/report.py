"""Rendering an evaluation report to files.

Alongside the JSON report and the delimited per-record table, the
report directory gets two rendered figures: the headline metrics as a
bar chart and the distribution of per-record recall scores.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evalkit import EvalReport

_CSV_COLUMNS = (
    "target_text",
    "prompt",
    "sent_prompt",
    "hit",
    "target_id",
    "verdict",
    "rouge",
    "error",
    "pre_response",
    "post_response",
)


def _write_json(report: EvalReport, path: Path) -> None:
    path.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")


def _write_csv(report: EvalReport, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(_CSV_COLUMNS)
        for r in report.records:
            writer.writerow(
                [
                    r.target_text,
                    r.prompt,
                    r.sent_prompt,
                    "true" if r.hit else "false",
                    r.target_id or "",
                    r.verdict.value if r.verdict else "",
                    "" if r.rouge is None else f"{r.rouge:.4f}",
                    r.error or "",
                    r.pre_response,
                    r.post_response,
                ]
            )


def _write_metrics_figure(report: EvalReport, path: Path) -> None:
    labels = []
    values = []
    if report.hit_rate is not None:
        labels.append("hit rate")
        values.append(report.hit_rate)
    if report.usr is not None:
        labels.append("USR")
        values.append(report.usr)
    if report.mean_rouge is not None:
        labels.append("mean ROUGE-L / 100")
        values.append(report.mean_rouge / 100.0)

    fig, ax = plt.subplots(figsize=(5, 3.2))
    if values:
        ax.bar(labels, values, color=["#4c72b0", "#55a868", "#c44e52"][: len(values)])
        for i, value in enumerate(values):
            ax.text(i, value + 0.02, f"{value:.3f}", ha="center", fontsize=9)
        ax.set_ylim(0.0, 1.1)
    else:
        ax.text(0.5, 0.5, "no scored records", ha="center", va="center")
        ax.set_axis_off()
    attack = report.attack.value if report.attack else "none"
    ax.set_title(f"forgetting metrics (attack: {attack}, rephrased: {'yes' if report.rephrased else 'no'})")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _write_rouge_figure(report: EvalReport, path: Path) -> None:
    values = [r.rouge for r in report.records if r.error is None and r.rouge is not None]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    if values:
        ax.hist(values, bins=20, range=(0.0, 100.0), color="#4c72b0", edgecolor="black")
        ax.set_xlabel("ROUGE-L recall vs pre-unlearning answer")
        ax.set_ylabel("prompts")
    else:
        ax.text(0.5, 0.5, "no scored records", ha="center", va="center")
        ax.set_axis_off()
    ax.set_title("post-unlearning recall distribution")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(report: EvalReport, out_dir: str | Path) -> list[Path]:
    """Write report.json, records.csv, summary.txt and the figures.

    Returns the paths written, in a fixed order.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": out / "report.json",
        "csv": out / "records.csv",
        "summary": out / "summary.txt",
        "metrics": out / "metrics.png",
        "rouge": out / "rouge_hist.png",
    }
    _write_json(report, paths["json"])
    _write_csv(report, paths["csv"])
    paths["summary"].write_text(report.to_text_table() + "\n", encoding="utf-8")
    _write_metrics_figure(report, paths["metrics"])
    _write_rouge_figure(report, paths["rouge"])
    return list(paths.values())
