"""Plot-ready CSV writers and the matplotlib figures rendered next to them."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from supwatt.evaluation import EvaluationReport, Recommendation, SweepRow

__all__ = [
    "save_sweep_csv",
    "save_sweep_figure",
    "save_metrics_csv",
    "save_metrics_figure",
    "save_recommendations_jsonl",
]

# Stable metadata keeps repeated runs byte-identical.
_PNG_METADATA = {"Software": "supwatt"}


def _fmt(x: float) -> str:
    return repr(float(x))


def save_sweep_csv(rows: Sequence[SweepRow], path) -> None:
    lines = ["n,mean_detections,std_detections"]
    lines += [f"{r.n},{_fmt(r.mean_detections)},{_fmt(r.std_detections)}" for r in rows]
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def save_sweep_figure(rows: Sequence[SweepRow], path, title: str = "") -> None:
    n = [r.n for r in rows]
    mean = [r.mean_detections for r in rows]
    std = [r.std_detections for r in rows]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.errorbar(n, mean, yerr=std, marker="o", markersize=3, capsize=2, lw=1)
    ax.axhline(1.0, color="grey", lw=0.8, ls="--")
    ax.set_xlabel("reference pattern size n (samples)")
    ax.set_ylabel("mean detected activations per day")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)


def save_metrics_csv(report: EvaluationReport, path) -> None:
    lines = ["appliance,mode,precision,recall,f1"]
    for appliance in sorted(report.per_appliance):
        for mode, m in sorted(report.per_appliance[appliance].items()):
            lines.append(
                f"{appliance},{mode},{_fmt(m.precision)},{_fmt(m.recall)},{_fmt(m.f1)}"
            )
    for mode, m in sorted(report.per_mode.items()):
        lines.append(f"all,{mode},{_fmt(m.precision)},{_fmt(m.recall)},{_fmt(m.f1)}")
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def save_metrics_figure(report: EvaluationReport, path, title: str = "") -> None:
    appliances = sorted(report.per_appliance)
    modes = sorted(report.per_mode)
    fig, axes = plt.subplots(
        1, max(len(appliances), 1), figsize=(3.2 * max(len(appliances), 1), 3.6), sharey=True
    )
    if len(appliances) <= 1:
        axes = [axes]
    width = 0.25
    for ax, appliance in zip(axes, appliances):
        mm = report.per_appliance[appliance]
        xs = range(len(modes))
        ax.bar([x - width for x in xs], [mm[m].precision for m in modes], width, label="precision")
        ax.bar(list(xs), [mm[m].recall for m in modes], width, label="recall")
        ax.bar([x + width for x in xs], [mm[m].f1 for m in modes], width, label="f1")
        ax.set_xticks(list(xs))
        ax.set_xticklabels(modes, rotation=20)
        ax.set_ylim(0, 1.05)
        ax.set_title(appliance)
        ax.grid(axis="y", alpha=0.3)
    axes[0].set_ylabel("score")
    axes[-1].legend(loc="lower right", fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)


def save_recommendations_jsonl(recommendations: Sequence[Recommendation], path) -> None:
    lines = [
        json.dumps(
            {
                "t_on": r.t_on,
                "mode": r.mode_id,
                "tier": r.tier,
                "advice": list(r.advice),
                "detail": r.detail,
            },
            sort_keys=True,
        )
        for r in recommendations
    ]
    Path(path).write_bytes(("\n".join(lines) + ("\n" if lines else "")).encode("utf-8"))
