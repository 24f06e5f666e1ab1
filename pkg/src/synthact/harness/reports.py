"""Delimited reports, run records, and the figures rendered next to them.

The eval report is a CSV with header `class,precision,recall,f1`, one row
per class, and a final `overall` summary row carrying the micro averages
(for single-label classification all three equal the accuracy). Figures
land beside the CSVs: a confusion heatmap and an F1 bar chart next to an
eval report, a loss curve next to a training loss CSV.
"""

from __future__ import annotations

import hashlib
import json
import platform
from datetime import datetime, timezone

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

from .metrics import Metrics  # noqa: E402


def write_metrics_report(path: str, metrics: Metrics) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("class,precision,recall,f1\n")
        for row in metrics.per_class():
            fh.write(f"{row['class']},{row['precision']:.6f},"
                     f"{row['recall']:.6f},{row['f1']:.6f}\n")
        a = metrics.accuracy
        fh.write(f"overall,{a:.6f},{a:.6f},{a:.6f}\n")


def write_confusion_csv(path: str, metrics: Metrics) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("true\\pred," + ",".join(metrics.classes) + "\n")
        for name, row in zip(metrics.classes, metrics.confusion):
            fh.write(name + "," + ",".join(str(int(v)) for v in row) + "\n")


def figure_confusion(path: str, metrics: Metrics) -> None:
    c = len(metrics.classes)
    fig, ax = plt.subplots(figsize=(1.2 + 0.6 * c, 1.0 + 0.6 * c))
    im = ax.imshow(metrics.confusion, cmap="Blues")
    ax.set_xticks(range(c), metrics.classes, rotation=45, ha="right")
    ax.set_yticks(range(c), metrics.classes)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    vmax = metrics.confusion.max() or 1
    for i in range(c):
        for j in range(c):
            v = int(metrics.confusion[i, j])
            ax.text(j, i, str(v), ha="center", va="center",
                    color="white" if v > vmax / 2 else "black", fontsize=8)
    fig.colorbar(im, ax=ax, shrink=0.8)
    ax.set_title(f"accuracy {metrics.accuracy:.3f}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def figure_f1_bars(path: str, metrics: Metrics) -> None:
    c = len(metrics.classes)
    fig, ax = plt.subplots(figsize=(1.5 + 0.5 * c, 3.2))
    ax.bar(range(c), metrics.f1, color="#4878a8")
    ax.set_xticks(range(c), metrics.classes, rotation=45, ha="right")
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("F1")
    ax.axhline(metrics.accuracy, color="#b05050", linestyle="--", linewidth=1,
               label=f"accuracy {metrics.accuracy:.3f}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def figure_loss_curve(path: str, rows: list) -> None:
    """rows: (step, phase, L_cls, L_adv) as written to the loss CSV."""
    if not rows:
        raise ValueError("no loss rows to plot")
    steps = [r[0] for r in rows]
    l_cls = [r[2] for r in rows]
    fig, ax = plt.subplots(figsize=(6.0, 3.2))
    ax.plot(steps, l_cls, label="L_cls", color="#4878a8", linewidth=1.2)
    if any(r[3] != 0.0 for r in rows):
        ax.plot(steps, [r[3] for r in rows], label="L_adv",
                color="#b05050", linewidth=1.0)
    phases = [r[1] for r in rows]
    for i in range(1, len(phases)):
        if phases[i] != phases[i - 1]:
            ax.axvline(steps[i], color="gray", linestyle=":", linewidth=1)
            ax.text(steps[i], ax.get_ylim()[1], f" {phases[i]}", fontsize=7,
                    va="top", color="gray")
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_run_record(path: str, command: str, config: dict, seed=None) -> dict:
    """Self-describing record of a CLI run, stored next to its outputs."""
    from .. import __version__

    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    record = {
        "command": command,
        "config": config,
        "config_hash": hashlib.sha256(blob.encode()).hexdigest()[:16],
        "seed": seed,
        "version": __version__,
        "python": platform.python_version(),
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return record
