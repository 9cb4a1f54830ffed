"""Report rendering: JSON + CSV alongside matplotlib figures and contact sheets."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .metrics import ExperimentReport
from .raster import rasterize
from .sketch import Sketch


def report_table(reports: list[ExperimentReport]) -> str:
    """Fixed-width text table of the headline numbers."""
    header = f"{'experiment':<18} {'mAP(class)':>11} {'mAP(inst)':>10} {'chance(cls)':>12} {'top10':>7}"
    lines = [header, "-" * len(header)]
    for r in reports:
        top10 = f"{r.counterpart_top10_rate:.2f}" if r.counterpart_top10_rate is not None else "-"
        lines.append(
            f"{r.name:<18} {r.map_class:>11.4f} {r.map_instance:>10.4f} {r.chance_map_class:>12.4f} {top10:>7}"
        )
    return "\n".join(lines)


def write_reports(reports: list[ExperimentReport], out_dir) -> dict[str, str]:
    """Emit report.json, report.csv, a text table, and precision@k figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}

    json_path = out / "report.json"
    json_path.write_text(json.dumps([r.to_dict() for r in reports], indent=2))
    paths["json"] = str(json_path)

    csv_path = out / "report.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["experiment", "map_class", "map_instance", "chance_map_class",
                         "chance_map_instance", "counterpart_top10_rate", "seed"])
        for r in reports:
            writer.writerow([r.name, r.map_class, r.map_instance, r.chance_map_class,
                             r.chance_map_instance, r.counterpart_top10_rate, r.seed])
    paths["csv"] = str(csv_path)

    table_path = out / "report.txt"
    table_path.write_text(report_table(reports) + "\n")
    paths["table"] = str(table_path)

    fig, ax = plt.subplots(figsize=(6, 4))
    for r in reports:
        if r.precision_curve_class:
            ks, ps = zip(*r.precision_curve_class)
            ax.plot(ks, ps, marker="o", label=r.name)
    ax.set_xlabel("k")
    ax.set_ylabel("precision@k (class)")
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig_path = out / "precision_at_k.png"
    fig.savefig(fig_path, dpi=120)
    fig.savefig(out / "precision_at_k.svg")
    plt.close(fig)
    paths["figure"] = str(fig_path)
    return paths


def contact_sheet(sequences_by_method: dict[str, list[Sketch]], out_path, raster_size: int = 64) -> str:
    """Grid of rendered suggestion frames: one row per method, one column per step."""
    methods = list(sequences_by_method)
    steps = max(len(v) for v in sequences_by_method.values())
    fig, axes = plt.subplots(len(methods), steps, figsize=(steps * 1.1, len(methods) * 1.2))
    axes = np.atleast_2d(axes)
    for row, method in enumerate(methods):
        frames = sequences_by_method[method]
        for col in range(steps):
            ax = axes[row, col]
            ax.set_xticks([])
            ax.set_yticks([])
            if col < len(frames):
                ax.imshow(1.0 - rasterize(frames[col], raster_size).pixels, cmap="gray", vmin=0, vmax=1)
            if col == 0:
                ax.set_ylabel(method, fontsize=8)
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path)
    plt.close(fig)
    return str(out_path)


def training_curve_figure(curve: list[dict], out_path) -> str:
    """Loss-term trajectories from a training run."""
    keys = [k for k in curve[0] if k not in ("epoch", "diverged")]
    fig, ax = plt.subplots(figsize=(6, 4))
    for key in keys:
        ax.plot([row["epoch"] for row in curve], [row[key] for row in curve], label=key)
    ax.set_xlabel("epoch")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path)
    plt.close(fig)
    return str(out_path)
