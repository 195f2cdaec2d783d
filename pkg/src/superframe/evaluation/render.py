from __future__ import annotations

import csv
import io
import json
import logging
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .report import MetricReport

__all__ = [
    "TABLE_ROWS",
    "load_reference",
    "report_columns",
    "reference_columns",
    "merged_rows",
    "render_table",
    "table_csv",
    "plot_per_frame",
    "plot_training_log",
]

logger = logging.getLogger(__name__)

# (label, aggregate key) in display order
TABLE_ROWS = (
    ("PSNR", "psnr"),
    ("LPIPS x10", "lpips_x10"),
    ("tOF", "tof"),
    ("SSIM", "ssim"),
    ("tLP x100", "tlp_x100"),
)


def load_reference() -> dict[str, Any]:
    """The published reference table shipped with the package."""
    text = resources.files("superframe.evaluation").joinpath("reference.json").read_text()
    return json.loads(text)


def report_columns(reports: Sequence[MetricReport], labels: Sequence[str] | None = None):
    """``(label, values)`` columns of computed reports."""
    labels = labels if labels is not None else [r.model for r in reports]
    return [(label, r.aggregate()) for label, r in zip(labels, reports)]


def reference_columns(dataset: str, reference: dict[str, Any] | None = None):
    """``(label, values)`` columns of the published rows for ``dataset``."""
    reference = reference if reference is not None else load_reference()
    rows = reference["datasets"].get(dataset)
    if rows is None:
        raise ValueError(
            f"No published reference for {dataset!r}; "
            f"available: {sorted(reference['datasets'])}"
        )
    return [(f"{name} ({reference['label']})", values) for name, values in rows.items()]


def merged_rows(columns) -> list[dict[str, Any]]:
    """One row per metric with one entry per column."""
    rows = []
    for label, key in TABLE_ROWS:
        row = {"metric": label}
        for name, values in columns:
            row[name] = values.get(key)
        rows.append(row)
    return rows


def _fmt(value: Any) -> str:
    if value is None:
        return "NA"
    if isinstance(value, str):
        return value
    return f"{value:.4g}" if abs(value) < 1 else f"{value:.2f}"


def render_table(columns) -> str:
    """A plain-text table with metrics as rows and models as columns."""
    rows = merged_rows(columns)
    header = ["metric"] + [name for name, _ in columns]
    cells = [[_fmt(row[h]) if h != "metric" else row[h] for h in header] for row in rows]
    widths = [max(len(h), *(len(c[i]) for c in cells)) for i, h in enumerate(header)]
    lines = [" | ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines.append("-+-".join("-" * w for w in widths))
    lines += [" | ".join(c.ljust(w) for c, w in zip(cell, widths)) for cell in cells]
    return "\n".join(lines) + "\n"


def table_csv(columns) -> str:
    buffer = io.StringIO()
    header = ["metric"] + [name for name, _ in columns]
    writer = csv.DictWriter(buffer, fieldnames=header, lineterminator="\n")
    writer.writeheader()
    for row in merged_rows(columns):
        writer.writerow({k: "" if v is None else v for k, v in row.items()})
    return buffer.getvalue()


def plot_per_frame(
    reports: Sequence[MetricReport],
    out_dir: str | Path,
    metrics: Sequence[str] = ("psnr", "ssim"),
    labels: Sequence[str] | None = None,
) -> list[Path]:
    """
    Writes one PNG per scene and metric with a per-frame curve for every
    report, named ``<metric>_<scene>.png``. Infinite PSNR values are skipped.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    labels = labels if labels is not None else [r.model for r in reports]
    scene_ids = sorted({s for r in reports for s in r.scene_ids})
    paths = []
    for metric in metrics:
        for scene_id in scene_ids:
            fig, ax = plt.subplots(figsize=(6, 3.5))
            for label, report in zip(labels, reports):
                for scene in report.scenes:
                    if scene.scene_id != scene_id:
                        continue
                    points = [
                        (t, v)
                        for t, v in zip(scene.spatial_indices, getattr(scene, metric))
                        if v != float("inf")
                    ]
                    if points:
                        ax.plot(*zip(*points), marker=".", label=label)
            ax.set_xlabel("frame")
            ax.set_ylabel(metric.upper())
            ax.set_title(scene_id)
            ax.legend(fontsize="small")
            fig.tight_layout()
            path = out_dir / f"{metric}_{scene_id.replace('/', '_')}.png"
            fig.savefig(path, dpi=100)
            plt.close(fig)
            paths.append(path)
    return paths


def plot_training_log(log_path: str | Path, out_path: str | Path) -> Path:
    """Plots every loss term of a line-delimited JSON training log over steps."""
    records = [
        json.loads(line) for line in Path(log_path).read_text().splitlines() if line.strip()
    ]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    steps = [r["step"] for r in records]
    keys = sorted({k for r in records for k in r.get("terms", {})}) + ["total", "d_loss"]
    for key in keys:
        values = [r["terms"][key] if key in r.get("terms", {}) else r.get(key) for r in records]
        if any(v not in (None, 0.0) for v in values):
            ax.plot(steps, values, label=key)
    ax.set_xlabel("step")
    ax.set_yscale("log")
    ax.legend(fontsize="small")
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=100)
    plt.close(fig)
    return out_path
