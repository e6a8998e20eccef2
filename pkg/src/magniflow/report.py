"""Evaluation reports: delimited metrics plus rendered figures."""

from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .flowcore import MetricReport

METRICS_CSV = "metrics.csv"
METRICS_FIGURE = "metrics.png"
LOSS_FIGURE = "loss.png"


def write_metric_report(out_dir, report: MetricReport) -> dict:
    """Write per-frame metrics as CSV and a figure; returns the file paths."""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, METRICS_CSV)
    frames = max(
        len(report.per_frame_epe), len(report.per_frame_psnr), len(report.per_frame_ssim)
    )
    with open(csv_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["frame", "epe", "psnr", "ssim"])
        for i in range(frames):
            writer.writerow(
                [
                    i + 1,
                    _cell(report.per_frame_epe, i),
                    _cell(report.per_frame_psnr, i),
                    _cell(report.per_frame_ssim, i),
                ]
            )
        writer.writerow(["mean", _fmt(report.epe_mean), _fmt(report.psnr), _fmt(report.ssim)])

    fig_path = os.path.join(out_dir, METRICS_FIGURE)
    series = [
        ("EPE (px)", report.per_frame_epe),
        ("PSNR (dB)", report.per_frame_psnr),
        ("SSIM", report.per_frame_ssim),
    ]
    live = [(label, values) for label, values in series if values]
    fig, axes = plt.subplots(1, max(len(live), 1), figsize=(4 * max(len(live), 1), 3))
    if len(live) <= 1:
        axes = [axes]
    for axis, (label, values) in zip(axes, live or [("(no data)", [])]):
        axis.plot(range(1, len(values) + 1), values, marker="o", markersize=3)
        axis.set_xlabel("frame")
        axis.set_title(label)
        axis.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(fig_path, dpi=110)
    plt.close(fig)
    return {"csv": csv_path, "figure": fig_path}


def render_loss_curve(csv_path, out_path, column: str = "loss") -> str:
    """Plot one numeric column of a training-loss CSV against its steps."""
    steps, values = [], []
    with open(csv_path, newline="") as handle:
        for row in csv.DictReader(handle):
            steps.append(int(row["step"]))
            values.append(float(row[column]))
    fig, axis = plt.subplots(figsize=(5, 3))
    axis.plot(steps, values)
    axis.set_xlabel("step")
    axis.set_ylabel(column)
    if values and min(values) > 0:
        axis.set_yscale("log")
    axis.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=110)
    plt.close(fig)
    return str(out_path)


def summarize(report: MetricReport) -> str:
    parts = []
    if not np.isnan(report.epe_mean):
        parts.append(f"EPE {report.epe_mean:.4f} px")
    if not np.isnan(report.psnr):
        parts.append(f"PSNR {report.psnr:.2f} dB")
    if not np.isnan(report.ssim):
        parts.append(f"SSIM {report.ssim:.4f}")
    return "; ".join(parts) if parts else "(no metrics)"


def _cell(values, index):
    return _fmt(values[index]) if index < len(values) else ""


def _fmt(value) -> str:
    return "" if value is None or np.isnan(value) else f"{value:.6f}"
