"""Rendering evaluation and benchmark results: records, tables, figures.

Three output styles share the same inputs. Tab-separated records are the
machine-readable form (first field names the record kind, accuracies keep
full float precision). The table renderers produce aligned plain text for
a terminal. The figure renderers write PNG files: accuracy bars with the
per-fold spread, one confusion heatmap per strategy, and time/speedup
charts for benchmarks.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bench import bench_record
from .dataset import EvaluationReport


def eval_records(report: EvaluationReport) -> list:
    """Tab-separated records covering everything in the report."""
    c, d = report.resolution
    lines = [
        f"resolution\t{c}x{d}",
        f"folds\t{report.folds}",
        f"test_sets\t{report.test_sets_total}",
        "classes\t" + "\t".join(report.class_order),
    ]
    for s in report.strategies:
        folds = "\t".join(repr(float(a)) for a in report.fold_accuracy[s])
        lines.append(f"accuracy\t{s}\t{float(report.mean_accuracy[s])!r}\t{folds}")
    for s in report.strategies:
        conf = report.confusion[s]
        for i, cid in enumerate(report.class_order):
            row = "\t".join(str(int(n)) for n in conf[i])
            lines.append(f"confusion\t{s}\t{cid}\t{row}")
    lines.append(
        "timing\tbuild\t" + "\t".join(f"{t:.6f}" for t in report.build_seconds)
    )
    lines.append(
        "timing\tclassify\t"
        + "\t".join(f"{t:.6f}" for t in report.classify_seconds)
    )
    return lines


def eval_table(report: EvaluationReport) -> str:
    """Aligned text summary: one accuracy row per strategy, then confusion."""
    c, d = report.resolution
    out = [
        f"resolution {c}x{d}, {report.folds} fold(s), "
        f"{report.test_sets_total} test set(s)"
    ]
    out.append(f"{'strategy':<10}{'mean %':>8}  per-fold %")
    for s in report.strategies:
        folds = " ".join(f"{a:6.2f}" for a in report.fold_accuracy[s])
        out.append(f"{s:<10}{report.mean_accuracy[s]:>8.2f}  {folds}")
    width = max((len(cid) for cid in report.class_order), default=0)
    for s in report.strategies:
        out.append("")
        out.append(f"confusion ({s}): rows true, columns predicted")
        header = " ".join(f"{cid:>{width}}" for cid in report.class_order)
        out.append(f"{'':{width}} {header}")
        conf = report.confusion[s]
        for i, cid in enumerate(report.class_order):
            row = " ".join(f"{int(n):>{width}}" for n in conf[i])
            out.append(f"{cid:>{width}} {row}")
    build = sum(report.build_seconds)
    classify = sum(report.classify_seconds)
    out.append("")
    out.append(
        f"build {build:.3f} s total, classify {classify:.3f} s total "
        f"over {report.folds} fold(s)"
    )
    return "\n".join(out)


def bench_records(results) -> list:
    header = (
        "scenario\tclasses\tgallery_images\tprobe_images\ttau\trepeats"
        "\tbuild_s\tonline_s\tfast_s\tspeedup\tnote"
    )
    return [header] + [bench_record(r) for r in results]


def bench_table(results) -> str:
    """Aligned text table of per-scenario times and speedups."""
    out = [
        f"{'scenario':<18}{'build s':>10}{'online s':>10}{'fast s':>10}"
        f"{'speedup':>9}  note"
    ]
    for r in results:
        if r.skipped:
            out.append(f"{r.scenario.label:<18}{'-':>10}{'-':>10}{'-':>10}{'-':>9}  {r.note}")
        else:
            out.append(
                f"{r.scenario.label:<18}{r.build_seconds:>10.4f}"
                f"{r.online_seconds:>10.4f}{r.fast_seconds:>10.4f}"
                f"{r.speedup:>9.2f}  {r.note}"
            )
    return "\n".join(out)


def eval_figures(report: EvaluationReport, out_dir: str | Path, stem: str = "eval"):
    """Write accuracy and confusion PNGs; returns the created paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    fig, ax = plt.subplots(figsize=(6, 4))
    strategies = list(report.strategies)
    means = [report.mean_accuracy[s] for s in strategies]
    x = np.arange(len(strategies))
    ax.bar(x, means, width=0.55, color="#4878a8", zorder=2)
    for i, s in enumerate(strategies):
        folds = report.fold_accuracy[s]
        jitter = np.linspace(-0.12, 0.12, num=len(folds))
        ax.plot(i + jitter, folds, "o", color="#2b2b2b", ms=4, zorder=3)
    ax.set_xticks(x)
    ax.set_xticklabels(strategies)
    ax.set_ylim(0, 105)
    ax.set_ylabel("accuracy (%)")
    c, d = report.resolution
    ax.set_title(f"set accuracy at {c}x{d} (bars: mean, dots: folds)")
    ax.grid(axis="y", alpha=0.3, zorder=0)
    path = out_dir / f"{stem}_accuracy.png"
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    n = len(strategies)
    fig, axes = plt.subplots(1, n, figsize=(4.2 * n, 4), squeeze=False)
    for ax, s in zip(axes[0], strategies):
        conf = report.confusion[s]
        im = ax.imshow(conf, cmap="Blues")
        ax.set_title(s)
        ticks = np.arange(len(report.class_order))
        ax.set_xticks(ticks)
        ax.set_yticks(ticks)
        ax.set_xticklabels(report.class_order, rotation=90, fontsize=7)
        ax.set_yticklabels(report.class_order, fontsize=7)
        ax.set_xlabel("predicted")
        ax.set_ylabel("true")
        fig.colorbar(im, ax=ax, fraction=0.046)
    path = out_dir / f"{stem}_confusion.png"
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)
    return written


def bench_figures(results, out_dir: str | Path, stem: str = "bench"):
    """Write time and speedup PNGs for the timed scenarios."""
    timed = [r for r in results if not r.skipped]
    if not timed:
        return []
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    labels = [r.scenario.label for r in timed]
    x = np.arange(len(timed))

    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.38
    ax.bar(x - width / 2, [r.online_seconds for r in timed], width,
           label="online", color="#b05050", zorder=2)
    ax.bar(x + width / 2, [r.fast_seconds for r in timed], width,
           label="fast", color="#4878a8", zorder=2)
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("median seconds per classification")
    ax.set_yscale("log")
    ax.legend()
    ax.grid(axis="y", alpha=0.3, zorder=0)
    times_path = out_dir / f"{stem}_times.png"
    fig.tight_layout()
    fig.savefig(times_path, dpi=120)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.bar(x, [r.speedup for r in timed], width=0.5, color="#508a60", zorder=2)
    ax.axhline(1.0, color="#2b2b2b", lw=0.8, ls="--")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("speedup (online / fast)")
    ax.grid(axis="y", alpha=0.3, zorder=0)
    speedup_path = out_dir / f"{stem}_speedup.png"
    fig.tight_layout()
    fig.savefig(speedup_path, dpi=120)
    plt.close(fig)
    return [times_path, speedup_path]
