"""Figure rendering for the evaluation report path.

The evaluate subcommand writes these PNGs next to its record and table
output. matplotlib is imported lazily so the record-only pipeline stages
never pay for it.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

from .metrics import MetricsReport


def _mpl():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _display(class_id: str) -> str:
    return class_id.replace("_", " ").title()


def _grouped_bars(plt, classes, series: dict[str, list[float | None]], title, path):
    fig, ax = plt.subplots(figsize=(8, 4.5))
    n_groups = len(classes)
    n_series = len(series)
    width = 0.8 / max(n_series, 1)
    for k, (label, values) in enumerate(series.items()):
        xs = [i + k * width for i in range(n_groups)]
        ys = [v if v is not None else 0.0 for v in values]
        ax.bar(xs, ys, width=width, label=label)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(n_groups)])
    ax.set_xticklabels([_display(c) for c in classes], rotation=20, ha="right")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("score")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_metrics_figures(report: MetricsReport, out_dir: str | Path) -> list[Path]:
    """Render AP/AUROC comparison bars and the ASR chart; returns paths."""
    plt = _mpl()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    classes = list(report.classes)
    ap_series = {"original": [report.original_ap.get(c) for c in classes]}
    auc_series = {"original": [report.original_auroc.get(c) for c in classes]}
    if report.adversarial_ap:
        ap_series["adversarial"] = [report.adversarial_ap.get(c) for c in classes]
        auc_series["adversarial"] = [report.adversarial_auroc.get(c) for c in classes]

    path = out_dir / "average_precision.png"
    _grouped_bars(plt, classes, ap_series, "Average precision by class", path)
    written.append(path)

    path = out_dir / "auroc.png"
    _grouped_bars(plt, classes, auc_series, "AUROC by class", path)
    written.append(path)

    if report.asr_all is not None:
        fig, ax = plt.subplots(figsize=(5, 4))
        labels, values = [], []
        for label, value in (
            ("inter", report.asr_inter),
            ("outer", report.asr_outer),
            ("all", report.asr_all),
        ):
            if value is not None:
                labels.append(label)
                values.append(value)
        ax.bar(labels, values, color=["#4878d0", "#ee854a", "#6acc64"][: len(labels)])
        ax.set_ylim(0, 1.05)
        ax.set_ylabel("attack success rate")
        ax.set_title("Attack success rate by perturbation kind")
        for x, v in enumerate(values):
            ax.text(x, v + 0.02, f"{v:.3f}", ha="center")
        fig.tight_layout()
        path = out_dir / "asr.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written


def render_asr_curves(
    curves: dict[str, tuple[Sequence[tuple[float, float]], float]],
    out_path: str | Path,
) -> Path:
    """Overlay externally supplied ASR curves, AUCs in the legend."""
    plt = _mpl()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for name in sorted(curves):
        points, auc = curves[name]
        xs = [p for p, _ in points]
        ys = [y for _, y in points]
        ax.plot(xs, ys, marker="o", label=f"{name} (AUC {auc:.3f})")
    ax.set_xlabel("attack parameter")
    ax.set_ylabel("attack success rate")
    ax.set_ylim(0, 1.05)
    ax.set_title("ASR curves")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path
