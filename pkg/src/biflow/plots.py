"""SVG figures for evaluation summaries: quality/cost scatter and drift trends."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_COLORS = {"flow": "tab:orange", "biflow": "tab:blue", "condiff": "tab:green"}


def _group_label(row) -> str:
    label = row["method"]
    if row["method"] == "biflow":
        label += f" eps={row['epsilon']:g}"
    if row.get("direction", "forward") == "backward":
        label += " (backward)"
    return label


def scatter_steps_vs_distance(summary_rows: list[dict], path) -> None:
    """One point per (method, epsilon); biflow noise levels form a polyline."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    biflow_rows = sorted(
        (r for r in summary_rows if r["method"] == "biflow" and r.get("direction") != "backward"),
        key=lambda r: r["epsilon"],
    )
    if biflow_rows:
        xs = [r["mean_steps"] for r in biflow_rows]
        ys = [r["mean_distance"] for r in biflow_rows]
        ax.plot(xs, ys, "-o", color=_COLORS["biflow"], label="biflow (noise sweep)")
        for r in biflow_rows:
            ax.annotate(f"{r['epsilon']:g}", (r["mean_steps"], r["mean_distance"]), fontsize=8)
        best = min(biflow_rows, key=lambda r: r["mean_distance"])
        ax.plot(best["mean_steps"], best["mean_distance"], "*", markersize=16, color="gold",
                markeredgecolor="black", zorder=5)
    for r in summary_rows:
        if r["method"] == "biflow":
            continue
        ax.plot(r["mean_steps"], r["mean_distance"], "s", color=_COLORS.get(r["method"], "gray"),
                label=_group_label(r))
    ax.set_xlabel("mean solver evaluations per frame")
    ax.set_ylabel("mean windowed Frechet distance")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def trend_lines(window_rows: list[dict], path) -> None:
    """Windowed distance against frame index with fitted linear trends."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    groups: dict[tuple, list] = {}
    for row in window_rows:
        key = (row["method"], row["epsilon"], row.get("direction", "forward"))
        groups.setdefault(key, []).append((row["window_start"], row["distance"]))
    for (method, eps, direction), points in sorted(groups.items()):
        points.sort()
        xs = np.array([p[0] for p in points], dtype=float)
        ys = np.array([p[1] for p in points], dtype=float)
        color = _COLORS.get(method, "gray")
        label = _group_label({"method": method, "epsilon": eps, "direction": direction})
        alpha = 0.35 + 0.65 * (eps / 0.3 if method == "biflow" and eps <= 0.3 else 1.0)
        ax.plot(xs, ys, ".", color=color, alpha=0.4)
        if xs.size >= 2:
            slope, intercept = np.polyfit(xs, ys, 1)
            ax.plot(xs, slope * xs + intercept, "-", color=color, alpha=min(alpha, 1.0), label=label)
    ax.set_xlabel("window start frame")
    ax.set_ylabel("windowed Frechet distance")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
