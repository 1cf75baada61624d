"""SVG figures from the experiment CSVs: grouped metric bars and per-BS learning curves."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .config import METHODS  # noqa: E402
from .experiment import SUMMARY_COLUMNS, read_csv  # noqa: E402

BAR_METRICS = {"g_aver": "average throughput G_aver (Mbps)",
               "g_min": "minimum throughput G_min (Mbps)",
               "g_sd": "throughput deviation G_sd (Mbps)"}

STYLE = {
    "svg.hashsalt": "lbmarl",  # fixed ids, so identical data gives identical files
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": "lbmarl"})
    plt.close(fig)
    return path


def _scenario_label(row) -> str:
    return row["scenario"] if row["scenario"] != "C" else f"C-{row['day']}"


def load_summaries(paths) -> list[dict]:
    rows = []
    for p in paths:
        rows.extend(read_csv(p, required=SUMMARY_COLUMNS)[1])
    return rows


def plot_metric_bars(rows, metric: str, path) -> Path:
    """One grouped-bar chart: a group per scenario, a bar per method, sd as error bars."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6.4, 3.6))
        scenarios = sorted({_scenario_label(r) for r in rows})
        methods = [m for m in METHODS if any(r["method"] == m for r in rows)]
        methods += sorted({r["method"] for r in rows} - set(methods))
        table = {(_scenario_label(r), r["method"]): r for r in rows}
        width = 0.8 / max(len(methods), 1)
        x = np.arange(len(scenarios))
        for j, m in enumerate(methods):
            mean = [float(table[(s, m)][f"{metric}_mean"]) if (s, m) in table else np.nan for s in scenarios]
            sd = [float(table[(s, m)][f"{metric}_sd"]) if (s, m) in table else np.nan for s in scenarios]
            ax.bar(x + (j - (len(methods) - 1) / 2) * width, mean, width, yerr=sd, label=m, capsize=2)
        ax.set_xticks(x, scenarios)
        ax.set_xlabel("scenario")
        ax.set_ylabel(BAR_METRICS.get(metric, metric))
        if methods:
            ax.legend(ncols=min(len(methods), 3), frameon=False, fontsize=7)
        fig.tight_layout()
        return _save(fig, path)


def plot_learning_curves(log_path, path, title: str | None = None) -> Path:
    """Per-BS mean episode reward against episode, one labelled curve per agent."""
    _, rows = read_csv(log_path, required=("episode", "agent", "mean_reward"))
    per_agent = defaultdict(list)
    for r in rows:
        per_agent[int(r["agent"])].append((int(r["episode"]), float(r["mean_reward"])))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6.4, 3.6))
        for agent in sorted(per_agent):
            ep, rew = np.asarray(sorted(per_agent[agent])).T
            k = max(1, len(rew) // 50)  # light smoothing for long runs
            smooth = np.convolve(rew, np.ones(k) / k, mode="valid")
            ax.plot(ep[k - 1:], smooth, lw=1.0, label=f"BS {agent + 1}")
        ax.set_xlabel("episode")
        ax.set_ylabel("mean per-step reward")
        if title:
            ax.set_title(title)
        if per_agent:
            ax.legend(frameon=False, fontsize=7)
        fig.tight_layout()
        return _save(fig, path)


def emit_plots(root, out_dir=None) -> list[Path]:
    """Render every figure for the CSVs found under ``root``.

    Bar charts aggregate all ``summary.csv`` files; each ``learning_log.csv``
    gets its own learning-curve chart.
    """
    root = Path(root)
    out_dir = Path(out_dir) if out_dir is not None else root / "figures"
    written = []
    summaries = sorted(root.rglob("summary.csv"))
    rows = load_summaries(summaries)
    for metric in BAR_METRICS:
        written.append(plot_metric_bars(rows, metric, out_dir / f"bars_{metric}.svg"))
    for log_path in sorted(root.rglob("learning_log.csv")):
        rel = log_path.parent.relative_to(root)
        name = "curves_" + ("_".join(rel.parts) or "run") + ".svg"
        written.append(plot_learning_curves(log_path, out_dir / name, title=" / ".join(rel.parts) or None))
    return written


__all__ = ["emit_plots", "plot_metric_bars", "plot_learning_curves", "load_summaries", "BAR_METRICS"]
