"""Matplotlib renderings of sweep output. Always uses the Agg backend."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .sweep import cell_summaries, pareto_front  # noqa: E402


def tradeoff_figure(path, points, baselines=None, title=None):
    """Scatter of every (dp, accuracy) run with the Pareto front drawn as a step line."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    etas = sorted({p.eta for p in points})
    cmap = plt.get_cmap("viridis", max(len(etas), 2))
    for i, eta in enumerate(etas):
        cell = [p for p in points if p.eta == eta]
        ax.scatter([p.demographic_parity for p in cell], [p.accuracy for p in cell],
                   color=cmap(i), s=22, label=f"eta={eta:g}")
    front = pareto_front(points)
    if front:
        ax.step([p.demographic_parity for p in front], [p.accuracy for p in front],
                where="post", color="black", lw=1, label="front")
    for name, pts in (baselines or {}).items():
        pts = sorted(pts)
        ax.plot([d for d, _ in pts], [a for _, a in pts], "--", marker="x", lw=1, label=f"{name} (transcribed)")
    ax.set_xlabel("demographic parity gap")
    ax.set_ylabel("accuracy")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=7, loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def eta_figure(path, points):
    """Mean accuracy and mean/max dp per eta (log-spaced x, eta=0 pinned at the left)."""
    cells = cell_summaries(points)
    xs = list(range(len(cells)))
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ax.plot(xs, [c["mean_dp"] for c in cells], marker="o", label="mean dp")
    ax.plot(xs, [c["max_dp"] for c in cells], marker="^", ls=":", label="max dp")
    ax2 = ax.twinx()
    ax2.plot(xs, [c["mean_accuracy"] for c in cells], marker="s", color="tab:red", label="mean accuracy")
    ax.set_xticks(xs, [f"{c['eta']:g}" for c in cells])
    ax.set_xlabel("eta")
    ax.set_ylabel("demographic parity gap")
    ax2.set_ylabel("accuracy")
    h1, l1 = ax.get_legend_handles_labels()
    h2, l2 = ax2.get_legend_handles_labels()
    ax.legend(h1 + h2, l1 + l2, fontsize=7, loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
