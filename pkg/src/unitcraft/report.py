"""Figure rendering for the reporting paths.

Every CLI verb that writes delimited output can also drop a small
matplotlib figure next to it: loss curves for training runs, split
comparison bars for corpus statistics, and metric bars for evaluations.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def render_loss_curve(epoch_losses: list[float], path: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(range(1, len(epoch_losses) + 1), epoch_losses, marker="o")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean step loss")
    ax.set_title("training loss")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_stats_bars(reports: dict, path: str) -> None:
    """One bar group per split for each statistic column."""
    names = list(reports)
    fields = (
        ("count", "count"),
        ("mean_action_len", "action length"),
        ("mean_dialogue_turns", "dialogue turns"),
        ("mean_dialogue_len", "dialogue length"),
    )
    fig, axes = plt.subplots(1, len(fields), figsize=(3 * len(fields), 3.2))
    for ax, (attr, label) in zip(axes, fields):
        ax.bar(names, [getattr(reports[n], attr) for n in names])
        ax.set_title(label)
        ax.tick_params(axis="x", rotation=30)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_metric_bars(aggregates: dict[str, dict[str, float]], path: str) -> None:
    """Grouped SR/GC/PSR/PGC bars (x100) per split."""
    names = list(aggregates)
    keys = ("SR", "PSR", "GC", "PGC")
    width = 0.8 / len(keys)
    fig, ax = plt.subplots(figsize=(1.5 + 2 * len(names), 4))
    for j, key in enumerate(keys):
        xs = [i + j * width for i in range(len(names))]
        ax.bar(xs, [100 * aggregates[n][key] for n in names], width=width, label=key)
    ax.set_xticks([i + 1.5 * width for i in range(len(names))])
    ax.set_xticklabels(names)
    ax.set_ylabel("score x100")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
