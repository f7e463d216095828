"""Static SVG figures: reward-vs-episode curves and sweep curves."""

import os
import tempfile

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "drcsim"  # stable element ids across reruns
    return plt


def _save(fig, path):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".svg.tmp")
    os.close(fd)
    try:
        fig.savefig(tmp, format="svg", metadata={"Date": None})
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def plot_reward_curves(curves, path, smooth=10):
    """``curves`` maps a label to a list of per-episode total rewards."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, rewards in curves.items():
        rewards = np.asarray(rewards, dtype=float)
        if smooth > 1 and rewards.size >= smooth:
            rewards = np.convolve(rewards, np.ones(smooth) / smooth, mode="valid")
        ax.plot(np.arange(rewards.size), rewards, label=label)
    ax.set_xlabel("episode")
    ax.set_ylabel("total reward")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


SWEEP_PANELS = (
    ("average_reward", "average reward", "sweep_reward.svg"),
    ("throughput", "throughput (packets/step)", "sweep_throughput.svg"),
    ("miss_detection_probability", "miss detection probability", "sweep_miss_detection.svg"),
)


def plot_sweep(rows, out_dir):
    """One figure per metric, every agent overlaid, min-max band around the median."""
    plt = _pyplot()
    paths = []
    agents = list(dict.fromkeys(r.agent for r in rows))
    parameter = rows[0].parameter if rows else ""
    for metric, ylabel, filename in SWEEP_PANELS:
        fig, ax = plt.subplots(figsize=(6, 4))
        for agent in agents:
            mine = [r for r in rows if r.agent == agent]
            x = [r.value for r in mine]
            med, lo, hi = (np.array(v) for v in zip(*(r.stats[metric] for r in mine)))
            ax.plot(x, med, marker="o", label=agent)
            ax.fill_between(x, lo, hi, alpha=0.15)
        ax.set_xlabel(parameter)
        ax.set_ylabel(ylabel)
        ax.grid(alpha=0.3)
        ax.legend()
        fig.tight_layout()
        path = os.path.join(out_dir, filename)
        _save(fig, path)
        plt.close(fig)
        paths.append(path)
    return paths
