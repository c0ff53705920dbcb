"""PNG figures of estimation errors, written next to the CSV files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_errors(traces, path, title=None):
    """One panel per estimated state, one line per observer."""
    traces = list(traces)
    est = traces[0].estimated_index
    fig, axes = plt.subplots(len(est), 1, figsize=(8, 2.6 * len(est)), sharex=True, squeeze=False)
    for ax, i in zip(axes[:, 0], est):
        for tr in traces:
            ax.plot(tr.t, tr.xerr[:, i], lw=0.8, label=tr.name)
        ax.set_ylabel(f"xerr{i + 1} ({traces[0].state_names[i]})")
        ax.grid(True, lw=0.3)
    axes[0, 0].legend(loc="upper right", fontsize=7, ncol=3)
    axes[-1, 0].set_xlabel("t [s]")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_states(trace, path):
    """True and estimated states of a single trace."""
    n = len(trace.state_names)
    fig, axes = plt.subplots(n, 1, figsize=(8, 2.2 * n), sharex=True, squeeze=False)
    for i, ax in enumerate(axes[:, 0]):
        ax.plot(trace.t, trace.x[:, i], lw=1.0, label="true")
        if i in trace.estimated_index:
            ax.plot(trace.t, trace.xhat[:, i], lw=0.8, ls="--", label=trace.name)
        ax.set_ylabel(trace.state_names[i])
        ax.grid(True, lw=0.3)
    axes[0, 0].legend(loc="upper right", fontsize=7)
    axes[-1, 0].set_xlabel("t [s]")
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)
    return path
