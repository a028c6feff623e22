"""Figure rendering for CLI report paths. Headless (Agg) only."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return str(path)


def spectrum_plot(path, points, window=None, title="spectrum"):
    """Strip plot of a point configuration, optional shaded window."""
    pts = np.asarray(points, dtype=float)
    fig, ax = plt.subplots(figsize=(7, 2.6))
    ax.plot(pts, np.zeros_like(pts), "|", ms=18, color="tab:blue")
    if window is not None:
        ax.axvspan(window[0], window[1], color="tab:orange", alpha=0.25,
                   label=f"window [{window[0]:g}, {window[1]:g})")
        ax.legend(loc="upper right")
    ax.set_yticks([])
    ax.set_xlabel("location")
    ax.set_title(title)
    return _finish(fig, path)


def histogram_plot(path, values, title="eigenvalues", bins=60, vline=None):
    fig, ax = plt.subplots(figsize=(6, 3.6))
    ax.hist(np.asarray(values, dtype=float), bins=bins, color="tab:blue",
            alpha=0.8)
    if vline is not None:
        ax.axvline(vline, color="tab:red", ls="--", label=f"{vline:g}")
        ax.legend()
    ax.set_title(title)
    ax.set_xlabel("value")
    return _finish(fig, path)


def trace_curve_plot(path, ts, means, stderrs=None, fitted=None,
                     title="mean trace"):
    """Trace curve with optional fitted overlay (callable t -> value)."""
    ts = np.asarray(ts, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(ts, means, yerr=stderrs, fmt="o", capsize=3, label="estimate")
    if fitted is not None:
        tt = np.geomspace(ts.min(), ts.max(), 200)
        ax.plot(tt, [fitted(t) for t in tt], "-", color="tab:red", label="fit")
        ax.legend()
    ax.set_xlabel("t")
    ax.set_ylabel("trace")
    ax.set_title(title)
    return _finish(fig, path)


def delta_curve_plot(path, ts, deltas, stderrs=None, constant=None,
                     expected=None, title="paired trace delta"):
    ts = np.asarray(ts, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(ts, deltas, yerr=stderrs, fmt="o", capsize=3, label="delta")
    if constant is not None:
        ax.axhline(constant, color="tab:red", ls="-", label=f"fitted {constant:.3f}")
    if expected is not None:
        ax.axhline(expected, color="tab:green", ls="--", label=f"expected {expected:g}")
    ax.legend()
    ax.set_xlabel("t")
    ax.set_ylabel("trace difference")
    ax.set_title(title)
    return _finish(fig, path)


def verification_bar_plot(path, names, estimates, targets, title="verification"):
    """Estimates against targets, one bar pair per named check."""
    x = np.arange(len(names))
    fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(names)), 4))
    ax.bar(x - 0.18, estimates, width=0.36, label="estimate", color="tab:blue")
    ax.bar(x + 0.18, targets, width=0.36, label="target", color="tab:green")
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
    ax.legend()
    ax.set_title(title)
    return _finish(fig, path)


def block_average_plot(path, block_averages, value, title="recovery functional"):
    ba = np.asarray(block_averages, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 3.6))
    ax.plot(np.arange(1, ba.size + 1), ba, "o-", label="block averages")
    ax.axhline(value, color="tab:red", ls="--", label=f"value {value:.4f}")
    ax.set_xlabel("block")
    ax.legend()
    ax.set_title(title)
    return _finish(fig, path)
