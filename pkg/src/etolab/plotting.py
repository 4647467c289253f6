"""Figure rendering for reports and diagnostics.

Everything draws through the Agg backend straight to files; nothing
here opens a window. Each function returns the path it wrote so
callers can list the artifacts they produced.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402 - backend must be pinned first
import numpy as np  # noqa: E402

_STYLE = {
    "figure.figsize": (7.0, 4.2),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.frameon": False,
    "savefig.bbox": "tight",
}


def set_style() -> None:
    plt.rcParams.update(_STYLE)


def _finish(fig, path):
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_convergence(bands_by_algorithm: dict, title: str, path,
                     log_scale: bool = True):
    """Median curves with shaded interquartile bands, one color per algorithm."""
    set_style()
    fig, ax = plt.subplots()
    for name, bands in bands_by_algorithm.items():
        t = np.arange(1, len(bands.median) + 1)
        line, = ax.plot(t, bands.median, label=name, linewidth=1.4)
        ax.fill_between(t, bands.q1, bands.q3, color=line.get_color(),
                        alpha=0.18, linewidth=0)
    if log_scale:
        positive = [b.q1[b.q1 > 0] for b in bands_by_algorithm.values()]
        if any(len(p) for p in positive):
            ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("best fitness")
    ax.set_title(title)
    ax.legend()
    return _finish(fig, path)


def plot_control_envelopes(envelopes, path):
    """Four-panel view of the per-iteration control coefficients."""
    set_style()
    fig, axes = plt.subplots(2, 2, figsize=(9.0, 6.0))

    ax = axes[0, 0]
    ax.plot(envelopes.t, envelopes.d1, label="d1", linewidth=1.2)
    ax.plot(envelopes.t, envelopes.d2, label="d2", linewidth=1.2,
            linestyle="--")
    ax.set_title("oscillation pair")
    ax.legend()

    ax = axes[0, 1]
    ax.plot(envelopes.t, envelopes.mu.mean, label="mean", linewidth=1.2)
    ax.fill_between(envelopes.t, envelopes.mu.lo, envelopes.mu.hi, alpha=0.2)
    ax2 = ax.twinx()
    ax2.plot(envelopes.t, envelopes.switch_probability, color="crimson",
             linewidth=1.0, label="P[switch]")
    ax2.set_ylim(-0.02, 1.02)
    ax2.set_ylabel("P[mode switch]", color="crimson")
    ax.set_title("mode coefficient")

    ax = axes[1, 0]
    for attr, label in (("alpha1", "step scale 1"), ("alpha2", "step scale 2"),
                        ("alpha3", "step scale 3")):
        env = getattr(envelopes, attr)
        line, = ax.plot(envelopes.t, env.mean, label=label, linewidth=1.2)
        ax.fill_between(envelopes.t, env.lo, env.hi,
                        color=line.get_color(), alpha=0.15, linewidth=0)
    ax.axhline(0.0, color="black", linewidth=0.6)
    ax.set_title("step-scale envelopes")
    ax.legend()

    ax = axes[1, 1]
    ax.plot(envelopes.t, envelopes.gamma, linewidth=1.2)
    ax.set_title("drift coefficient")

    for ax in axes.flat:
        ax.set_xlabel("iteration")
    fig.tight_layout()
    return _finish(fig, path)


def plot_update_pdf(pdf, path, title: str = "update distribution"):
    """Histogram of proposed positions with the feasible box marked."""
    set_style()
    fig, ax = plt.subplots()
    centers = 0.5 * (pdf.bin_edges[:-1] + pdf.bin_edges[1:])
    width = pdf.bin_edges[1] - pdf.bin_edges[0]
    ax.bar(centers, pdf.mass, width=width, align="center", alpha=0.8,
           linewidth=0)
    ax.axvline(pdf.bin_edges[0], color="black", linewidth=0.9,
               linestyle="--")
    ax.axvline(pdf.bin_edges[-1], color="black", linewidth=0.9,
               linestyle="--", label="search bounds")
    ax.set_xlabel("proposed coordinate")
    ax.set_ylabel("probability mass per bin")
    oob = pdf.oob_low + pdf.oob_high
    ax.set_title(f"{title} (out-of-bounds mass {oob:.3f})")
    ax.legend()
    return _finish(fig, path)


def plot_switch_curve(closed_form: np.ndarray, path,
                      monte_carlo: np.ndarray | None = None):
    """Closed-form switch probability over iterations, optionally vs sampling."""
    set_style()
    fig, ax = plt.subplots()
    t = np.arange(1, len(closed_form) + 1)
    ax.plot(t, closed_form, label="closed form", linewidth=1.4)
    if monte_carlo is not None:
        ax.plot(t, monte_carlo, label="sampled", linewidth=0.9,
                linestyle=":", color="darkorange")
    ax.set_xlabel("iteration")
    ax.set_ylabel("P[mode switch]")
    ax.set_title("exploration/exploitation switch probability")
    ax.legend()
    return _finish(fig, path)


def plot_rank_bars(avg_ranks, algorithms, path, quartile_tags=None,
                   title: str = "average ranks"):
    """Average-rank bar chart, optionally annotated with quartile tags."""
    set_style()
    fig, ax = plt.subplots()
    x = np.arange(len(algorithms))
    bars = ax.bar(x, avg_ranks, width=0.6)
    ax.set_xticks(x)
    ax.set_xticklabels(algorithms, rotation=20, ha="right")
    ax.set_ylabel("average rank (lower is better)")
    ax.set_title(title)
    if quartile_tags is not None:
        for bar, tag in zip(bars, quartile_tags):
            ax.text(bar.get_x() + bar.get_width() / 2, bar.get_height(),
                    f"Q{tag}", ha="center", va="bottom", fontsize=8)
    return _finish(fig, path)
