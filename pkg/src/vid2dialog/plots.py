"""Deterministic SVG figures for the stats and evaluation reports."""

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_RC = {"svg.hashsalt": "vid2dialog", "svg.fonttype": "none", "font.size": 9}


def _to_svg(fig):
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return buf.getvalue()


def histogram_svg(series, xlabel, title, bins=20):
    """Overlaid histograms, one per named series."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 3.5))
        for name, values in series.items():
            if values:
                ax.hist(values, bins=bins, alpha=0.6, label=f"{name} (mean {sum(values) / len(values):.1f})")
        ax.set_xlabel(xlabel)
        ax.set_ylabel("count")
        ax.set_title(title)
        if any(series.values()):
            ax.legend()
        fig.tight_layout()
        return _to_svg(fig)


def line_svg(xs, series, xlabel, ylabel, title):
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 3.5))
        for name, ys in series.items():
            ax.plot(xs, ys, marker="o", label=name)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        if series:
            ax.legend()
        fig.tight_layout()
        return _to_svg(fig)


def bar_svg(labels, values, ylabel, title):
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 3.5))
        ax.bar(range(len(values)), values)
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels, rotation=30, ha="right")
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        fig.tight_layout()
        return _to_svg(fig)
