"""Report figures written next to the CSV outputs."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# no timestamps or version strings, so reruns give identical files
_PNG_META = {"Software": None}

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)


def plot_report(report, path):
    """Bar chart of per-utterance MCD with the corpus mean as a dashed line."""
    with plt.rc_context(STYLE):
        width = max(4.0, 0.25 * report.count + 1.5)
        fig, ax = plt.subplots(figsize=(width, 3.0))
        x = np.arange(report.count)
        ax.bar(x, report.mcd, color="0.55", width=0.8)
        ax.axhline(report.mean, color="C3", ls="--", lw=1, label=f"mean {report.mean:.2f} dB")
        ax.set_xticks(x)
        ax.set_xticklabels(report.utt_ids, rotation=90)
        ax.set_ylabel("MCD (dB)")
        ax.set_title(report.label)
        ax.legend(frameon=False)
        _save(fig, path)


def plot_alignment(cost, path, out_path, title="alignment"):
    """Cost matrix as an image with the DTW path drawn on top."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 4.0))
        im = ax.imshow(np.asarray(cost).T, origin="lower", aspect="auto", cmap="magma_r", interpolation="nearest")
        ax.plot(path.pairs[:, 0], path.pairs[:, 1], color="C0", lw=1)
        ax.set_xlabel("source frame")
        ax.set_ylabel("target frame")
        ax.set_title(f"{title}  (mean cost {path.mean_cost:.3f})")
        fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
        _save(fig, out_path)


def plot_loss(history, out_path, title="training loss"):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 3.0))
        ax.semilogy(np.arange(1, len(history) + 1), history, color="C0")
        ax.set_xlabel("epoch")
        ax.set_ylabel("MSE")
        ax.set_title(title)
        _save(fig, out_path)
