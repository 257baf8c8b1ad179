"""Figure rendering for bench suites (PNG files next to the CSVs)."""

from __future__ import annotations

import math
from collections import defaultdict

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
    "lines.markersize": 4,
    "savefig.dpi": 120,
    "savefig.bbox": "tight",
}

LABELS = {
    "error_rate": "bad-pixel rate",
    "psnr_i2": "PSNR of predicted I2 [dB]",
    "mse_i2": "MSE(I2_hat, I2)",
    "mse_i1": "MSE(I2_hat, I1)",
    "psnr_mean": "mean PSNR [dB]",
    "psnr_I1": "PSNR I1 [dB]",
    "psnr_I2": "PSNR I2 [dB]",
    "wall_ms": "wall time [ms]",
}


def new(ncols=1, width=4.0, height=3.0):
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, ncols, figsize=(width * ncols, height), squeeze=False)
    return fig, axes[0]


def medians(rows, metric, by=("scheme",)):
    """``{group: (rates, median values)}`` over seeds, skipping non-finite values."""
    acc = defaultdict(lambda: defaultdict(list))
    for r in rows:
        try:
            v = float(r[metric])
        except (KeyError, TypeError, ValueError):
            continue
        if not math.isfinite(v):
            continue
        acc[tuple(r[k] for k in by)][float(r["rate"])].append(v)
    out = {}
    for g, per_rate in acc.items():
        rates = sorted(per_rate)
        out[g] = (np.array(rates), np.array([np.median(per_rate[x]) for x in rates]))
    return out


def rate_curves(rows, metrics, path, title=None, by=("dataset", "scheme")):
    """One panel per metric, one line per group, median over seeds."""
    with plt.rc_context(STYLE):
        fig, axes = new(len(metrics))
        for ax, metric in zip(axes, metrics):
            for group, (x, y) in sorted(medians(rows, metric, by).items()):
                ax.plot(x, y, marker="o", label=" / ".join(str(g) for g in group))
            ax.set_xlabel("measurement rate")
            ax.set_ylabel(LABELS.get(metric, metric))
        if title:
            fig.suptitle(title)
        handles, labels = axes[0].get_legend_handles_labels()
        if handles:
            axes[-1].legend(handles, labels, loc="best")
        fig.savefig(path)
        plt.close(fig)
    return path


def field_image(field, path, title=None):
    with plt.rc_context(STYLE):
        mh, _ = field.to_pixels()
        fig, axes = new(1, width=4.5, height=3.5)
        im = axes[0].imshow(mh, cmap="viridis", interpolation="nearest")
        fig.colorbar(im, ax=axes[0], label="horizontal displacement [px]")
        axes[0].set_axis_off()
        if title:
            axes[0].set_title(title)
        fig.savefig(path)
        plt.close(fig)
    return path
