"""Figure rendering for experiment results (one PNG per result table)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

Y_LABELS = {
    "outage_vs_snr": "secrecy outage probability",
    "rate_vs_snr": "mean secrecy rate [bits/s/Hz]",
    "rate_vs_density": "mean secrecy rate [bits/s/Hz]",
    "cdf_validation": "KS distance to lognormal fit",
    "laplace_validation": "Laplace transform value",
    "percolation": "largest cluster fraction",
}


def render_rows(rows: list[dict], meta: dict, png_path: str) -> str:
    """Plot every series in the result table and save the figure."""
    spec = meta.get("spec", {})
    kind = spec.get("kind", "")
    sweep_key = spec.get("sweep_key", "x")

    fig, ax = plt.subplots(figsize=(7.0, 4.6))
    series_names = list(dict.fromkeys(row["series"] for row in rows))
    for name in series_names:
        pts = [r for r in rows if r["series"] == name]
        x = np.array([float(r["x"]) for r in pts])
        y = np.array([float(r["y"]) for r in pts])
        errs = [r["y_err"] for r in pts]
        if any(e is not None for e in errs):
            yerr = np.array([0.0 if e is None else float(e) for e in errs])
            ax.errorbar(x, y, yerr=1.96 * yerr, marker="o", ms=3.5, capsize=2.5,
                        lw=1.2, label=name)
        else:
            ax.plot(x, y, marker="s", ms=3.5, lw=1.2, ls="--", label=name)

    if sweep_key in ("bs_density",) or _spans_decades(rows):
        ax.set_xscale("log")
    ax.set_xlabel(sweep_key)
    ax.set_ylabel(Y_LABELS.get(kind, "value"))
    ax.set_title(spec.get("name", kind))
    ax.grid(True, alpha=0.35)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)
    return png_path


def _spans_decades(rows) -> bool:
    xs = np.array([float(r["x"]) for r in rows])
    positive = xs[xs > 0]
    return len(positive) > 1 and positive.max() / positive.min() >= 100.0
