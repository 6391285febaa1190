"""Figure rendering for sweep results, constellations, and loss curves.

Figures are written straight to files (Agg backend); nothing here opens a
window.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .harness import SweepResult
from .modem import Constellation


def render_sweep_figure(result: SweepResult, path) -> None:
    """SER waterfall with Wilson-interval whiskers on a log axis."""
    pts = [p for p in result.points if p.failure is None and p.ser == p.ser]
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    if pts:
        esn0 = np.array([p.esn0_db for p in pts])
        ser = np.array([p.ser for p in pts])
        lo = np.array([p.ci_low for p in pts])
        hi = np.array([p.ci_high for p in pts])
        # zero estimates cannot sit on a log axis; pin them just under the
        # smallest positive CI edge
        positive = hi[hi > 0]
        floor = 0.3 * positive.min() if positive.size else 1e-9
        ser_plot = np.maximum(ser, floor)
        yerr = np.vstack([
            np.maximum(ser_plot - np.maximum(lo, floor), 0.0),
            np.maximum(np.maximum(hi, floor) - ser_plot, 0.0),
        ])
        ax.errorbar(esn0, ser_plot, yerr=yerr, marker="o", capsize=3)
        ax.set_yscale("log")
    cfg = result.config
    turb = "awgn" if cfg.turbulence is None else f"a={cfg.turbulence.alpha:g}, b={cfg.turbulence.beta:g}"
    ax.set_title(
        f"{cfg.kind.value}, M={cfg.order}, {cfg.n_t}x{cfg.n_r} {cfg.combiner.value}, {turb}"
    )
    ax.set_xlabel("Es/N0 [dB]")
    ax.set_ylabel("SER")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_constellation_figure(constellation: Constellation, path, title: str | None = None) -> None:
    """Scatter of the constellation points with index labels."""
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    pts = constellation.points
    ax.scatter(pts.real, pts.imag, s=40)
    for idx, pt in enumerate(pts):
        ax.annotate(str(idx), (pt.real, pt.imag), textcoords="offset points", xytext=(4, 4), fontsize=8)
    lim = 1.1 * float(np.abs(pts).max())
    ax.set_xlim(-lim, lim)
    ax.set_ylim(-lim, lim)
    ax.set_aspect("equal")
    ax.axhline(0.0, color="gray", lw=0.5)
    ax.axvline(0.0, color="gray", lw=0.5)
    if title:
        ax.set_title(title)
    ax.set_xlabel("re")
    ax.set_ylabel("im")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_loss_figure(history: np.ndarray, path, title: str | None = None) -> None:
    """Training loss per iteration."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.plot(np.arange(len(history)), history, lw=0.8)
    ax.set_xlabel("iteration")
    ax.set_ylabel("training loss")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
