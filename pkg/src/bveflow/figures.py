"""Figure rendering for the report path.

Every driver that writes a delimited output can render a matching PNG
next to it.  Uses the Agg backend so runs stay headless.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg", force=True)

import matplotlib.pyplot as plt  # noqa: E402

from .grid import ScalarField  # noqa: E402


def _heatmap(ax, S: ScalarField, title: str):
    im = ax.imshow(
        S.values.T,
        origin="lower",
        extent=(0.0, 1.0, 0.0, 1.0),
        aspect="auto",
        vmin=0.0,
        vmax=1.0,
        cmap="viridis",
    )
    ax.set_xlabel("x")
    ax.set_ylabel("z")
    ax.set_title(title)
    return im


def render_snapshot(S: ScalarField, t: float, path) -> None:
    fig, ax = plt.subplots(figsize=(7.0, 2.8))
    im = _heatmap(ax, S, f"saturation at t = {t:.4f}")
    fig.colorbar(im, ax=ax, label="S")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_report(report, path) -> None:
    fig, axes = plt.subplots(2, 2, figsize=(9.0, 6.0), sharex=True)
    t = report.time
    panels = (
        ("mass", "total mass"),
        ("energy", "energy"),
        ("overshoot", "overshoot above plateau"),
        ("front_pos", "front position"),
    )
    for ax, (name, label) in zip(axes.ravel(), panels):
        ax.plot(t, report.column(name), lw=1.0)
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
    for ax in axes[-1]:
        ax.set_xlabel("t")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_sweep(sweep_report, path) -> None:
    entries = [e for e in sweep_report.entries if not e.failed]
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    xs = [e.beta2 for e in entries]
    ys = [e.width for e in entries]
    ax.semilogx(xs, ys, "o-", lw=1.2)
    ax.invert_xaxis()
    ax.set_xlabel(r"$\beta^2$")
    ax.set_ylabel("front width at mid-height")
    ax.grid(alpha=0.3, which="both")
    verdict = "strictly decreasing" if sweep_report.monotone else "NOT monotone"
    ax.set_title(f"front smearing vs regularization ({verdict})")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_compare(S_bve: ScalarField, S_dve: ScalarField, z_line: float, path) -> None:
    fig, axes = plt.subplots(3, 1, figsize=(7.0, 7.2))
    _heatmap(axes[0], S_bve, "pseudo-parabolic model")
    _heatmap(axes[1], S_dve, "transport-only limit")
    g = S_bve.grid
    j = int(min(g.nz - 1, max(0, round(z_line * g.nz - 0.5))))
    x = g.x_centers()
    axes[2].plot(x, S_bve.values[:, j], label="pseudo-parabolic", lw=1.2)
    axes[2].plot(x, S_dve.values[:, j], label="transport-only", lw=1.2, ls="--")
    axes[2].set_xlabel("x")
    axes[2].set_ylabel(f"S at z = {(j + 0.5) * g.dz:.3f}")
    axes[2].legend(loc="upper right")
    axes[2].grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def nan_safe(values):
    return [v if v is not None and not math.isnan(v) else float("nan") for v in values]
