"""Figure rendering for curve and region reports (written next to the CSV)."""

from __future__ import annotations


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def save_curve_plot(points, breakpoints, path):
    """Staircase plot of the piecewise-constant rate curve."""
    plt = _plt()
    eps = [p.eps for p in points]
    rates = [p.rate for p in points]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.step(eps, rates, where="post", lw=2)
    ax.plot(eps, rates, "o", ms=4)
    for b in breakpoints:
        ax.axvline(b, color="gray", ls=":", lw=1)
    ax.set_xlabel(r"tolerance $\varepsilon$")
    ax.set_ylabel("rate [bits]")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_region_plot(points, path):
    """Frontier polyline with the achievable region shaded above it."""
    plt = _plt()
    xs = [p.r1 for p in points]
    ys = [p.r2 for p in points]
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(xs, ys, "o-", lw=2)
    top = max(max(ys, default=1), 1) * 1.2 + 0.1
    right = max(max(xs, default=1), 1) * 1.2 + 0.1
    bx = xs + [right, right, xs[0]]
    by = ys + [ys[-1], top, top]
    ax.fill(bx, by, alpha=0.15)
    ax.set_xlim(left=0, right=right)
    ax.set_ylim(bottom=0, top=top)
    ax.set_xlabel(r"$R_1$ [bits]")
    ax.set_ylabel(r"$R_2$ [bits]")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
