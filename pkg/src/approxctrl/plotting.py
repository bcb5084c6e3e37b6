"""Report figures written next to the CSV output."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# deterministic SVG ids and no timestamp
plt.rcParams["svg.hashsalt"] = "approxctrl"
_METADATA = {"svg": {"Date": None}, "png": {}}


def savefig(fig, filename):
    """Write ``fig`` to ``filename`` and close it."""
    ext = str(filename).rsplit(".", 1)[-1]
    fig.savefig(filename, bbox_inches="tight", metadata=_METADATA.get(ext))
    plt.close(fig)


def _axes(xlabel, ylabel, title=None):
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    return fig, ax


def plot_sweep(report, filename):
    """Log-log terminal error against mu, with 2 standard-error bars."""
    mu = np.array([r.mu for r in report.rows])
    err = np.array([r.mean_err for r in report.rows])
    se = np.array([r.stderr for r in report.rows])
    fig, ax = _axes(r"$\mu$", r"$E\|x^\mu(c) - x_c\|^2$", "terminal error")
    if np.all(err > 0):
        ax.set_xscale("log")
        ax.set_yscale("log")
        lower = np.minimum(2 * se, 0.999 * err)
        ax.errorbar(mu, err, yerr=[lower, 2 * se], marker="o", capsize=3)
    else:
        ax.set_xscale("log")
        ax.plot(mu, err, marker="o")
    ax.invert_xaxis()
    savefig(fig, filename)


def plot_gamma(report, filename):
    g = np.array([r.gamma for r in report.rows])
    d = np.array([r.mean_distance for r in report.rows])
    se = np.array([r.stderr for r in report.rows])
    fig, ax = _axes(r"freezing point $\gamma$", "mean sup-distance to unfrozen solution")
    ax.errorbar(g, d, yerr=2 * se, marker="s", capsize=3)
    ax.invert_xaxis()
    savefig(fig, filename)


def plot_resolvent(table, filename, max_modes=8):
    fig, ax = _axes(r"$s$", r"$r_n(s)$", "resolvent modes")
    s = table.grid.nodes
    for n, row in enumerate(table.values[:max_modes], start=1):
        ax.plot(s, row, label=f"n={n}", lw=1.2)
    ax.legend(fontsize=7, ncol=2)
    savefig(fig, filename)


def plot_defect(report, filename):
    fig, ax = _axes(r"$\epsilon$", r"$D(\epsilon)$", "semigroup-law defect")
    ax.plot(report.defect_eps, report.defect, lw=1.2, label="measured")
    ax.plot(report.defect_eps, report.gamma_hat * report.defect_eps, "--", lw=1,
            label=rf"$\hat\gamma\,\epsilon$, $\hat\gamma$={report.gamma_hat:.3g}")
    ax.legend(fontsize=8)
    savefig(fig, filename)


def plot_decay(report, filename):
    fig, ax = _axes(r"$\mu$", r"$\|\mu(\mu I + \Delta)^{-1}x\|$", "linear decay test")
    ax.set_xscale("log")
    ax.set_yscale("log")
    floor = np.finfo(float).tiny
    for k in range(report.delta.shape[1]):
        ax.plot(report.mu, np.maximum(report.delta[:, k], floor), marker=".", lw=0.8)
    ax.invert_xaxis()
    savefig(fig, filename)
