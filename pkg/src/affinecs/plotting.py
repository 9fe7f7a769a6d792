"""Figure rendering for CLI reports (SVG files, Agg backend, no display)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def save_trace_plot(path, xs, ys, xlabel, ylabel, title, logx=False, logy=False):
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ax.plot(xs, ys, "o-", lw=1.2, ms=4)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def save_convergence_plot(path, nus, values, errors, exact=None, title=""):
    """Real/imaginary convergence against 1/nu with error bars."""
    x = 1.0 / np.asarray(nus)
    vals = np.asarray(values)
    errs = np.asarray(errors)
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ax.errorbar(x, vals.real, yerr=errs, fmt="o-", lw=1.2, ms=4, label="re")
    if np.any(np.abs(vals.imag) > 0):
        ax.errorbar(x, vals.imag, yerr=errs, fmt="s--", lw=1.2, ms=4, label="im")
    if exact is not None:
        ax.axhline(np.real(exact), color="k", lw=0.8, ls=":")
        if abs(np.imag(exact)) > 0:
            ax.axhline(np.imag(exact), color="gray", lw=0.8, ls=":")
    ax.set_xlabel("1/nu")
    ax.set_ylabel("estimate")
    ax.set_title(title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def save_field_heatmap(path, field, title="", component="abs"):
    """Heatmap of a GridField over (p, u); component in {abs, re, im}."""
    p_nodes, u_nodes = field.interior_nodes()
    data = {"abs": np.abs(field.values), "re": field.values.real,
            "im": field.values.imag}[component]
    fig, ax = plt.subplots(figsize=(5.5, 4.2))
    im = ax.pcolormesh(p_nodes, u_nodes, data.T, shading="auto", cmap="viridis")
    fig.colorbar(im, ax=ax, label=component)
    ax.set_xlabel("p")
    ax.set_ylabel("u = ln q")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
