"""Static figures. Uses matplotlib's object API, so no display backend is touched."""

import matplotlib
from matplotlib.figure import Figure
import numpy as np

# fixed ids and no date stamp keep the SVG output byte-reproducible
matplotlib.rcParams["svg.hashsalt"] = "magnls"
_SVG_META = {"Date": None, "Creator": None}


def modulus_heatmap(path, grid, u, title="", dom=None, peak=None):
    """Write an SVG heatmap of ``|u|`` over the ``(rho, x3)`` grid."""
    fig = Figure(figsize=(5.2, 4.2))
    ax = fig.add_subplot()
    extent = (grid.rho_min, grid.rho_max, grid.x3_min, grid.x3_max)
    im = ax.imshow(np.abs(u).T, origin="lower", extent=extent, aspect="auto", cmap="viridis",
                   interpolation="nearest")
    fig.colorbar(im, ax=ax, label="|u|")
    if dom is not None:
        xs = [dom.rho_lo, dom.rho_hi, dom.rho_hi, dom.rho_lo, dom.rho_lo]
        h = dom.x3_half_width
        ax.plot(xs, [-h, -h, h, h, -h], color="w", lw=0.8, ls="--")
    if peak is not None:
        ax.plot([peak[0]], [peak[1]], marker="+", color="r", ms=8)
    ax.set_xlabel("rho")
    ax.set_ylabel("x3")
    if title:
        ax.set_title(title)
    fig.savefig(path, format="svg", metadata=_SVG_META)


def landscape_plot(path, rho, x3, M, rho_star=None):
    """Contour plot of the concentration function over the domain."""
    fig = Figure(figsize=(5.2, 4.2))
    ax = fig.add_subplot()
    cs = ax.contourf(rho, x3, np.asarray(M).T, levels=30, cmap="magma")
    fig.colorbar(cs, ax=ax, label="M")
    if rho_star is not None:
        ax.plot([rho_star], [0.0], marker="x", color="c", ms=8)
    ax.set_xlabel("rho")
    ax.set_ylabel("x3")
    fig.savefig(path, format="svg", metadata=_SVG_META)
