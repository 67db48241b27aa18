"""Static figures for the report path: solution profiles, mass sweeps,
fiber profiles.  Everything is rendered with the Agg backend and saved
as SVG next to the delimited output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import coulomb
from .energy import ProblemParams, energy_breakdown, fiber_profile
from .mesh import Field
from .potentials import PotentialSpec

plt.rcParams.update({
    "figure.figsize": (5.2, 3.4),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.fonttype": "none",
})


def plot_radial_profile(u: Field, path, phi: Field | None = None) -> None:
    """u(r) and its Coulomb potential phi_u(r) on twin axes."""
    if not u.is_radial:
        raise ValueError("profile plot expects a radial field")
    if phi is None:
        phi = coulomb.solve_phi(u)
    r = u.grid.nodes
    fig, ax = plt.subplots()
    ax.plot(r, u.values, color="tab:blue", label="u(r)")
    ax.set_xlabel("r")
    ax.set_ylabel("u(r)", color="tab:blue")
    ax2 = ax.twinx()
    ax2.plot(r, phi.values, color="tab:orange", label="phi_u(r)")
    ax2.set_ylabel("phi_u(r)", color="tab:orange")
    ax2.grid(False)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_mass_sweep(a_vals, c_vals, path) -> None:
    """Ground-state level against the prescribed mass."""
    fig, ax = plt.subplots()
    ax.plot(a_vals, c_vals, "o-")
    ax.set_xlabel("a")
    ax.set_ylabel("c_a")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_fiber_profile(u: Field, V: PotentialSpec, params: ProblemParams, path,
                       t_range=(1e-2, 1e2), n_t: int = 200) -> None:
    """The map t -> j_v(u^t) whose maximum bounds the mountain-pass level."""
    b = energy_breakdown(u, V, params)
    ts = np.logspace(np.log10(t_range[0]), np.log10(t_range[1]), n_t)
    vals = [fiber_profile(u, V, params, t, breakdown=b) for t in ts]
    fig, ax = plt.subplots()
    ax.semilogx(ts, vals)
    ax.axvline(1.0, color="k", lw=0.6, alpha=0.5)
    ax.set_xlabel("t")
    ax.set_ylabel("j_v(u^t)")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
