"""Nonlocal Coulomb term: phi_u = |x|^-1 * u^2 and the Hartree energy B(u).

phi_u is the Newtonian potential of the density u^2 (so -Lap phi_u =
4*pi*u^2), and B(u) = int phi_u u^2 dx equals the double integral
int int u(x)^2 u(y)^2 / |x-y|.

Radial grids: the potential is obtained from the two-point boundary
problem for w_phi = r*phi_u, solved in the discrete sine basis with the
exact continuum eigenvalues (pi*k/r_max)^2 plus the linear boundary lift
Q*r/r_max carrying the total charge.  For smooth exponentially decaying
densities this is spectrally accurate, and the induced density-to-
potential kernel stays symmetric in the quadrature inner product, which
the Newton linearization relies on.

Box grids: free-space convolution with the spherically truncated kernel
(Hockney).  The Fourier symbol of 1/|x| truncated at L_t is
4*pi*(1 - cos(|k| L_t))/|k|^2 with the analytic limit 2*pi*L_t^2 at
k = 0, applied by FFT on the (optionally zero-padded) grid.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.fft import dst, idst, irfftn, rfftn

from .mesh import FOUR_PI, BoxGrid, Field, RadialGrid

__all__ = [
    "CoulombSolverConfig",
    "TruncationWarning",
    "solve_phi",
    "hartree_B",
    "default_config",
    "phi_radial_from_density",
    "phi_box_from_density",
]


class TruncationWarning(UserWarning):
    """Density support reaches the outer shell of the box; potential is degraded."""


@dataclass(frozen=True)
class CoulombSolverConfig:
    """Box-solver knobs; ignored on radial grids.

    With padding factor ``oversampling`` the FFT period is P = 2*L*
    oversampling, and the convolution is alias-free exactly when the
    kernel truncation radius satisfies L_t <= P - 2L.  ``None`` picks
    that largest alias-free radius (2L at oversampling 2).  Pairs farther
    apart than L_t inside the box are dropped instead, which is the
    right trade for densities held away from the faces; a larger L_t can
    be forced explicitly, at the price of periodic-image interactions.
    """

    kernel_truncation_radius: float | None = None
    oversampling: int = 2

    def __post_init__(self):
        if self.oversampling not in (1, 2):
            raise ValueError(f"oversampling must be 1 or 2, got {self.oversampling}")
        if self.kernel_truncation_radius is not None and self.kernel_truncation_radius <= 0:
            raise ValueError("kernel_truncation_radius must be positive")

    def truncation_radius(self, grid: BoxGrid) -> float:
        side = 2.0 * grid.half_width
        alias_free = max(side * (self.oversampling - 1), side)
        if self.kernel_truncation_radius is None:
            return alias_free
        if self.kernel_truncation_radius > side * self.oversampling - side and self.oversampling > 1:
            warnings.warn(
                "kernel truncation radius exceeds the alias-free bound "
                f"{side * self.oversampling - side:.3g}; periodic images will leak",
                TruncationWarning,
                stacklevel=2,
            )
        return self.kernel_truncation_radius


def default_config() -> CoulombSolverConfig:
    return CoulombSolverConfig()


def phi_radial_from_density(grid: RadialGrid, rho: np.ndarray) -> np.ndarray:
    """Linear density-to-potential map on a radial grid (no sign clamp).

    Solves -w'' = 4*pi*r*rho for w = r*phi in the sine basis with the
    exact eigenvalues (pi*k/r_max)^2, plus the linear lift Q*r/r_max
    carrying the total charge Q.  The induced kernel is symmetric in the
    quadrature inner product, which the Newton linearization requires.
    """
    rhs = FOUR_PI * grid.nodes * rho
    k = np.arange(1, grid.n)
    eig = (np.pi * k / grid.r_max) ** 2
    w_tilde = idst(dst(rhs, type=1) / eig, type=1)
    charge = float(np.dot(grid.quad_weights(), rho))
    return w_tilde / grid.nodes + charge / grid.r_max


def _phi_radial(u: Field) -> Field:
    phi = phi_radial_from_density(u.grid, u.values**2)
    # round-off can leave tiny negative values where phi ~ 0
    np.maximum(phi, 0.0, out=phi)
    return Field(u.grid, phi, u.scale_factor)


def _box_support_touches_shell(u: Field, rel: float = 1e-8) -> bool:
    n = u.grid.n
    m = max(1, n // 10)
    mask = np.zeros((n, n, n), dtype=bool)
    mask[:m], mask[-m:] = True, True
    mask[:, :m], mask[:, -m:] = True, True
    mask[:, :, :m], mask[:, :, -m:] = True, True
    dens = u.values**2
    total = dens.sum()
    return total > 0 and dens[mask].sum() > rel * total


def phi_box_from_density(grid: BoxGrid, rho_vals: np.ndarray,
                         cfg: CoulombSolverConfig) -> np.ndarray:
    """Linear Hockney convolution on a box grid (no sign clamp)."""
    lt = cfg.truncation_radius(grid)
    npad = cfg.oversampling * grid.n
    d = grid.spacing
    rho = np.zeros((npad, npad, npad))
    rho[: grid.n, : grid.n, : grid.n] = rho_vals
    kx = 2.0 * np.pi * np.fft.fftfreq(npad, d)
    kz = 2.0 * np.pi * np.fft.rfftfreq(npad, d)
    k2 = (
        kx[:, None, None] ** 2
        + kx[None, :, None] ** 2
        + kz[None, None, :] ** 2
    )
    kn = np.sqrt(k2)
    with np.errstate(divide="ignore", invalid="ignore"):
        symbol = FOUR_PI * (1.0 - np.cos(kn * lt)) / k2
    symbol[0, 0, 0] = 2.0 * np.pi * lt**2
    # the d^3 quadrature weight of rho-hat and the (dk/2pi)^3 measure of the
    # inverse transform cancel into exactly the 1/N^3 of ifftn
    phi_pad = irfftn(rfftn(rho) * symbol, s=(npad, npad, npad))
    return phi_pad[: grid.n, : grid.n, : grid.n].copy()


def _phi_box(u: Field, cfg: CoulombSolverConfig) -> Field:
    if _box_support_touches_shell(u):
        warnings.warn(
            "density support reaches the outer 10% shell of the box; "
            "Coulomb truncation error is not controlled",
            TruncationWarning,
            stacklevel=3,
        )
    phi = phi_box_from_density(u.grid, u.values**2, cfg)
    np.maximum(phi, 0.0, out=phi)
    return Field(u.grid, phi, u.scale_factor)


def solve_phi(u: Field, cfg: CoulombSolverConfig | None = None) -> Field:
    """Newtonian potential phi_u = |x|^-1 * u^2 (nonnegative)."""
    if cfg is None:
        cfg = default_config()
    if u.is_radial:
        return _phi_radial(u)
    return _phi_box(u, cfg)


def hartree_B(u: Field, cfg: CoulombSolverConfig | None = None) -> float:
    """Hartree energy B(u) = int phi_u u^2 dx >= 0."""
    phi = solve_phi(u, cfg)
    if u.is_radial:
        return float(np.dot(u.grid.quad_weights(), phi.values * u.values**2))
    return float(u.grid.spacing**3 * np.sum(phi.values * u.values**2))
