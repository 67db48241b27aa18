"""Scalar functionals and identities for the constrained problem.

Everything is bookkept through the quintuple

    A  = |grad u|_2^2          Bh = B(u) (Hartree energy)
    C  = int V u^2 dx          D  = int (grad V . x) u^2 dx
    E  = |u|_p^p               mass = |u|_2^2

The constrained energy is j_v = A/2 + C/2 + Bh/4 - s E/p, and the
dilation u^t turns it into the fiber profile

    psi(t) = t^2 A/2 + (1/2) int V(x/t) u^2 + t Bh/4 - s t^(3(p-2)/2) E/p.

The Pohozaev residual is d/dt psi at t = 1, which fixes the coefficient
of the potential term at -D/2: the identity as printed in one place of
the source material carries coefficient 1 on D, but the fiber derivative
and the divergence-theorem form (pohozaev_alt) both force 1/2, and the
two forms are cross-checked against each other in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import coulomb
from .mesh import Field, dot, grad_sq, integrate, lp_norm, rescale, x_dot_grad
from .mesh import apply_laplacian
from .potentials import PotentialSpec

__all__ = [
    "ProblemParams",
    "EnergyBreakdown",
    "energy_breakdown",
    "j_v",
    "pohozaev",
    "pohozaev_alt",
    "fiber_profile",
    "fiber_stationary",
    "lagrange_multiplier",
    "gn_quotient",
    "hls_quotient",
    "first_variation",
]


@dataclass(frozen=True)
class ProblemParams:
    """Exponent p in (10/3, 6), mass target a > 0, nonlinearity strength s."""

    p: float
    a: float
    s: float = 1.0

    def __post_init__(self):
        if not 10.0 / 3.0 < self.p < 6.0:
            raise ValueError(f"p must lie in the open interval (10/3, 6), got {self.p}")
        if not self.a > 0:
            raise ValueError(f"mass target a must be positive, got {self.a}")
        if not 0.5 <= self.s <= 1.0:
            raise ValueError(f"s must lie in [1/2, 1], got {self.s}")


@dataclass(frozen=True)
class EnergyBreakdown:
    A: float
    Bh: float
    C: float
    D: float
    E: float
    mass: float

    def __post_init__(self):
        vals = (self.A, self.Bh, self.C, self.D, self.E, self.mass)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError(f"non-finite energy breakdown {vals}")
        # mass 0 is tolerated so that functionals can be evaluated at u = 0
        if self.A < 0 or self.Bh < 0 or self.E < 0 or self.mass < 0:
            raise ValueError("breakdown signs violated (A, Bh, E, mass >= 0)")


def _potential_values(V: PotentialSpec, u: Field, t: float = 1.0) -> np.ndarray:
    """V(x/t) sampled on u's grid (analytic evaluation)."""
    if u.is_radial:
        if not V.is_radial:
            raise ValueError("non-radial potential with a radial field")
        return V.v_radial(u.grid.nodes / t)
    x, y, z = u.grid.meshgrid()
    return V.v_xyz(x / t, y / t, z / t)


def _w_values(V: PotentialSpec, u: Field) -> np.ndarray:
    if u.is_radial:
        return V.w_radial(u.grid.nodes)
    x, y, z = u.grid.meshgrid()
    return V.w_xyz(x, y, z)


def _quad(u: Field, integrand: np.ndarray) -> float:
    if u.is_radial:
        return float(np.dot(u.grid.quad_weights(), integrand))
    return float(u.grid.spacing**3 * np.sum(integrand))


def energy_breakdown(
    u: Field,
    V: PotentialSpec,
    params: ProblemParams,
    cfg: coulomb.CoulombSolverConfig | None = None,
) -> EnergyBreakdown:
    u2 = u.values**2
    if V.is_zero:
        c = d = 0.0
    else:
        c = _quad(u, _potential_values(V, u) * u2)
        d = _quad(u, _w_values(V, u) * u2)
    return EnergyBreakdown(
        A=grad_sq(u),
        Bh=coulomb.hartree_B(u, cfg),
        C=c,
        D=d,
        E=lp_norm(u, params.p) ** params.p,
        mass=_quad(u, u2),
    )


def j_v(u, V: PotentialSpec, params: ProblemParams, cfg=None) -> float:
    """Constrained energy A/2 + C/2 + Bh/4 - s E/p."""
    b = u if isinstance(u, EnergyBreakdown) else energy_breakdown(u, V, params, cfg)
    return 0.5 * b.A + 0.5 * b.C + 0.25 * b.Bh - params.s * b.E / params.p


def pohozaev(u, V: PotentialSpec, params: ProblemParams, cfg=None) -> float:
    """Scaling-derivative residual A + Bh/4 - (3(p-2)s/2p) E - D/2."""
    b = u if isinstance(u, EnergyBreakdown) else energy_breakdown(u, V, params, cfg)
    p, s = params.p, params.s
    return b.A + 0.25 * b.Bh - 3.0 * (p - 2.0) * s / (2.0 * p) * b.E - 0.5 * b.D


def pohozaev_alt(u: Field, V: PotentialSpec, params: ProblemParams, cfg=None) -> float:
    """Alternative form A + Bh/4 - (3(p-2)s/2p) E + (1/2) int V (3 u^2 + 2 u x.grad u).

    Differs from ``pohozaev`` only by the integration-by-parts defect of
    int div(V u^2 x) dx, which vanishes for decaying V and resolved u.
    """
    b = energy_breakdown(u, V, params, cfg)
    p, s = params.p, params.s
    core = b.A + 0.25 * b.Bh - 3.0 * (p - 2.0) * s / (2.0 * p) * b.E
    if V.is_zero:
        return core
    vvals = _potential_values(V, u)
    mixed = _quad(u, vvals * (3.0 * u.values**2 + 2.0 * u.values * x_dot_grad(u).values))
    return core + 0.5 * mixed


def fiber_profile(u: Field, V: PotentialSpec, params: ProblemParams, t: float,
                  breakdown: EnergyBreakdown | None = None, cfg=None) -> float:
    """j_v along the dilation fiber, evaluated without constructing u^t."""
    if not t > 0:
        raise ValueError(f"fiber parameter t must be positive, got {t}")
    b = breakdown if breakdown is not None else energy_breakdown(u, V, params, cfg)
    p, s = params.p, params.s
    val = 0.5 * t**2 * b.A + 0.25 * t * b.Bh - s / p * t ** (1.5 * (p - 2.0)) * b.E
    if not V.is_zero:
        val += 0.5 * _quad(u, _potential_values(V, u, t) * u.values**2)
    return val


def fiber_stationary(u, params: ProblemParams, cfg=None) -> float:
    """Unique t* > 0 with d/dt I(u^t) = 0 for the autonomous functional.

    Solves t A + Bh/4 - (3(p-2)s/2p) t^((3p-8)/2) E = 0 by bracketed
    Brent iteration to 1e-12 relative; uniqueness holds because
    (3p-8)/2 > 1 for p > 10/3.
    """
    from scipy.optimize import brentq

    b = u if isinstance(u, EnergyBreakdown) else energy_breakdown(
        u, PotentialSpec.zero(), params, cfg
    )
    if b.E <= 0:
        raise ValueError("fiber profile has no finite maximizer without the p-term")
    if b.A <= 0:
        raise ValueError("fiber_stationary needs a nonzero gradient term")
    p, s = params.p, params.s
    kappa = 3.0 * (p - 2.0) * s / (2.0 * p) * b.E
    expo = (3.0 * p - 8.0) / 2.0

    def dpsi(t):
        return t * b.A + 0.25 * b.Bh - kappa * t**expo

    lo, hi = 1e-3, 1e3
    for _ in range(60):
        if dpsi(lo) > 0 and dpsi(hi) < 0:
            return float(brentq(dpsi, lo, hi, rtol=1e-13, maxiter=200))
        lo *= 0.1
        hi *= 10.0
    raise RuntimeError("fiber_stationary: could not bracket the stationary point")


def lagrange_multiplier(u, V: PotentialSpec, params: ProblemParams, cfg=None) -> float:
    """lambda = (s E - A - C - Bh)/mass, i.e. -DJ_V(u)[u] / |u|_2^2."""
    b = u if isinstance(u, EnergyBreakdown) else energy_breakdown(u, V, params, cfg)
    if b.mass <= 0:
        raise ValueError("lagrange multiplier undefined for zero mass")
    return (params.s * b.E - b.A - b.C - b.Bh) / b.mass


def gn_quotient(u: Field, p: float) -> float:
    """Scale- and amplitude-invariant |u|_p / (|grad u|_2^mu |u|_2^(1-mu))."""
    mu = 3.0 * (0.5 - 1.0 / p)
    a = grad_sq(u)
    m = lp_norm(u, 2.0)
    if a == 0 or m == 0:
        raise ValueError("gn_quotient needs a nonzero field")
    return lp_norm(u, p) / (a ** (0.5 * mu) * m ** (1.0 - mu))


def hls_quotient(u: Field, cfg=None) -> float:
    """B(u) / |u|_{12/5}^4, invariant under dilation and amplitude."""
    denom = lp_norm(u, 2.4) ** 4
    if denom == 0:
        raise ValueError("hls_quotient needs a nonzero field")
    return coulomb.hartree_B(u, cfg) / denom


def first_variation(u: Field, V: PotentialSpec, params: ProblemParams,
                    lam: float = 0.0, cfg=None,
                    phi: Field | None = None) -> Field:
    """Assembled residual -Lap u + V u + lam u + phi_u u - s |u|^(p-2) u.

    This is the exact gradient of the discrete j_v (plus lam/2 * mass) in
    the quadrature inner product; ``phi`` may be passed to reuse a
    precomputed potential.
    """
    if phi is None:
        phi = coulomb.solve_phi(u, cfg)
    v = u.values
    out = -apply_laplacian(u).values
    if not V.is_zero:
        out = out + _potential_values(V, u) * v
    out = out + (lam + phi.values) * v
    out = out - params.s * np.sign(v) * np.abs(v) ** (params.p - 1.0)
    return u.with_values(out)


def directional_derivative(u: Field, V: PotentialSpec, params: ProblemParams,
                           direction: Field, cfg=None) -> float:
    """<grad j_v(u), d> in the quadrature inner product."""
    return dot(first_variation(u, V, params, 0.0, cfg), direction)


def fiber_derivative_check(u: Field, V: PotentialSpec, params: ProblemParams,
                           dt: float = 1e-5, cfg=None) -> tuple[float, float]:
    """(pohozaev residual, central finite difference of the fiber profile at 1)."""
    b = energy_breakdown(u, V, params, cfg)
    fd = (
        fiber_profile(u, V, params, 1.0 + dt, breakdown=b)
        - fiber_profile(u, V, params, 1.0 - dt, breakdown=b)
    ) / (2.0 * dt)
    return pohozaev(b, V, params), fd
