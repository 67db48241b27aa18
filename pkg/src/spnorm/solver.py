"""Solvers: autonomous ground state, constrained Newton, homotopy continuation.

The discrete stationarity system for (u, lambda) on the mass sphere is

    F(u, lambda) = ( -Lap u + V u + lambda u + phi_u u - s |u|^(p-2) u,
                     |u|_2^2 - a^2 )

solved by a bordered Newton iteration: one extra unknown (lambda), one
extra equation (mass), inner linear solves by preconditioned MINRES on
the symmetrized system (the Jacobian, including the Hartree
linearization 2(|x|^-1 * (u du)) u, is self-adjoint in the quadrature
inner product).  Forcing follows the inexact-Newton rule
eta_k = 1e-3 * |F_k| clamped to [1e-13, 0.1].

The autonomous ground state is computed by alternating fiber projection
u <- u^(t*) with mass-projected Sobolev-gradient descent, then polishing
with the bordered Newton iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.fft import dstn, idstn
from scipy.linalg import cho_solve_banded, cholesky_banded
from scipy.sparse.linalg import LinearOperator, minres

from . import coulomb
from .energy import (
    EnergyBreakdown,
    ProblemParams,
    energy_breakdown,
    fiber_profile,
    fiber_stationary,
    j_v,
    lagrange_multiplier,
    pohozaev,
)
from .mesh import BoxGrid, Field, RadialGrid, lp_norm
from .potentials import PotentialSpec

__all__ = [
    "Solution",
    "HomotopySchedule",
    "HomotopyLeg",
    "TraceRow",
    "SolverError",
    "ground_state",
    "newton_refine",
    "continuation",
    "mp_path_level",
    "enforce_nonneg",
]


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class TraceRow:
    leg: str
    value: float
    level: float
    lam: float


@dataclass(frozen=True)
class HomotopyLeg:
    kind: str  # s_strength | r_radius | v_strength
    start: float
    stop: float
    steps: int
    points: tuple[float, ...] | None = None  # explicit ladder overriding linspace

    def __post_init__(self):
        if self.kind not in ("s_strength", "r_radius", "v_strength"):
            raise ValueError(f"unknown homotopy leg kind {self.kind!r}")
        if self.steps < 1:
            raise ValueError("leg needs at least one step")
        if self.points is not None and list(self.points) != sorted(self.points):
            raise ValueError("explicit leg points must increase")
        if self.kind == "s_strength":
            if not (0.5 <= self.start <= self.stop <= 1.0):
                raise ValueError("s-leg must increase within [1/2, 1]")
        elif self.kind == "r_radius":
            if not (0 < self.start <= self.stop):
                raise ValueError("r-leg must increase through positive radii")
        else:
            if not (0.0 <= self.start <= self.stop <= 1.0):
                raise ValueError("potential-strength leg must increase within [0, 1]")

    @staticmethod
    def from_points(kind: str, points) -> "HomotopyLeg":
        """Leg through explicit values; the first one is the seed state."""
        pts = tuple(float(x) for x in points)
        if len(pts) < 2:
            raise ValueError("explicit leg needs at least two points")
        return HomotopyLeg(kind, pts[0], pts[-1], len(pts) - 1, points=pts)

    def ladder(self) -> np.ndarray:
        if self.points is not None:
            return np.asarray(self.points[1:])
        return np.linspace(self.start, self.stop, self.steps + 1)[1:]


@dataclass(frozen=True)
class HomotopySchedule:
    legs: tuple[HomotopyLeg, ...] = ()

    @staticmethod
    def of(*legs: HomotopyLeg) -> "HomotopySchedule":
        return HomotopySchedule(tuple(legs))


@dataclass
class Solution:
    u: Field
    lam: float
    params: ProblemParams
    breakdown: EnergyBreakdown
    residual_norm: float
    pohozaev_residual: float
    converged: bool
    level: float
    homotopy_trace: list[TraceRow] = field(default_factory=list)
    message: str = ""
    iterations: int = 0


# ----------------------------------------------------------------------
# shared low-level pieces
# ----------------------------------------------------------------------

def _quad_weights(grid) -> np.ndarray:
    if isinstance(grid, RadialGrid):
        return grid.quad_weights()
    return np.full(grid.npoints, grid.spacing**3)


def _flat(vals: np.ndarray) -> np.ndarray:
    return vals.reshape(-1)


def _shaped(grid, flat: np.ndarray) -> np.ndarray:
    if isinstance(grid, RadialGrid):
        return flat
    return flat.reshape((grid.n,) * 3)


def _phi_of(grid, rho, cfg):
    if isinstance(grid, RadialGrid):
        return coulomb.phi_radial_from_density(grid, rho)
    return coulomb.phi_box_from_density(grid, rho, cfg)


def _apply_lap(grid, vals):
    from .mesh import apply_laplacian

    return apply_laplacian(Field(grid, vals)).values


class _RadialShiftSolver:
    """Cholesky solve for (-Lap + c) in the w = r*u representation."""

    def __init__(self, grid: RadialGrid, c: float):
        n = grid.npoints
        h = grid.h
        ab = np.zeros((2, n))
        ab[0, 1:] = -1.0 / h**2
        ab[1, :] = 2.0 / h**2 + c
        self.grid = grid
        self.factor = cholesky_banded(ab)

    def solve(self, rhs_vals: np.ndarray) -> np.ndarray:
        w = cho_solve_banded((self.factor, False), self.grid.nodes * rhs_vals)
        return w / self.grid.nodes

    def solve_w(self, rhs_w: np.ndarray) -> np.ndarray:
        return cho_solve_banded((self.factor, False), rhs_w)


class _BoxShiftSolver:
    """Sine-basis solve for (-Lap + c) with the zero-extension stencil."""

    def __init__(self, grid: BoxGrid, c: float):
        n = grid.n
        k = np.arange(1, n + 1)
        lam1 = (2.0 - 2.0 * np.cos(np.pi * k / (n + 1))) / grid.spacing**2
        self.denom = (
            lam1[:, None, None] + lam1[None, :, None] + lam1[None, None, :] + c
        )

    def solve(self, rhs_vals: np.ndarray) -> np.ndarray:
        coef = dstn(rhs_vals, type=1, norm="ortho")
        return idstn(coef / self.denom, type=1, norm="ortho")


def _power_term(v: np.ndarray, p: float) -> np.ndarray:
    return np.sign(v) * np.abs(v) ** (p - 1.0)


class _System:
    """Residual and Jacobian of the bordered system on a fixed grid."""

    def __init__(self, grid, V: PotentialSpec, params: ProblemParams,
                 cfg: coulomb.CoulombSolverConfig | None):
        self.grid = grid
        self.params = params
        self.V = V
        self.cfg = cfg if cfg is not None else coulomb.default_config()
        self.w = _quad_weights(grid)
        self.sw = np.sqrt(self.w)
        if V.is_zero:
            self.vvals = None
        elif isinstance(grid, RadialGrid):
            if not V.is_radial:
                raise ValueError("non-radial potential on a radial grid")
            self.vvals = V.v_radial(grid.nodes)
        else:
            self.vvals = _flat(V.v_xyz(*grid.meshgrid()))

    def residual(self, v: np.ndarray, lam: float):
        """Returns (field residual, mass residual, phi) for flat values v."""
        p, s, a = self.params.p, self.params.s, self.params.a
        vs = _shaped(self.grid, v)
        phi = _flat(_phi_of(self.grid, vs * vs, self.cfg))
        r = -_flat(_apply_lap(self.grid, vs)) + (lam + phi) * v - s * _power_term(v, p)
        if self.vvals is not None:
            r += self.vvals * v
        m = float(np.dot(self.w, v * v)) - a**2
        return r, m, phi

    def residual_norm(self, r: np.ndarray, m: float) -> float:
        return math.sqrt(float(np.dot(self.w, r * r)) + m * m)

    def jacobian_operator(self, v: np.ndarray, lam: float, phi: np.ndarray):
        """Symmetric bordered Jacobian acting on [z; dlam], z = sqrt(w)*du."""
        p, s = self.params.p, self.params.s
        diag = lam + phi - s * (p - 1.0) * np.abs(v) ** (p - 2.0)
        if self.vvals is not None:
            diag = diag + self.vvals
        b = self.sw * v
        grid, sw, w, cfg = self.grid, self.sw, self.w, self.cfg
        n = v.size

        def mv(x):
            z, dlam = x[:-1], x[-1]
            du = z / sw
            dus = _shaped(grid, du)
            hart = 2.0 * v * _flat(_phi_of(grid, _shaped(grid, v * du), cfg))
            ldu = -_flat(_apply_lap(grid, dus)) + diag * du + hart
            out = np.empty(n + 1)
            out[:-1] = sw * ldu + b * dlam
            out[-1] = float(np.dot(b, z))
            return out

        return LinearOperator((n + 1, n + 1), matvec=mv)

    def preconditioner(self, lam: float):
        c = max(1.0, lam if np.isfinite(lam) else 1.0)
        if isinstance(self.grid, RadialGrid):
            solver = _RadialShiftSolver(self.grid, c)

            def apply(x):
                out = np.empty_like(x)
                # z is proportional to the w-form, so the tridiagonal solve
                # applies directly
                out[:-1] = solver.solve_w(x[:-1])
                out[-1] = x[-1]
                return out

        else:
            solver = _BoxShiftSolver(self.grid, c)

            def apply(x):
                out = np.empty_like(x)
                out[:-1] = _flat(solver.solve(_shaped(self.grid, x[:-1])))
                out[-1] = x[-1]
                return out

        n = self.grid.npoints
        return LinearOperator((n + 1, n + 1), matvec=apply)


def _residual_scale(lam: float, a: float) -> float:
    """Nondimensionalization of the residual pair.

    The stationarity equation carries terms of size |lambda|*|u|, so its
    double-precision floor scales with the problem magnitude; residual
    norms are reported relative to max(1, |lambda| a).
    """
    return max(1.0, abs(lam) * a)


def _newton_loop(system: _System, v0: np.ndarray, lam0: float,
                 tol_newton: float, max_newton: int):
    """Damped inexact Newton on the bordered system.

    Returns (v, lam, residual_norm, converged, iterations, message);
    residual_norm is the scaled discrete L2 norm of the residual pair.
    """
    v, lam = v0.copy(), float(lam0)
    scale = _residual_scale(lam0, system.params.a)
    r, m, phi = system.residual(v, lam)
    rn = system.residual_norm(r, m) / scale
    growth_streak = 0
    stall_streak = 0
    msg = ""
    for it in range(max_newton):
        if rn <= tol_newton:
            return v, lam, rn, True, it, msg
        op = system.jacobian_operator(v, lam, phi)
        pre = system.preconditioner(lam)
        rhs = np.empty(v.size + 1)
        rhs[:-1] = -system.sw * r
        rhs[-1] = -0.5 * m
        eta = min(0.1, max(1e-10, 1e-3 * rn))
        sol, info = minres(op, rhs, rtol=eta, maxiter=500, M=pre)
        dv = sol[:-1] / system.sw
        dlam = float(sol[-1])
        # backtracking on the residual norm
        alpha, accepted = 1.0, False
        for _ in range(10):
            v_try = v + alpha * dv
            lam_try = lam + alpha * dlam
            r_try, m_try, phi_try = system.residual(v_try, lam_try)
            rn_try = system.residual_norm(r_try, m_try) / scale
            if rn_try < rn * (1.0 - 1e-4 * alpha) or rn_try < tol_newton:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            # no descent direction left: either the round-off floor of the
            # residual evaluation, a singular Jacobian, or divergence
            stall_streak += 1
            if stall_streak >= 3:
                if rn <= 1e3 * tol_newton:
                    msg = f"converged to the round-off floor {rn:.3e}"
                    return v, lam, rn, True, it + 1, msg
                if info != 0:
                    raise SolverError(
                        "projected Jacobian appears singular (inner solve stalled); "
                        "restart from a homotopy step closer to the last converged state"
                    )
                msg = f"newton stalled at residual {rn:.3e}"
                return v, lam, rn, False, it + 1, msg
            growth_streak += 1
            if growth_streak >= 5:
                msg = "newton diverged: residual grew for 5 consecutive steps"
                return v, lam, rn, False, it + 1, msg
            continue
        stall_streak = 0
        growth_streak = 0
        v, lam, r, m, phi, rn = v_try, lam_try, r_try, m_try, phi_try, rn_try
    converged = rn <= tol_newton
    if not converged:
        msg = f"newton reached max_newton with residual {rn:.3e}"
    return v, lam, rn, converged, max_newton, msg


def _solution_from_state(grid, v, lam, V, params, rn, converged, cfg,
                         trace=None, message="", iterations=0) -> Solution:
    u = Field(grid, _shaped(grid, v))
    b = energy_breakdown(u, V, params, cfg)
    return Solution(
        u=u,
        lam=lam,
        params=params,
        breakdown=b,
        residual_norm=rn,
        pohozaev_residual=pohozaev(b, V, params),
        converged=converged,
        level=j_v(b, V, params),
        homotopy_trace=list(trace) if trace else [],
        message=message,
        iterations=iterations,
    )


# ----------------------------------------------------------------------
# public drivers
# ----------------------------------------------------------------------

def _normalize_mass(w: np.ndarray, v: np.ndarray, a: float) -> np.ndarray:
    m = float(np.dot(w, v * v))
    if m <= 0:
        raise SolverError("cannot normalize a zero field")
    return v * (a / math.sqrt(m))


def _gaussian_seed_width(params: ProblemParams, grid: RadialGrid) -> float:
    """Width of the Gaussian seed, placed on the Nehari-Pohozaev set.

    For a mass-a^2 Gaussian of width sigma every term of the fiber
    derivative has a closed form, so the width solving psi'(1) = 0 is a
    1-d root; seeding there keeps the first fiber projection near t = 1.
    """
    from scipy.optimize import brentq

    p, s, a = params.p, params.s, params.a

    def dpsi(log_sigma):
        sig = math.exp(log_sigma)
        A = 1.5 * a**2 / sig**2
        B = a**4 * math.sqrt(2.0 / math.pi) / sig
        E = a**p * (math.pi * sig**2) ** (-0.75 * p) * (2.0 * math.pi * sig**2 / p) ** 1.5
        return A + 0.25 * B - 3.0 * (p - 2.0) * s / (2.0 * p) * E

    lo = math.log(4.0 * grid.h)
    hi = math.log(grid.r_max / 3.0)
    if lo >= hi:
        return grid.r_max / 10.0
    if dpsi(lo) > 0 or dpsi(hi) < 0:
        # no admissible crossing inside the resolvable range; fall back
        return grid.r_max / 10.0
    return math.exp(brentq(dpsi, lo, hi, rtol=1e-10))


def _fiber_project_fixed_grid(grid: RadialGrid, v: np.ndarray, t: float) -> np.ndarray:
    """u(r) <- t^(3/2) u(t r) resampled on the same grid (descent device only).

    t is clipped per application so one projection cannot compress the
    state below grid resolution; repeated projections still travel far.
    """
    t = min(max(t, 0.2), 5.0)
    r = grid.nodes
    left = v[0]  # u'(0) = 0: constant extrapolation toward the origin
    return t**1.5 * np.interp(t * r, r, v, left=left, right=0.0)


def ground_state(params: ProblemParams, grid: RadialGrid, u0: Field | None = None,
                 *, tol_newton: float = 1e-10, max_newton: int = 60,
                 descent_step: float = 0.4, max_descent: int = 800,
                 descent_gtol: float = 2e-3) -> Solution:
    """Autonomous ground state (V = 0) on a radial grid.

    Minimizes the energy over the discrete Nehari-Pohozaev set by
    alternating fiber projection with mass-projected Sobolev-gradient
    descent, then polishes with the bordered Newton iteration.
    """
    if not isinstance(grid, RadialGrid):
        raise ValueError("ground_state runs on radial grids")
    V0 = PotentialSpec.zero()
    system = _System(grid, V0, params, None)
    w = system.w
    p, s, a = params.p, params.s, params.a

    if u0 is not None:
        if u0.grid != grid:
            raise ValueError("seed field lives on a different grid")
        v = np.abs(u0.values.copy())
    else:
        sigma = _gaussian_seed_width(params, grid)
        v = np.exp(-(grid.nodes**2) / (2.0 * sigma**2))
    v = _normalize_mass(w, v, a)

    def breakdown_fast(vv):
        u = Field(grid, vv)
        b = energy_breakdown(u, V0, params)
        return b

    b = breakdown_fast(v)
    t_star = fiber_stationary(b, params)
    v = _normalize_mass(w, _fiber_project_fixed_grid(grid, v, t_star), a)

    tau = descent_step
    level_prev = math.inf
    stagnant = 0
    stagnated = False
    it_desc = 0
    for it_desc in range(max_descent):
        b = breakdown_fast(v)
        lam_hat = lagrange_multiplier(b, V0, params)
        r, _, _ = system.residual(v, lam_hat)
        # lam_hat projects the sphere normal out, so r is the constrained gradient
        rn_grad = system.residual_norm(r, 0.0) / _residual_scale(lam_hat, a)
        if rn_grad <= descent_gtol:
            break
        shift = _RadialShiftSolver(grid, max(0.1, lam_hat))
        g = shift.solve(r)
        v_new = _normalize_mass(w, v - tau * g, a)
        b_new = breakdown_fast(v_new)
        try:
            t_star = fiber_stationary(b_new, params)
        except (ValueError, RuntimeError):
            tau *= 0.5
            continue
        v_new = _normalize_mass(w, _fiber_project_fixed_grid(grid, v_new, t_star), a)
        level = j_v(breakdown_fast(v_new), V0, params)
        if level > level_prev + 1e-13:
            tau = max(tau * 0.5, 1e-4)
            continue
        if abs(level - level_prev) < 1e-14:
            stagnant += 1
            if stagnant >= 50:
                stagnated = True  # hand over to Newton; report if that fails too
                break
        else:
            stagnant = 0
        v = v_new
        level_prev = level
        tau = min(tau * 1.05, descent_step)

    b = breakdown_fast(v)
    lam_hat = lagrange_multiplier(b, V0, params)
    v_fin, lam_fin, rn, ok, iters, msg = _newton_loop(
        system, v, lam_hat, tol_newton, max_newton
    )
    if not ok and stagnated:
        msg = f"descent stagnation without residual convergence; {msg}"
    return _solution_from_state(grid, v_fin, lam_fin, V0, params, rn, ok, None,
                                message=msg, iterations=it_desc + iters)


def newton_refine(u0: Field, lambda0: float, V: PotentialSpec,
                  params: ProblemParams, domain=None, *,
                  tol_newton: float = 1e-10, max_newton: int = 60,
                  cfg: coulomb.CoulombSolverConfig | None = None) -> Solution:
    """Bordered Newton on the full residual system from a given seed."""
    grid = domain if domain is not None else u0.grid
    if domain is not None and u0.grid != domain:
        raise ValueError("seed grid disagrees with the requested domain")
    v = _flat(u0.values).copy()
    w = _quad_weights(grid)
    m = float(np.dot(w, v * v))
    if m == 0:
        raise ValueError("newton_refine needs a nonzero seed")
    if abs(m - params.a**2) > 0.1 * params.a**2:
        raise ValueError(
            f"seed mass {m:.6g} is more than 10% away from target {params.a**2:.6g}"
        )
    v = _normalize_mass(w, v, params.a)
    system = _System(grid, V, params, cfg)
    v_fin, lam_fin, rn, ok, iters, msg = _newton_loop(
        system, v, float(lambda0), tol_newton, max_newton
    )
    return _solution_from_state(grid, v_fin, lam_fin, V, params, rn, ok, cfg,
                                message=msg, iterations=iters)


def _regrid_radial(sol: Solution, r_new: float) -> tuple[RadialGrid, np.ndarray]:
    """Extend r_max at fixed spacing, zero-padding the values."""
    g: RadialGrid = sol.u.grid
    n_new = int(round(r_new / g.h))
    if n_new < g.n:
        raise ValueError("r-leg must not shrink the domain")
    grid = RadialGrid(n_new * g.h, n_new)
    v = np.zeros(grid.npoints)
    v[: g.npoints] = sol.u.values
    return grid, v


def continuation(schedule: HomotopySchedule, params: ProblemParams,
                 V: PotentialSpec, grid: RadialGrid, seed: Solution | None = None,
                 *, tol_newton: float = 1e-10, max_newton: int = 60,
                 cfg: coulomb.CoulombSolverConfig | None = None) -> Solution:
    """Run homotopy legs in order, seeding each step with the previous state.

    Records (leg, value, level, lambda) per step; a failed step aborts
    and the partial trace is preserved on the returned Solution.
    """
    if seed is None:
        s0 = params.s
        for leg in schedule.legs:
            if leg.kind == "s_strength":
                s0 = leg.start
                break
        first = schedule.legs[0] if schedule.legs else None
        v_off = first is not None and first.kind == "v_strength" and first.start == 0.0
        if not (V.is_zero or v_off):
            raise ValueError(
                "continuation without a seed needs either V = 0 or a leading "
                "potential-strength leg starting at 0"
            )
        seed = ground_state(replace(params, s=s0), grid,
                            tol_newton=tol_newton, max_newton=max_newton)
        if not seed.converged:
            return seed

    current = seed
    trace: list[TraceRow] = list(seed.homotopy_trace)
    cur_params = current.params
    # if a potential-strength leg leads from 0 the seed state is autonomous
    cur_V = V.scaled(0.0) if _leads_with_v0(schedule) else V

    for leg in schedule.legs:
        for value in leg.ladder():
            if leg.kind == "s_strength":
                cur_params = replace(cur_params, s=float(value))
                g, v0 = current.u.grid, current.u.values
            elif leg.kind == "v_strength":
                cur_V = V.scaled(float(value))
                g, v0 = current.u.grid, current.u.values
            else:
                g, v0 = _regrid_radial(current, float(value))
            step = newton_refine(Field(g, v0), current.lam, cur_V, cur_params,
                                 tol_newton=tol_newton, max_newton=max_newton, cfg=cfg)
            trace.append(TraceRow(leg.kind, float(value), step.level, step.lam))
            step.homotopy_trace = trace
            if not step.converged:
                step.message = step.message or f"continuation failed on {leg.kind} at {value}"
                return step
            current = step
    current.homotopy_trace = trace
    return current


def _leads_with_v0(schedule: HomotopySchedule) -> bool:
    return bool(schedule.legs) and schedule.legs[0].kind == "v_strength" \
        and schedule.legs[0].start == 0.0


def mp_path_level(u_seed: Field, V: PotentialSpec, params: ProblemParams,
                  cfg: coulomb.CoulombSolverConfig | None = None) -> float:
    """Upper bound for the mountain-pass level: max of j_v along the fiber.

    The maximum over the dilation fiber through u_seed is bracketed on a
    log ladder and refined until the value is resolved to 1e-8 relative.
    """
    b = energy_breakdown(u_seed, V, params, cfg)

    def f(t):
        return fiber_profile(u_seed, V, params, t, breakdown=b)

    ts = np.logspace(-2.0, 2.0, 81)
    vals = np.array([f(t) for t in ts])
    k = int(np.argmax(vals))
    while k == len(ts) - 1:
        ts = np.logspace(math.log10(ts[0]), math.log10(ts[-1]) + 1.0, len(ts))
        vals = np.array([f(t) for t in ts])
        k = int(np.argmax(vals))
    if k == 0:
        lo, hi = ts[0] * 1e-2, ts[1]
    else:
        lo, hi = ts[k - 1], ts[k + 1]
    fmax = vals[k]
    for _ in range(200):
        tm = np.linspace(lo, hi, 9)
        fm = np.array([f(t) for t in tm])
        j = int(np.argmax(fm))
        new_max = fm[j]
        jl, jh = max(j - 1, 0), min(j + 1, 8)
        lo, hi = tm[jl], tm[jh]
        if abs(new_max - fmax) <= 1e-8 * max(abs(new_max), 1e-300) and (
            fm[j] - min(fm[jl], fm[jh]) <= 1e-8 * max(abs(new_max), 1e-300)
        ):
            return float(new_max)
        fmax = new_max
    return float(fmax)


def enforce_nonneg(u: Field, a: float) -> Field:
    """|u| rescaled back to mass a^2."""
    nrm = lp_norm(u, 2.0)
    if nrm == 0:
        raise ValueError("cannot project a zero field onto the mass sphere")
    return u.with_values(np.abs(u.values) * (a / nrm))
