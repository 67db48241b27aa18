"""Potential catalog, derived fields, norms, and assumption checkers.

Built-in kinds (all with analytic gradients):

* ``zero``
* ``power_decay(c, alpha)``          V = c (1+|x|)^-alpha, c > 0, alpha in (0,1)
* ``piecewise_power(c, alpha, beta, q)``
                                     V = c (1+|x|)^-alpha inside B_1,
                                     2^-alpha c |x|^-beta outside,
                                     continuous at |x| = 1
* ``gaussian_well(c, sigma)``        V = -c exp(-|x|^2/sigma^2), c > 0
* ``angular_modulated(base, eps)``   V = (1 + eps * x3/|x|) * base(x), non-radial
* ``custom_table``                   tabulated radial values, optional gradient

Derived fields: W = grad V . x and W~ = V |x|.  The checkers turn the
admissibility conditions on V into signed-margin reports; the sampled
ones are consistency reports, not proofs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .mesh import BoxGrid, Field, RadialGrid

__all__ = [
    "PotentialSpec",
    "AssumptionReport",
    "materialize",
    "potential_norms",
    "aubin_talenti",
    "check_v1",
    "check_v1prime",
    "check_v2_sampled",
    "check_v3",
    "check_v4",
    "eta_tilde",
    "theta_v1prime",
    "lambda_pq",
    "a_star",
    "embedding_constant_cq",
]

_KINDS = {
    "zero",
    "power_decay",
    "piecewise_power",
    "angular_modulated",
    "gaussian_well",
    "custom_table",
}


@dataclass(frozen=True)
class PotentialSpec:
    kind: str
    c: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0
    q: float = 0.0
    sigma: float = 1.0
    eps_ang: float = 0.0
    base: Optional["PotentialSpec"] = None
    table_r: Optional[np.ndarray] = None
    table_v: Optional[np.ndarray] = None
    table_w: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "power_decay":
            if not (self.c > 0 and 0 < self.alpha < 1):
                raise ValueError("power_decay needs c > 0 and alpha in (0,1)")
        elif self.kind == "piecewise_power":
            if not (self.c > 0 and self.q > 3 and 3.0 / self.q < self.alpha < 1
                    and 0 < self.beta < self.q / 3.0):
                raise ValueError(
                    "piecewise_power needs c > 0, q > 3, alpha in (3/q, 1), beta in (0, q/3)"
                )
        elif self.kind == "gaussian_well":
            if not (self.c > 0 and self.sigma > 0):
                raise ValueError("gaussian_well needs c > 0 and sigma > 0")
        elif self.kind == "angular_modulated":
            if self.base is None or self.base.kind == "angular_modulated":
                raise ValueError("angular_modulated needs a radial base potential")
            if not 0 <= self.eps_ang < 1:
                raise ValueError("angular amplitude must lie in [0, 1)")
        elif self.kind == "custom_table":
            if self.table_r is None or self.table_v is None:
                raise ValueError("custom_table needs radii and values")

    # -- constructors -------------------------------------------------
    @staticmethod
    def zero() -> "PotentialSpec":
        return PotentialSpec("zero")

    @staticmethod
    def power_decay(c: float, alpha: float) -> "PotentialSpec":
        return PotentialSpec("power_decay", c=c, alpha=alpha)

    @staticmethod
    def piecewise_power(c: float, alpha: float, beta: float, q: float) -> "PotentialSpec":
        return PotentialSpec("piecewise_power", c=c, alpha=alpha, beta=beta, q=q)

    @staticmethod
    def gaussian_well(c: float, sigma: float) -> "PotentialSpec":
        return PotentialSpec("gaussian_well", c=c, sigma=sigma)

    @staticmethod
    def angular_modulated(base: "PotentialSpec", eps_ang: float) -> "PotentialSpec":
        return PotentialSpec("angular_modulated", base=base, eps_ang=eps_ang)

    @staticmethod
    def custom_table(r, v, w=None) -> "PotentialSpec":
        return PotentialSpec(
            "custom_table",
            table_r=np.asarray(r, dtype=float),
            table_v=np.asarray(v, dtype=float),
            table_w=None if w is None else np.asarray(w, dtype=float),
        )

    # -- structure ----------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or (self.kind != "custom_table" and self.c == 0.0)

    @property
    def is_radial(self) -> bool:
        return self.kind != "angular_modulated"

    @property
    def has_gradient(self) -> bool:
        if self.kind == "custom_table":
            return self.table_w is not None
        if self.kind == "angular_modulated":
            return self.base.has_gradient
        return True

    def scaled(self, eps: float) -> "PotentialSpec":
        """Amplitude-scaled copy eps*V (continuation in potential strength)."""
        if eps < 0:
            raise ValueError("amplitude factor must be nonnegative")
        if self.kind == "zero" or eps == 0.0:
            return PotentialSpec.zero()
        if self.kind == "custom_table":
            return replace(
                self,
                table_v=eps * self.table_v,
                table_w=None if self.table_w is None else eps * self.table_w,
            )
        if self.kind == "angular_modulated":
            return replace(self, base=self.base.scaled(eps))
        return replace(self, c=eps * self.c)

    # -- evaluation ---------------------------------------------------
    def v_radial(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(r)
        if self.kind == "power_decay":
            return self.c * (1.0 + r) ** (-self.alpha)
        if self.kind == "piecewise_power":
            inner = self.c * (1.0 + r) ** (-self.alpha)
            with np.errstate(divide="ignore"):
                outer = 2.0 ** (-self.alpha) * self.c * np.where(r > 0, r, 1.0) ** (-self.beta)
            return np.where(r <= 1.0, inner, outer)
        if self.kind == "gaussian_well":
            return -self.c * np.exp(-(r / self.sigma) ** 2)
        if self.kind == "custom_table":
            # linear interpolation; decay assumed beyond the last node
            return np.interp(r, self.table_r, self.table_v,
                             left=self.table_v[0], right=0.0)
        raise ValueError(f"{self.kind} is not radial")

    def w_radial(self, r: np.ndarray) -> np.ndarray:
        """W(r) = grad V . x = r V'(r) for radial potentials."""
        r = np.asarray(r, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(r)
        if self.kind == "power_decay":
            return -self.c * self.alpha * r * (1.0 + r) ** (-self.alpha - 1.0)
        if self.kind == "piecewise_power":
            inner = -self.c * self.alpha * r * (1.0 + r) ** (-self.alpha - 1.0)
            outer = -self.beta * self.v_radial(np.maximum(r, 1.0))
            return np.where(r <= 1.0, inner, outer)
        if self.kind == "gaussian_well":
            return 2.0 * self.c * (r / self.sigma) ** 2 * np.exp(-(r / self.sigma) ** 2)
        if self.kind == "custom_table":
            if self.table_w is None:
                raise ValueError("custom_table has no gradient data; cannot produce W")
            return np.interp(r, self.table_r, self.table_w,
                             left=self.table_w[0], right=0.0)
        raise ValueError(f"{self.kind} is not radial")

    def _modulation(self, x, y, z, r):
        # C^1 function on the sphere: 1 + eps * cos(polar angle)
        with np.errstate(invalid="ignore", divide="ignore"):
            ct = np.where(r > 0, z / np.where(r > 0, r, 1.0), 0.0)
        return 1.0 + self.eps_ang * ct

    def v_xyz(self, x, y, z) -> np.ndarray:
        r = np.sqrt(x**2 + y**2 + z**2)
        if self.kind == "angular_modulated":
            return self._modulation(x, y, z, r) * self.base.v_radial(r)
        return self.v_radial(r)

    def w_xyz(self, x, y, z) -> np.ndarray:
        # grad(phi(x/|x|)) . x = 0 for any 0-homogeneous phi, so the
        # modulation multiplies W of the base unchanged
        r = np.sqrt(x**2 + y**2 + z**2)
        if self.kind == "angular_modulated":
            return self._modulation(x, y, z, r) * self.base.w_radial(r)
        return self.w_radial(r)


@dataclass(frozen=True)
class AssumptionReport:
    """Signed-slack verdict for one admissibility condition.

    margin > 0 iff verdict is true; margin is the slack of the binding
    (smallest-slack) inequality.
    """

    name: str
    verdict: bool
    margin: float
    inputs: dict

    def __post_init__(self):
        if (self.margin > 0) != self.verdict:
            raise ValueError("margin sign inconsistent with verdict")


def materialize(spec: PotentialSpec, grid) -> tuple[Field, Field, Field]:
    """Pointwise (V, W, W~) fields on the grid; W needs an analytic gradient."""
    if not spec.has_gradient:
        raise ValueError("custom_table has no gradient data; cannot produce W")
    if isinstance(grid, RadialGrid):
        if not spec.is_radial:
            raise ValueError("non-radial potential cannot be materialized on a radial grid")
        r = grid.nodes
        v = spec.v_radial(r)
        w = spec.w_radial(r)
        wt = v * r
    elif isinstance(grid, BoxGrid):
        x, y, z = grid.meshgrid()
        v = spec.v_xyz(x, y, z)
        w = spec.w_xyz(x, y, z)
        wt = v * np.sqrt(x**2 + y**2 + z**2)
    else:
        raise TypeError(f"unsupported grid {type(grid)!r}")
    return Field(grid, v), Field(grid, w), Field(grid, wt)


# ----------------------------------------------------------------------
# norms with analytic tail corrections
# ----------------------------------------------------------------------

def _power_tail(coef: float, expo: float, r0: float, q: float) -> float:
    """int_{r0}^inf (coef * r^-expo)^q * 4 pi r^2 dr, or inf if divergent."""
    if coef == 0.0:
        return 0.0
    power = q * expo - 2.0
    if power <= 1.0:
        return math.inf
    return 4.0 * math.pi * coef**q * r0 ** (1.0 - power) / (power - 1.0)


def _shifted_power_tail(coef: float, expo: float, r0: float, q: float) -> float:
    """int_{r0}^inf (coef*(1+r)^-expo)^q * 4 pi r^2 dr in closed form."""
    if coef == 0.0:
        return 0.0
    a = q * expo
    if a <= 3.0:
        return math.inf
    u0 = 1.0 + r0
    # r^2 = (u-1)^2 expanded against u^-a moments
    m = [u0 ** (k + 1.0 - a) / (a - k - 1.0) for k in range(3)]
    return 4.0 * math.pi * coef**q * (m[2] - 2.0 * m[1] + m[0])


def _tail_norm_q(spec: PotentialSpec, which: str, r0: float, q: float) -> float:
    """Closed-form tail of int |.|^q beyond r0 for the built-in decay rates."""
    if spec.kind == "zero" or spec.kind == "custom_table":
        return 0.0
    if spec.kind == "gaussian_well":
        return 0.0  # e^(-q r0^2/sigma^2) tails are below round-off for any usable grid
    if spec.kind == "angular_modulated":
        base_tail = _tail_norm_q(spec.base, which, r0, q)
        if math.isinf(base_tail):
            return math.inf
        # angular factor separates: mean of |1+eps*t|^q over t in [-1,1]
        e = spec.eps_ang
        if e == 0.0:
            ang = 1.0
        else:
            ang = ((1.0 + e) ** (q + 1.0) - (1.0 - e) ** (q + 1.0)) / (2.0 * e * (q + 1.0))
        return ang * base_tail
    if spec.kind == "power_decay":
        if which == "V":
            return _shifted_power_tail(spec.c, spec.alpha, r0, q)
        if which == "W":
            # |W| = c*alpha*r*(1+r)^(-alpha-1) <= c*alpha*(1+r)^-alpha
            return _shifted_power_tail(spec.c * spec.alpha, spec.alpha, r0, q)
        # W~ = V*r ~ c*(1+r)^-alpha * r <= c*(1+r)^(-alpha+1)
        return _shifted_power_tail(spec.c, spec.alpha - 1.0, r0, q)
    if spec.kind == "piecewise_power":
        coef = 2.0 ** (-spec.alpha) * spec.c
        if which == "V":
            return _power_tail(coef, spec.beta, r0, q)
        if which == "W":
            return _power_tail(spec.beta * coef, spec.beta, r0, q)
        return _power_tail(coef, spec.beta - 1.0, r0, q)
    raise AssertionError(spec.kind)


def _sup_tail(spec: PotentialSpec, which: str, r0: float) -> float:
    """sup over r > r0; all built-ins have nonincreasing |V|, |W| tails."""
    if spec.kind == "angular_modulated":
        return (1.0 + spec.eps_ang) * _sup_tail(spec.base, which, r0)
    if spec.kind in ("zero", "custom_table", "gaussian_well"):
        return 0.0
    vals = spec.v_radial(np.array([r0])) if which == "V" else spec.w_radial(np.array([r0]))
    return float(np.abs(vals[0]))


def potential_norms(spec: PotentialSpec, grid, q: float | None = None) -> dict:
    """Quadrature norms with analytic tail corrections beyond the grid.

    Returns {"V_inf", "V_q", "V_3/2", "W_inf", "W_q", "Wt_3", "q"}; a
    divergent requested norm is reported as +inf.
    """
    if q is None:
        q = spec.q if spec.q > 3 else 6.0
    if isinstance(grid, RadialGrid):
        if not spec.is_radial and spec.kind != "angular_modulated":
            raise ValueError("non-radial potential on radial grid")
        r = grid.nodes
        if spec.kind == "angular_modulated":
            v = spec.base.v_radial(r)
            w = spec.base.w_radial(r)
            v_origin = float(np.abs(spec.base.v_radial(np.array([0.0])))[0])
        else:
            v = spec.v_radial(r)
            w = spec.w_radial(r)
            v_origin = float(np.abs(spec.v_radial(np.array([0.0])))[0])
        wt = v * r
        wq = grid.quad_weights()
        r0 = grid.r_max

        def norm(vals, which, qq):
            body = float(np.dot(wq, np.abs(vals) ** qq))
            if spec.kind == "angular_modulated":
                e, base_vals = spec.eps_ang, vals
                if e > 0:
                    ang = ((1 + e) ** (qq + 1) - (1 - e) ** (qq + 1)) / (2 * e * (qq + 1))
                    body *= ang
            tail = _tail_norm_q(spec, which, r0, qq)
            if math.isinf(tail):
                return math.inf
            return (body + tail) ** (1.0 / qq)

        sup_factor = 1.0 + spec.eps_ang if spec.kind == "angular_modulated" else 1.0
        return {
            "V_inf": sup_factor * max(float(np.max(np.abs(v))), _sup_tail(spec, "V", r0)),
            "V_q": norm(v, "V", q),
            "V_3/2": norm(v, "V", 1.5),
            "W_inf": sup_factor * max(float(np.max(np.abs(w))), _sup_tail(spec, "W", r0)),
            "W_q": norm(w, "W", q),
            "Wt_3": norm(wt, "Wt", 3.0),
            "q": q,
        }
    # box: plain grid quadrature, no tail model
    vf, wf, wtf = materialize(spec, grid)
    d3 = grid.spacing**3

    def bnorm(fld, qq):
        return float((d3 * np.sum(np.abs(fld.values) ** qq)) ** (1.0 / qq))

    return {
        "V_inf": float(np.max(np.abs(vf.values))),
        "V_q": bnorm(vf, q),
        "V_3/2": bnorm(vf, 1.5),
        "W_inf": float(np.max(np.abs(wf.values))),
        "W_q": bnorm(wf, q),
        "Wt_3": bnorm(wtf, 3.0),
        "q": q,
    }


# ----------------------------------------------------------------------
# constants
# ----------------------------------------------------------------------

def aubin_talenti() -> float:
    """Best constant S in |grad u|_2^2 >= S |u|_6^2: 3 pi (Gamma(3/2)/Gamma(3))^(2/3)."""
    return 3.0 * math.pi * (math.gamma(1.5) / math.gamma(3.0)) ** (2.0 / 3.0)


def eta_tilde(p: float, norms: dict) -> float:
    """6(p-2) / (3p-10 - 3(p-4)^+ S^-1 |V|_{3/2} - 4 S^-1/2 |Wt|_3)."""
    s = aubin_talenti()
    denom = (
        3.0 * p - 10.0
        - 3.0 * max(p - 4.0, 0.0) / s * norms["V_3/2"]
        - 4.0 / math.sqrt(s) * norms["Wt_3"]
    )
    if not denom > 0:
        raise ValueError(
            "eta_tilde undefined: denominator nonpositive (the second inequality of "
            "the negative-potential admissibility check fails)"
        )
    return 6.0 * (p - 2.0) / denom


def theta_v1prime(tv: float, p: float, q: float, c_q: float) -> float:
    """Level-inflation threshold theta(t) for the L^q potential class."""
    if not (10.0 / 3.0 < p < 6.0):
        raise ValueError(f"p must lie in (10/3, 6), got {p}")
    if q <= 3 or c_q <= 0 or tv < 0:
        raise ValueError("theta needs q > 3, C_q > 0, t >= 0")
    f1 = 1.0 + p * c_q**2 / (q * (p - 2.0)) * max(1.0, (3.0 * p - 8.0) / p) * tv
    f2 = 1.0 + tv * (1.0 - 3.0 / (2.0 * q)) * 3.0 * c_q**2 * (p - 2.0) / (3.0 * p - 10.0)
    return f1 ** (3.0 * (p - 2.0) / (3.0 * p - 10.0)) * f2 - 1.0


def lambda_pq(p: float, c_q: float) -> float:
    """Lower bound Lambda_{p,q} for |u|_p^p / |u|_{2q/(q-1)}^2 at small mass."""
    if not (10.0 / 3.0 < p < 6.0) or c_q <= 0:
        raise ValueError("lambda_pq needs p in (10/3, 6) and C_q > 0")
    return min(p / (3.0 * p - 8.0), 1.0) / c_q**2


def a_star(p: float, c_hat: float, delta: float, eta_t: float) -> float:
    """Smallness threshold ((6-p)/(|6-2p| C^))^(1/3) (delta/eta~)^(1/6)."""
    if not (10.0 / 3.0 < p < 6.0):
        raise ValueError(f"p must lie in (10/3, 6), got {p}")
    if c_hat <= 0 or delta <= 0 or eta_t <= 0:
        raise ValueError("a_star needs positive C^, delta, eta~")
    return ((6.0 - p) / (abs(6.0 - 2.0 * p) * c_hat)) ** (1.0 / 3.0) * (delta / eta_t) ** (1.0 / 6.0)


def embedding_constant_cq(q: float, n_sigma: int = 400) -> float:
    """Default C_q: max of |u|_{2q/(q-1)} / |u|_{H^1} over a Gaussian family.

    A lower bound on the true embedding constant; the actual value is
    never given analytically, so this serves as the working default.
    """
    if q <= 3:
        raise ValueError("q must exceed 3")
    m = 2.0 * q / (q - 1.0)
    log_s = np.linspace(-3.0, 3.0, n_sigma)
    best = 0.0
    for s in np.exp(log_s):
        # unit-mass Gaussian of width s
        lp = (math.pi * s**2) ** (-3.0 * m / 4.0) * (2.0 * math.pi * s**2 / m) ** 1.5
        num = lp ** (1.0 / m)
        h1 = math.sqrt(1.0 + 1.5 / s**2)
        best = max(best, num / h1)
    return best


# ----------------------------------------------------------------------
# checkers
# ----------------------------------------------------------------------

def check_v1(norms: dict, a: float, c_a: float, theta: float, eta: float, p: float) -> AssumptionReport:
    """Bounded nonnegative class: |V|_inf < 2 theta c_a/a^2, |W|_inf < eta c_a/a^2,
    eta + 2 theta < (6-p)/(p-2)."""
    if not (0 < theta < 1) or eta <= 0:
        raise ValueError("check_v1 needs theta in (0,1) and eta > 0")
    m1 = 2.0 * theta * c_a / a**2 - norms["V_inf"]
    m2 = eta * c_a / a**2 - norms["W_inf"]
    m3 = (6.0 - p) / (p - 2.0) - eta - 2.0 * theta
    margin = min(m1, m2, m3)
    return AssumptionReport(
        "V1", margin > 0, margin,
        {"a": a, "c_a": c_a, "theta": theta, "eta": eta, "p": p,
         "V_inf": norms["V_inf"], "W_inf": norms["W_inf"]},
    )


def check_v1prime(norms: dict, p: float, q: float, c_q: float) -> AssumptionReport:
    """L^q class: V, W in L^q plus the two smallness inequalities that make
    the gradient bound and the multiplier sign argument close."""
    vq, wq = norms["V_q"], norms["W_q"]
    if math.isinf(vq) or math.isinf(wq):
        return AssumptionReport("V1'", False, -math.inf,
                                {"p": p, "q": q, "C_q": c_q, "V_q": vq, "W_q": wq})
    m1 = (3.0 * p - 10.0) - 4.0 * c_q**2 * wq
    if m1 > 0:
        theta = theta_v1prime(vq, p, q, c_q)
        lhs = (p - 2.0) * (vq + wq) * c_q**2 * 6.0 * (p - 2.0) * (1.0 + theta) / m1
        m2 = (6.0 - p) - lhs
    else:
        theta = math.nan
        m2 = -math.inf
    margin = min(m1, m2)
    return AssumptionReport(
        "V1'", margin > 0, margin,
        {"p": p, "q": q, "C_q": c_q, "V_q": vq, "W_q": wq, "theta": theta},
    )


def check_v2_sampled(spec: PotentialSpec, radii, alpha: float, delta: float,
                     n_dir: int = 24, n_ball: int = 32, seed: int = 0) -> AssumptionReport:
    """Sampled consistency report for the decay-direction condition.

    For each |y| in ``radii`` it samples directions y and points
    x in B_{delta |y|}(y) and records max |y|^alpha grad V(x) . y.
    Verdict: all maxima negative and nonincreasing over the two largest
    radii.  Heuristic by nature; never a proof.
    """
    if not spec.has_gradient:
        raise ValueError("custom_table has no gradient data")
    if not (0 < alpha < 1 and 0 < delta < 1):
        raise ValueError("check_v2 needs alpha, delta in (0,1)")
    rng = np.random.default_rng(seed)
    radii = sorted(float(r) for r in radii)
    maxima = []
    for ry in radii:
        worst = -math.inf
        for _ in range(n_dir):
            y = rng.normal(size=3)
            y *= ry / np.linalg.norm(y)
            offsets = rng.normal(size=(n_ball, 3))
            offsets *= (delta * ry * rng.random(n_ball) ** (1 / 3) /
                        np.linalg.norm(offsets, axis=1))[:, None]
            pts = y[None, :] + offsets
            r = np.linalg.norm(pts, axis=1)
            if spec.kind == "angular_modulated":
                gradv_dot_y = _grad_dot(spec, pts, y)
            else:
                # radial: grad V(x) = V'(|x|) x/|x|; grad V(x).y = W(|x|)/|x|^2 * (x.y)
                w = spec.w_radial(r)
                gradv_dot_y = w / r**2 * (pts @ y)
            worst = max(worst, float(np.max(ry**alpha * gradv_dot_y)))
        maxima.append(worst)
    ok = all(m < 0 for m in maxima) and (len(maxima) < 2 or maxima[-1] <= maxima[-2] + 1e-12)
    margin = -max(maxima) if ok else min(-max(maxima), -1e-300)
    if margin == 0.0:
        margin = -1e-300
    return AssumptionReport(
        "V2", margin > 0, margin,
        {"alpha": alpha, "delta": delta, "radii": radii, "sampled_maxima": maxima},
    )


def _grad_dot(spec: PotentialSpec, pts: np.ndarray, y: np.ndarray) -> np.ndarray:
    """grad V(x) . y by central differences; used for the non-radial kinds."""
    eps = 1e-6 * max(1.0, float(np.linalg.norm(y)))
    out = np.zeros(pts.shape[0])
    for d in range(3):
        step = np.zeros(3)
        step[d] = eps
        vp = spec.v_xyz(*(pts + step).T)
        vm = spec.v_xyz(*(pts - step).T)
        out += (vp - vm) / (2 * eps) * y[d]
    return out


def check_v3(spec: PotentialSpec, r_probe: np.ndarray | None = None) -> AssumptionReport:
    """Nonpositivity class: V <= 0, V not identically 0, V -> 0 at infinity."""
    if r_probe is None:
        r_probe = np.linspace(1e-3, 200.0, 4001)
    if spec.is_radial:
        v = spec.v_radial(np.asarray(r_probe))
    else:
        r = np.asarray(r_probe)
        v = np.concatenate([spec.v_xyz(r, 0 * r, 0 * r), spec.v_xyz(0 * r, 0 * r, r)])
    sup_v = float(np.max(v))
    amp = float(np.max(np.abs(v)))
    far = float(np.max(np.abs(v[-max(2, len(v) // 10):])))
    decays = far <= 1e-3 * amp if amp > 0 else False
    margin = min(-sup_v, amp)
    if not decays:
        margin = min(margin, -1.0)
    if margin == 0.0:
        margin = -1e-300
    return AssumptionReport(
        "V3", margin > 0, margin,
        {"sup_V": sup_v, "amplitude": amp, "far_field": far},
    )


def check_v4(norms: dict, p: float) -> AssumptionReport:
    """Integrability class for V <= 0: |V|_{3/2} < S/2 and the weighted
    combination of |V|_{3/2} and |W~|_3 under 3p-10."""
    if not (10.0 / 3.0 < p < 6.0):
        raise ValueError(f"p must lie in (10/3, 6), got {p}")
    s = aubin_talenti()
    v32, wt3 = norms["V_3/2"], norms["Wt_3"]
    if math.isinf(v32) or math.isinf(wt3):
        return AssumptionReport("V4", False, -math.inf, {"p": p, "V_3/2": v32, "Wt_3": wt3})
    m1 = s / 2.0 - v32
    lhs = (
        3.0 * (2.0 * (p - 2.0) ** 2 / (6.0 - p) + max(p - 4.0, 0.0)) / s * v32
        + 4.0 * (3.0 * (p - 2.0) ** 2 / (6.0 - p) + 1.0) / math.sqrt(s) * wt3
    )
    m2 = (3.0 * p - 10.0) - lhs
    margin = min(m1, m2)
    return AssumptionReport(
        "V4", margin > 0, margin,
        {"p": p, "V_3/2": v32, "Wt_3": wt3, "S": s, "lhs": lhs, "rhs": 3.0 * p - 10.0},
    )
