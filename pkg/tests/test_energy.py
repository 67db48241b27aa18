import numpy as np
import pytest

from spnorm.energy import (
    EnergyBreakdown,
    ProblemParams,
    directional_derivative,
    energy_breakdown,
    fiber_derivative_check,
    fiber_profile,
    fiber_stationary,
    first_variation,
    gn_quotient,
    hls_quotient,
    j_v,
    lagrange_multiplier,
    pohozaev,
    pohozaev_alt,
)
from spnorm.mesh import Field, dot, lp_norm, make_radial_grid, rescale
from spnorm.potentials import PotentialSpec

from conftest import gaussian_field, gaussian_lp, smooth_random_field

P4 = ProblemParams(p=4.0, a=1.0)
V0 = PotentialSpec.zero()


class TestParams:
    def test_rejects_p_endpoints(self):
        with pytest.raises(ValueError, match=r"open interval \(10/3, 6\)"):
            ProblemParams(p=6.0, a=1.0)
        with pytest.raises(ValueError):
            ProblemParams(p=10.0 / 3.0, a=1.0)

    def test_rejects_bad_s(self):
        with pytest.raises(ValueError):
            ProblemParams(p=4.0, a=1.0, s=0.2)


class TestBreakdown:
    def test_zero_potential_has_no_cd(self, grid_fine):
        b = energy_breakdown(gaussian_field(grid_fine), V0, P4)
        assert b.C == 0.0 and b.D == 0.0

    def test_gaussian_values(self, grid_fine):
        b = energy_breakdown(gaussian_field(grid_fine), V0, P4)
        assert b.A == pytest.approx(1.5, abs=1e-4)
        assert b.Bh == pytest.approx(np.sqrt(2 / np.pi), rel=1e-8)
        assert b.E == pytest.approx(np.pi**-3 * (np.pi / 2) ** 1.5, rel=1e-10)
        assert b.mass == pytest.approx(1.0, abs=1e-12)

    def test_mass_equals_a_squared_after_projection(self, grid_fine, rng):
        from spnorm.solver import enforce_nonneg

        u = smooth_random_field(grid_fine, rng)
        v = enforce_nonneg(u, 0.7)
        b = energy_breakdown(v, V0, ProblemParams(p=4.0, a=0.7))
        assert b.mass == pytest.approx(0.49, rel=1e-12)


class TestJv:
    def test_reduces_to_autonomous(self, grid_fine):
        u = gaussian_field(grid_fine)
        b = energy_breakdown(u, V0, P4)
        want = 0.5 * b.A + 0.25 * b.Bh - 0.25 * b.E
        assert j_v(u, V0, P4) == pytest.approx(want, rel=1e-14)

    def test_sign_flip_invariance(self, grid_fine):
        u = gaussian_field(grid_fine)
        Vw = PotentialSpec.gaussian_well(0.3, 2.0)
        flipped = u.with_values(-u.values)
        assert j_v(flipped, Vw, P4) == pytest.approx(j_v(u, Vw, P4), rel=1e-14)

    def test_zero_field(self, grid_mid):
        z = Field(grid_mid, np.zeros(grid_mid.npoints))
        assert j_v(z, V0, P4) == 0.0


class TestPohozaev:
    def test_equals_fiber_derivative(self, grid_fine, rng):
        # pins the -D/2 coefficient on the potential term
        for V in (V0, PotentialSpec.gaussian_well(0.4, 1.5),
                  PotentialSpec.power_decay(0.7, 0.5)):
            u = smooth_random_field(grid_fine, rng)
            poh, fd = fiber_derivative_check(u, V, P4)
            assert poh == pytest.approx(fd, rel=1e-8, abs=1e-10)

    def test_autonomous_matches_reference_form(self, grid_fine):
        u = gaussian_field(grid_fine)
        b = energy_breakdown(u, V0, P4)
        want = b.A + 0.25 * b.Bh - (3 * 2 / (2 * 4)) * b.E
        assert pohozaev(u, V0, P4) == pytest.approx(want, rel=1e-14)

    def test_alt_form_agrees_for_decaying_potential(self, grid_fine):
        # divergence theorem: int div(V u^2 x) = 0 for decaying V and u
        u = gaussian_field(grid_fine)
        V = PotentialSpec.gaussian_well(0.5, 1.0)
        b = energy_breakdown(u, V, P4)
        gap = abs(pohozaev(u, V, P4) - pohozaev_alt(u, V, P4))
        assert gap <= 1e-8 * (b.A + abs(b.C))

    def test_alt_equals_main_when_v_zero(self, grid_fine, rng):
        u = smooth_random_field(grid_fine, rng)
        assert pohozaev_alt(u, V0, P4) == pohozaev(u, V0, P4)


class TestFiberProfile:
    def test_t_one_is_jv(self, grid_fine):
        u = gaussian_field(grid_fine)
        assert fiber_profile(u, V0, P4, 1.0) == pytest.approx(j_v(u, V0, P4), rel=1e-14)

    def test_matches_rescale(self, grid_fine):
        u = gaussian_field(grid_fine)
        for t in (0.3, 1.0, 2.5):
            direct = j_v(rescale(u, t), V0, P4)
            assert fiber_profile(u, V0, P4, t) == pytest.approx(direct, rel=1e-10)

    def test_unbounded_below(self, grid_fine):
        u = gaussian_field(grid_fine)
        vals = [fiber_profile(u, V0, P4, t) for t in (20.0, 50.0, 100.0)]
        assert vals[0] > vals[1] > vals[2] and vals[2] < 0

    def test_rejects_nonpositive_t(self, grid_fine):
        with pytest.raises(ValueError):
            fiber_profile(gaussian_field(grid_fine), V0, P4, 0.0)

    def test_potential_term_resampled(self, grid_fine):
        u = gaussian_field(grid_fine)
        V = PotentialSpec.gaussian_well(0.3, 1.0)
        for t in (0.5, 2.0):
            direct = j_v(rescale(u, t), V, P4)
            assert fiber_profile(u, V, P4, t) == pytest.approx(direct, rel=1e-10)


class TestFiberStationary:
    def test_pohozaev_zero_gives_one(self, grid_fine):
        u = gaussian_field(grid_fine)
        # rescale so that the fiber max sits at t = 1, then recheck
        t0 = fiber_stationary(u, P4)
        u_star = rescale(u, t0)
        assert fiber_stationary(u_star, P4) == pytest.approx(1.0, rel=1e-10)
        assert abs(pohozaev(u_star, V0, P4)) < 1e-9 * max(1.0, lp_norm(u_star, 2))

    def test_closed_form_without_hartree(self):
        # t A - (3/4) t^2 E = 0 at t = 4A/(3E) for p = 4, s = 1
        b = EnergyBreakdown(A=2.0, Bh=0.0, C=0.0, D=0.0, E=5.0, mass=1.0)
        assert fiber_stationary(b, P4) == pytest.approx(8.0 / 15.0, rel=1e-12)

    def test_reparametrization(self, grid_fine):
        u = gaussian_field(grid_fine)
        t0 = fiber_stationary(u, P4)
        for tau in (0.5, 2.0):
            assert fiber_stationary(rescale(u, tau), P4) == pytest.approx(
                t0 / tau, rel=1e-10)

    def test_no_nonlinear_term_errors(self):
        b = EnergyBreakdown(A=1.0, Bh=0.5, C=0.0, D=0.0, E=0.0, mass=1.0)
        with pytest.raises(ValueError):
            fiber_stationary(b, P4)


class TestLagrangeMultiplier:
    def test_arithmetic(self):
        b = EnergyBreakdown(A=1.0, Bh=0.5, C=0.2, D=0.0, E=3.0, mass=1.0)
        assert lagrange_multiplier(b, V0, P4) == pytest.approx(1.3, rel=1e-14)

    def test_matches_directional_definition(self, grid_fine, rng):
        # lambda = -<grad j_v(u), u> / mass for any field
        u = smooth_random_field(grid_fine, rng)
        b = energy_breakdown(u, V0, P4)
        lam = lagrange_multiplier(b, V0, P4)
        want = -directional_derivative(u, V0, P4, u) / b.mass
        assert lam == pytest.approx(want, rel=1e-10)


class TestQuotients:
    def test_gn_scale_invariance(self, grid_fine):
        u = gaussian_field(grid_fine)
        q0 = gn_quotient(u, 4.0)
        for t in (0.5, 3.0):
            assert gn_quotient(rescale(u, t), 4.0) == pytest.approx(q0, rel=1e-8)

    def test_gn_amplitude_invariance(self, grid_fine):
        u = gaussian_field(grid_fine)
        scaled = u.with_values(3.7 * u.values)
        assert gn_quotient(scaled, 4.0) == pytest.approx(gn_quotient(u, 4.0), rel=1e-12)

    def test_hls_gaussian_value(self, grid_fine):
        u = gaussian_field(grid_fine)
        want = np.sqrt(2 / np.pi) / gaussian_lp(1.0, 1.0, 2.4) ** (4 / 2.4)
        assert hls_quotient(u) == pytest.approx(want, rel=1e-8)

    def test_rejects_zero_field(self, grid_mid):
        z = Field(grid_mid, np.zeros(grid_mid.npoints))
        with pytest.raises(ValueError):
            gn_quotient(z, 4.0)


class TestGradientCheck:
    @pytest.mark.parametrize("V", [
        V0,
        PotentialSpec.gaussian_well(0.4, 1.5),
        PotentialSpec.power_decay(0.6, 0.5),
    ], ids=["zero", "gaussian_well", "power_decay"])
    def test_first_variation_matches_fd(self, V, rng):
        # assembled residual vs central differences in 10 random directions
        g = make_radial_grid(20.0, 512)
        u = smooth_random_field(g, rng, decay=2.0)
        base = j_v(u, V, P4)
        scale = max(abs(base), 1.0)
        for _ in range(10):
            d = smooth_random_field(g, rng, decay=rng.uniform(1.0, 3.0))
            d = d.with_values(d.values * rng.uniform(-1, 1))
            eps = 1e-5
            up = u.with_values(u.values + eps * d.values)
            dn = u.with_values(u.values - eps * d.values)
            fd = (j_v(up, V, P4) - j_v(dn, V, P4)) / (2 * eps)
            got = directional_derivative(u, V, P4, d)
            assert got == pytest.approx(fd, rel=1e-6, abs=1e-9 * scale)

    def test_first_variation_zero_at_plain_laplacian_eigenmode(self):
        # residual assembly sanity: for u = 0 the variation vanishes
        g = make_radial_grid(10.0, 64)
        z = Field(g, np.zeros(g.npoints))
        assert np.all(first_variation(z, V0, P4).values == 0)
