import math

import numpy as np
import pytest

from spnorm.mesh import make_box_grid, make_radial_grid
from spnorm.potentials import (
    AssumptionReport,
    PotentialSpec,
    a_star,
    aubin_talenti,
    check_v1,
    check_v1prime,
    check_v2_sampled,
    check_v3,
    check_v4,
    embedding_constant_cq,
    eta_tilde,
    lambda_pq,
    materialize,
    potential_norms,
    theta_v1prime,
)

from conftest import smooth_random_field


class TestSpecs:
    def test_validation(self):
        with pytest.raises(ValueError):
            PotentialSpec.power_decay(-1.0, 0.5)
        with pytest.raises(ValueError):
            PotentialSpec.power_decay(1.0, 1.5)
        with pytest.raises(ValueError):
            PotentialSpec.piecewise_power(1.0, 0.2, 1.0, 6.0)  # alpha < 3/q
        with pytest.raises(ValueError):
            PotentialSpec("nonsense")

    def test_piecewise_continuous_at_one(self):
        V = PotentialSpec.piecewise_power(1.3, 0.7, 1.5, 6.0)
        inner = V.v_radial(np.array([1.0 - 1e-13]))[0]
        outer = V.v_radial(np.array([1.0 + 1e-13]))[0]
        assert inner == pytest.approx(outer, abs=1e-12)
        assert inner == pytest.approx(2.0**-0.7 * 1.3, rel=1e-10)

    def test_scaled(self):
        V = PotentialSpec.gaussian_well(0.4, 1.0)
        half = V.scaled(0.5)
        assert half.c == pytest.approx(0.2)
        assert V.scaled(0.0).is_zero


class TestMaterialize:
    def test_power_decay_w_value(self):
        # W(1) = -alpha * 1 * 2^(-alpha-1) = -2^(-3/2)/2 for c=1, alpha=1/2
        g = make_radial_grid(4.0, 64)
        V = PotentialSpec.power_decay(1.0, 0.5)
        w = V.w_radial(np.array([1.0]))[0]
        assert w == pytest.approx(-0.5 * 2.0**-1.5, rel=1e-12)
        assert w == pytest.approx(-0.176777, abs=1e-6)

    def test_zero_gives_zero_fields(self):
        g = make_radial_grid(4.0, 64)
        vf, wf, wtf = materialize(PotentialSpec.zero(), g)
        assert not vf.values.any() and not wf.values.any() and not wtf.values.any()

    def test_gaussian_well_w_nonnegative(self):
        g = make_radial_grid(10.0, 256)
        V = PotentialSpec.gaussian_well(0.7, 1.3)
        vf, wf, _ = materialize(V, g)
        assert np.all(vf.values <= 0)
        assert np.all(wf.values >= 0)
        r = g.nodes
        want = 2 * 0.7 * (r / 1.3) ** 2 * np.exp(-(r / 1.3) ** 2)
        assert np.allclose(wf.values, want, rtol=1e-12)

    def test_w_matches_finite_differences(self, rng):
        # analytic grad V . x vs central differences at random points
        specs = [
            PotentialSpec.power_decay(0.8, 0.4),
            PotentialSpec.piecewise_power(1.1, 0.6, 1.2, 6.0),
            PotentialSpec.gaussian_well(0.5, 2.0),
            PotentialSpec.angular_modulated(PotentialSpec.gaussian_well(0.5, 2.0), 0.3),
        ]
        pts = rng.uniform(0.3, 12.0, size=(100, 3)) * rng.choice(
            [-1, 1], size=(100, 3))
        pts = pts[np.abs(np.linalg.norm(pts, axis=1) - 1.0) > 0.05]  # avoid the kink
        eps = 1e-6
        for V in specs:
            x, y, z = pts.T
            got = V.w_xyz(x, y, z)
            fd = np.zeros_like(got)
            for d in range(3):
                step = np.zeros(3)
                step[d] = eps
                vp = V.v_xyz(*(pts + step).T)
                vm = V.v_xyz(*(pts - step).T)
                fd += (vp - vm) / (2 * eps) * pts[:, d]
            assert np.allclose(got, fd, rtol=1e-6, atol=1e-8)

    def test_custom_table_without_gradient_rejects_w(self):
        g = make_radial_grid(4.0, 64)
        V = PotentialSpec.custom_table(g.nodes, np.exp(-g.nodes))
        with pytest.raises(ValueError, match="gradient"):
            materialize(V, g)

    def test_angular_on_radial_grid_rejected(self):
        g = make_radial_grid(4.0, 64)
        V = PotentialSpec.angular_modulated(PotentialSpec.gaussian_well(0.5, 1.0), 0.2)
        with pytest.raises(ValueError):
            materialize(V, g)

    def test_angular_on_box(self):
        g = make_box_grid(4.0, 16)
        V = PotentialSpec.angular_modulated(PotentialSpec.gaussian_well(0.5, 1.0), 0.2)
        vf, wf, _ = materialize(V, g)
        assert np.all(np.isfinite(vf.values)) and np.all(np.isfinite(wf.values))


class TestNorms:
    def test_zero(self):
        g = make_radial_grid(10.0, 128)
        norms = potential_norms(PotentialSpec.zero(), g)
        assert all(norms[k] == 0 for k in ("V_inf", "V_q", "V_3/2", "W_inf", "W_q", "Wt_3"))

    def test_gaussian_well_closed_forms(self):
        g = make_radial_grid(30.0, 2048)
        c, sig = 0.8, 1.0
        norms = potential_norms(PotentialSpec.gaussian_well(c, sig), g, q=6.0)
        assert norms["V_inf"] == pytest.approx(c, rel=1e-6)
        # |V|_q = c (pi sigma^2 / q)^(3/(2q))
        want_q = c * (math.pi * sig**2 / 6.0) ** (3.0 / 12.0)
        assert norms["V_q"] == pytest.approx(want_q, rel=1e-6)
        want_32 = c * (2.0 * math.pi * sig**2 / 3.0)
        assert norms["V_3/2"] == pytest.approx(want_32, rel=1e-6)
        want_wt3 = c * sig**2 * (4.0 * math.pi / 27.0) ** (1.0 / 3.0)
        assert norms["Wt_3"] == pytest.approx(want_wt3, rel=1e-6)

    def test_power_decay_divergent_reported_inf(self):
        g = make_radial_grid(30.0, 512)
        norms = potential_norms(PotentialSpec.power_decay(1.0, 0.5), g)
        assert norms["V_inf"] == pytest.approx(1.0, rel=1e-9)
        assert math.isinf(norms["V_3/2"])
        assert math.isinf(norms["Wt_3"])

    def test_power_decay_tail_correction(self):
        # alpha*q > 3 converges; compare two domain sizes for consistency
        V = PotentialSpec.power_decay(1.0, 0.9)
        n1 = potential_norms(V, make_radial_grid(20.0, 1024), q=8.0)
        n2 = potential_norms(V, make_radial_grid(80.0, 4096), q=8.0)
        assert n1["V_q"] == pytest.approx(n2["V_q"], rel=1e-3)

    def test_piecewise_wt3_convergence_condition(self):
        g = make_radial_grid(30.0, 512)
        div = potential_norms(PotentialSpec.piecewise_power(0.5, 0.8, 1.5, 6.0), g)
        conv = potential_norms(PotentialSpec.piecewise_power(0.5, 0.8, 2.5, 8.0), g)
        assert math.isinf(div["Wt_3"])  # beta <= 2
        assert math.isfinite(conv["Wt_3"])  # beta > 2


class TestAubinTalenti:
    def test_value(self):
        assert aubin_talenti() == pytest.approx(5.4785, abs=1e-3)
        assert aubin_talenti() > 0

    def test_sobolev_embedding_bound(self, rng):
        # S^(-1/2) |grad u|_2 >= |u|_6 on random smooth fields
        from spnorm.mesh import grad_sq, lp_norm

        g = make_radial_grid(20.0, 512)
        s = aubin_talenti()
        for _ in range(50):
            u = smooth_random_field(g, rng, decay=rng.uniform(0.5, 4.0))
            assert math.sqrt(grad_sq(u) / s) >= lp_norm(u, 6.0) * (1 - 1e-9)


class TestCheckers:
    def test_v1_zero_potential(self):
        g = make_radial_grid(10.0, 128)
        norms = potential_norms(PotentialSpec.zero(), g)
        rep = check_v1(norms, a=0.5, c_a=2.0, theta=0.3, eta=0.2, p=4.0)
        assert rep.verdict
        want = min(2 * 0.3 * 2.0 / 0.25, 0.2 * 2.0 / 0.25, (6 - 4) / (4 - 2) - 0.2 - 0.6)
        assert rep.margin == pytest.approx(want, rel=1e-12)

    def test_v1_boundary_strict(self):
        g = make_radial_grid(10.0, 128)
        norms = potential_norms(PotentialSpec.zero(), g)
        # eta + 2 theta = (6-p)/(p-2) exactly: strict inequality fails
        rep = check_v1(norms, a=0.5, c_a=2.0, theta=0.3, eta=0.4, p=4.0)
        assert not rep.verdict and rep.margin <= 0

    def test_v1_threshold_sweep(self):
        g = make_radial_grid(60.0, 2048)
        a, c_a, theta, eta, p = 0.5, 2.0, 0.3, 0.2, 4.0
        cap = 2 * theta * c_a / a**2
        below = potential_norms(PotentialSpec.power_decay(0.9 * cap, 0.5), g)
        above = potential_norms(PotentialSpec.power_decay(1.1 * cap, 0.5), g)
        assert check_v1(below, a, c_a, theta, eta, p).verdict
        assert not check_v1(above, a, c_a, theta, eta, p).verdict

    def test_v4_zero_potential(self):
        g = make_radial_grid(10.0, 128)
        norms = potential_norms(PotentialSpec.zero(), g)
        rep = check_v4(norms, 4.0)
        assert rep.verdict and rep.margin == pytest.approx(2.0)  # 3p-10 at p=4

    def test_v4_fails_near_critical_p(self):
        g = make_radial_grid(30.0, 1024)
        norms = potential_norms(PotentialSpec.gaussian_well(0.1, 1.0), g)
        assert check_v4(norms, 4.0).verdict
        assert not check_v4(norms, 10.0 / 3.0 + 1e-6).verdict

    def test_v4_margin_sign_change_under_c_sweep(self):
        g = make_radial_grid(30.0, 1024)
        margins = []
        for c in (0.02, 0.05, 0.1, 0.2, 0.4, 0.8):
            n = potential_norms(PotentialSpec.gaussian_well(c, 1.0), g)
            margins.append(check_v4(n, 4.0).margin)
        assert margins[0] > 0 and margins[-1] < 0
        assert all(m2 < m1 for m1, m2 in zip(margins, margins[1:]))

    def test_v3(self):
        assert check_v3(PotentialSpec.gaussian_well(0.3, 1.0)).verdict
        assert not check_v3(PotentialSpec.zero()).verdict
        assert not check_v3(PotentialSpec.power_decay(1.0, 0.5)).verdict

    def test_v2_power_decay_consistent(self):
        rep = check_v2_sampled(PotentialSpec.power_decay(1.0, 0.5),
                               radii=(4.0, 8.0, 16.0, 32.0), alpha=0.5, delta=0.25)
        assert rep.verdict
        assert all(m < 0 for m in rep.inputs["sampled_maxima"])

    def test_v2_flat_table_fails(self):
        r = np.linspace(0.1, 50, 64)
        V = PotentialSpec.custom_table(r, np.ones_like(r), w=np.zeros_like(r))
        rep = check_v2_sampled(V, radii=(4.0, 8.0), alpha=0.5, delta=0.2)
        assert not rep.verdict

    def test_v2_needs_gradient(self):
        r = np.linspace(0.1, 50, 64)
        V = PotentialSpec.custom_table(r, np.ones_like(r))
        with pytest.raises(ValueError):
            check_v2_sampled(V, radii=(4.0,), alpha=0.5, delta=0.2)

    def test_v1prime_zero_is_admissible(self):
        g = make_radial_grid(30.0, 1024)
        norms = potential_norms(PotentialSpec.zero(), g, q=6.0)
        rep = check_v1prime(norms, 4.0, 6.0, embedding_constant_cq(6.0))
        assert rep.verdict

    def test_report_margin_consistency(self):
        with pytest.raises(ValueError):
            AssumptionReport("X", True, -1.0, {})


class TestConstants:
    def test_eta_tilde_zero_potential(self):
        g = make_radial_grid(10.0, 128)
        norms = potential_norms(PotentialSpec.zero(), g)
        assert eta_tilde(4.0, norms) == pytest.approx(6.0, rel=1e-12)
        assert eta_tilde(11.0 / 3.0, norms) == pytest.approx(10.0, rel=1e-12)

    def test_eta_tilde_requires_admissibility(self):
        g = make_radial_grid(30.0, 1024)
        norms = potential_norms(PotentialSpec.gaussian_well(5.0, 1.5), g)
        with pytest.raises(ValueError):
            eta_tilde(4.0, norms)

    def test_eta_tilde_finite_for_admissible_well(self):
        g = make_radial_grid(30.0, 1024)
        norms = potential_norms(PotentialSpec.gaussian_well(0.05, 1.0), g)
        val = eta_tilde(4.0, norms)
        assert val > 6.0 and math.isfinite(val)

    def test_theta_at_zero(self):
        assert theta_v1prime(0.0, 4.0, 6.0, 1.0) == 0.0

    def test_theta_monotone(self):
        ts = np.linspace(0.0, 5.0, 40)
        vals = [theta_v1prime(t, 4.0, 6.0, 0.7) for t in ts]
        assert all(v2 > v1 for v1, v2 in zip(vals, vals[1:]))

    def test_theta_double_entry(self):
        # independent re-evaluation of the formula at p=4, q=6, C_q=1, t=1
        p, q, cq, t = 4.0, 6.0, 1.0, 1.0
        f1 = (1 + p * cq**2 / (q * (p - 2)) * max(1.0, (3 * p - 8) / p) * t) ** (
            3 * (p - 2) / (3 * p - 10))
        f2 = 1 + t * (1 - 3 / (2 * q)) * 3 * cq**2 * (p - 2) / (3 * p - 10)
        want = f1 * f2 - 1
        assert theta_v1prime(t, p, q, cq) == pytest.approx(want, rel=1e-14)
        assert want == pytest.approx((4 / 3) ** 3 * (13 / 4) - 1, rel=1e-14)

    def test_a_star_value_and_homogeneity(self):
        assert a_star(4.0, 1.0, 1.0, 6.0) == pytest.approx(6.0 ** (-1 / 6), rel=1e-12)
        assert a_star(4.0, 1.0, 1.0, 6.0) == pytest.approx(0.7418, abs=1e-4)
        base = a_star(4.5, 2.0, 1.3, 7.0)
        assert a_star(4.5, 4.0, 1.3, 7.0) == pytest.approx(base / 2 ** (1 / 3), rel=1e-12)

    def test_a_star_vanishes_with_delta(self):
        vals = [a_star(4.0, 1.0, d, 6.0) for d in (1.0, 1e-2, 1e-4, 1e-8)]
        assert all(v2 < v1 for v1, v2 in zip(vals, vals[1:]))
        assert vals[-1] < 0.05

    def test_lambda_pq(self):
        assert lambda_pq(4.0, 1.0) == pytest.approx(1.0)
        assert lambda_pq(5.0, 2.0) == pytest.approx(min(5.0 / 7.0, 1.0) / 4.0)

    def test_embedding_constant_sane(self):
        cq = embedding_constant_cq(6.0)
        assert 0.1 < cq < 2.0
