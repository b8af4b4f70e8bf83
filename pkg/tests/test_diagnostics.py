import math

import numpy as np
import pytest

from ersatzns.config import taylor_green
from ersatzns.diagnostics import (
    EnergyBalance,
    GronwallInputs,
    bochner_seminorm,
    data_seminorm,
    derivative_lp_norm,
    dual_h1_norm,
    energy_identity_residual,
    exp_energy,
    gagliardo_nirenberg_probe,
    gron_add_boundary,
    gron_add_holds,
    gron_add_im_boundary,
    gron_add_im_holds,
    gron_large_bound,
    gronwall_perov_bound,
    make_record,
)
from ersatzns.errors import ConfigError
from ersatzns.integrator import ForcingSpec, SimConfig, Trajectory, run
from ersatzns.nonlinearity import NonlinearitySpec
from ersatzns.spectral_core import TorusGrid, derivative_norm, from_function, random_field


def decaying_mode(g, mu, times):
    """u = (cos x, 0) e^{-mu t}: every norm has a closed form."""
    base = from_function(g, lambda x, y: np.stack([np.cos(x), 0 * y]))
    return [base * math.exp(-mu * t) for t in times]


class TestBochner:
    def test_closed_form(self, grid2):
        mu, T = 0.3, 1.0
        times = np.linspace(0, T, 401)
        fields = decaying_mode(grid2, mu, times)
        # ||u||^2 = 2 pi^2 e^{-2 mu t}; ||grad u|| equal (|k| = 1)
        e0 = 2 * math.pi**2
        exact0 = math.sqrt(e0 + mu * e0 * (1 - math.exp(-2 * mu * T)) / (2 * mu))
        assert bochner_seminorm(times, fields, 0, mu, T) == pytest.approx(exact0, rel=1e-5)
        assert bochner_seminorm(times, fields, 1, mu, T) == pytest.approx(exact0, rel=1e-5)

    def test_time_mismatch(self, grid2):
        with pytest.raises(ConfigError):
            bochner_seminorm([0.0, 0.5], decaying_mode(grid2, 1.0, [0.0, 0.5]), 0, 1.0, T=1.0)

    def test_dual_norm_of_mode(self):
        g = TorusGrid(2, 2 * math.pi, 16)
        f = from_function(g, lambda x, y: np.stack([np.cos(2 * x), 0 * y]))
        # ||f||^2 = 2 pi^2 and weight 1/4
        assert dual_h1_norm(f) == pytest.approx(math.sqrt(2 * math.pi**2 / 4), rel=1e-13)

    def test_data_seminorm_without_forcing(self, grid2):
        u0 = random_field(grid2, 2, seed=0)
        assert data_seminorm([0, 1], None, u0, 1, 0.1) == pytest.approx(derivative_norm(u0, 1))

    def test_data_seminorm_constant_forcing(self, grid2):
        u0 = from_function(grid2, lambda x, y: np.stack([0 * x, 0 * y]))
        f = from_function(grid2, lambda x, y: np.stack([np.cos(x), 0 * y]))
        val = data_seminorm([0.0, 2.0], [f, f], u0, 1, 0.5)
        assert val == pytest.approx(math.sqrt(4 / 0.5 * 2 * math.pi**2 * 2.0), rel=1e-13)


class TestEnergy:
    def test_identity_residual_small_for_smooth_run(self, grid2):
        spec = NonlinearitySpec.svplechac(0.5)
        traj = Trajectory()
        run(SimConfig(0.05, 0, 0.2, 0.001), spec, ForcingSpec.zero(), random_field(grid2, 2, seed=1), sink=traj.sink)
        r = energy_identity_residual(traj.times, traj.fields, None, spec, 0.05)
        scale = 0.05 * max(np.linalg.norm(u.coeffs) for u in traj.fields) ** 2
        assert np.max(np.abs(r)) < 1e-3 * scale

    def test_balance_tracks_defect(self, grid2):
        spec = NonlinearitySpec.advection()
        bal = EnergyBalance(spec, 0.1)
        run(SimConfig(0.1, 1, 0.1, 0.001), spec, ForcingSpec.zero(), random_field(grid2, 2, seed=1), sink=lambda s: bal.update(s.t, s.u))
        assert bal.relative_defect < 1e-6

    def test_exp_energy_of_zero(self, grid2):
        ee = exp_energy(from_function(grid2, lambda x, y: np.stack([0 * x, 0 * y])))
        assert ee.value == pytest.approx(math.e * grid2.volume, rel=1e-14)
        assert ee.log_value == pytest.approx(1.0 + math.log(grid2.volume), rel=1e-14)

    def test_exp_energy_log_and_linear_agree(self, grid2):
        ee = exp_energy(random_field(grid2, 2, seed=3, amplitude=3.0))
        assert abs(math.log(ee.value) - ee.log_value) < 1e-12

    def test_exp_energy_overflow(self, grid2):
        ee = exp_energy(taylor_green(grid2, 40.0))
        assert ee.overflow and math.isinf(ee.value) and math.isfinite(ee.log_value)

    def test_record(self, grid2):
        u = taylor_green(grid2)
        rec = make_record(0.0, u, NonlinearitySpec.advection(), [1.0, 2.0])
        assert rec.divergence_max < 1e-13 and abs(rec.trilinear_value) < 1e-13
        assert len(rec.h_s_norms) == 2 and not rec.exp_overflow


class TestPerov:
    @pytest.mark.parametrize(
        "inputs,exact",
        [
            (GronwallInputs(A=2.0, B=0.5, C=0.0, gamma0=1.0), lambda t: 2.0 * math.exp(0.5 * t)),
            (GronwallInputs(A=1.0, B=0.0, C=1.0, gamma0=2.0, h=0.9), lambda t: 1 / (1 - t)),
            (GronwallInputs(A=4.0, B=0.0, C=1.0, gamma0=0.5), lambda t: (2 + t / 2) ** 2),
        ],
    )
    def test_matches_odes(self, inputs, exact):
        for t in np.linspace(0, 0.8, 9):
            assert gronwall_perov_bound(inputs, t).value == pytest.approx(exact(t), rel=1e-12)

    def test_linear_with_time_dependent_B(self):
        g = GronwallInputs(A=1.0, B=lambda s: 2 * s, C=0.0, gamma0=1.0)
        assert gronwall_perov_bound(g, 0.7).value == pytest.approx(math.exp(0.49), rel=1e-12)

    def test_sampled_coefficients(self):
        ts = np.linspace(0, 1, 11)
        g = GronwallInputs(A=1.0, B=(ts, np.full_like(ts, 0.3)), C=0.0, gamma0=1.0)
        assert gronwall_perov_bound(g, 1.0).value == pytest.approx(math.exp(0.3), rel=1e-12)

    def test_superlinear_with_B(self):
        # F' = F + F^2, F(0) = 1:  F = e^t / (2 - e^t)
        g = GronwallInputs(A=1.0, B=1.0, C=1.0, gamma0=2.0, h=0.5)
        for t in (0.1, 0.3, 0.5):
            assert gronwall_perov_bound(g, t).value == pytest.approx(math.exp(t) / (2 - math.exp(t)), rel=1e-10)

    def test_infeasible(self):
        g = GronwallInputs(A=1.0, B=0.0, C=1.0, gamma0=2.0, h=1.0)
        assert not gron_add_holds(g)
        r = gronwall_perov_bound(g, 0.5)
        assert not r.feasible and math.isnan(r.value)

    def test_boundary_bisection(self):
        # A c h < e^{-b h} for gamma0 = 2
        b, c, h = 0.4, 1.5, 0.5
        exact = math.exp(-b * h) / (c * h)
        found = gron_add_boundary(lambda A: GronwallInputs(A=A, B=b, C=c, gamma0=2.0, h=h), 0.1, 5.0)
        assert abs(found - exact) < 1e-8

    def test_input_validation(self):
        with pytest.raises(ConfigError):
            GronwallInputs(A=1.0, B=0.0, C=1.0, gamma0=2.0)
        with pytest.raises(ConfigError):
            GronwallInputs(A=-1.0, B=0.0, C=1.0, gamma0=1.0)


class TestLargeDataBound:
    def test_initial_value(self):
        r = gron_large_bound(A=0.5, B=0.2, delta=0.05, mu=1.0, T=0.01, t=0.0)
        assert r.feasible
        assert r.value == pytest.approx(1.5 * math.exp(0.2 * 0.01), rel=1e-14)

    def test_delta_range(self):
        with pytest.raises(ConfigError):
            gron_large_bound(A=0.5, B=0.2, delta=0.4, mu=1.0, T=0.01, t=0.0, n=3)

    def test_monotone_in_time(self):
        vals = [gron_large_bound(0.5, 0.2, 0.05, 1.0, 0.01, t).value for t in np.linspace(0, 0.01, 5)]
        assert all(a < b for a, b in zip(vals, vals[1:]))

    def test_feasibility_boundary(self):
        A, B, mu, T = 0.5, 0.2, 1.0, 2.0
        d = gron_add_im_boundary(A, B, mu, T, 0.01, 0.3)
        assert gron_add_im_holds(A, B, d * (1 - 1e-6), mu, T) != gron_add_im_holds(A, B, d * (1 + 1e-6), mu, T)


class TestGagliardoNirenberg:
    def test_exponent_relation_checked(self, grid2):
        with pytest.raises(ConfigError):
            gagliardo_nirenberg_probe(random_field(grid2, 2, seed=0), 1, 2, 3.0, 2.0, 2.0, 2.0, 0.5)

    def test_interpolation_ratio_finite(self, grid2):
        # n = 2, j0 = 1, k0 = 2, a0 = 1/2, r0 = q0 = 2: 1/p0 = 1/2 + (1/2)(1/2 - 1) + 1/4 = 1/2
        u = random_field(grid2, 2, seed=1)
        rep = gagliardo_nirenberg_probe(u, 1, 2, 2.0, 2.0, 2.0, 2.0, 0.5)
        assert not rep.degenerate and 0 < rep.ratio < 10

    def test_derivative_lp_sup(self, grid2):
        u = from_function(grid2, lambda x, y: np.stack([np.sin(3 * x), 0 * y]))
        assert derivative_lp_norm(u, 1, math.inf) == pytest.approx(3.0, rel=1e-12)
