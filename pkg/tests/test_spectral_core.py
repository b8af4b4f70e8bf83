import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ersatzns.errors import ConfigError, InconsistentInput, UnsupportedOperation
from ersatzns.spectral_core import (
    FourierField,
    PhysicalField,
    TorusGrid,
    dealias,
    derivative_norm,
    divergence,
    forward_transform,
    from_function,
    gradient,
    hermitian_defect,
    inner_product,
    inverse_transform,
    l2_norm,
    laplacian,
    leray_project,
    max_abs,
    mean_part,
    partial,
    phi_inverse_laplacian,
    pressure_from_gradient,
    random_field,
    rot,
    sobolev_norm,
    zeros,
)


class TestGrid:
    @pytest.mark.parametrize("n,ell,N", [(1, 1.0, 16), (2, 0.0, 16), (2, 1.0, 7), (2, 1.0, 6), (5, 1.0, 16)])
    def test_rejects_bad_parameters(self, n, ell, N):
        with pytest.raises(ConfigError):
            TorusGrid(n, ell, N)

    def test_wavenumbers_in_fft_order(self):
        g = TorusGrid(2, 1.0, 8)
        assert list(g.k[0][:, 0]) == [0, 1, 2, 3, -4, -3, -2, -1]
        assert g.k.shape == (2, 8, 8)

    def test_nyquist_plane_marked(self):
        g = TorusGrid(2, 1.0, 8)
        assert not g.nyquist_free[4, 0] and not g.nyquist_free[0, 4]
        assert g.nyquist_free[3, -3]

    @pytest.mark.parametrize("N,kept", [(16, 5), (18, 5), (32, 10), (24, 7)])
    def test_dealias_keeps_two_thirds(self, N, kept):
        g = TorusGrid(2, 1.0, N)
        k1 = g.k[0][:, 0][g.dealias_mask[:, 0]]
        assert k1.max() == kept and k1.min() == -kept


class TestTransforms:
    def test_roundtrip(self, grid2):
        rng = np.random.default_rng(0)
        vals = rng.standard_normal((2,) + grid2.shape)
        back = inverse_transform(forward_transform(PhysicalField(grid2, vals)))
        assert np.max(np.abs(back.values - vals)) < 1e-13

    def test_constant_is_mean_mode(self, grid2):
        f = from_function(grid2, lambda x, y: 3.0 + 0 * x)
        assert abs(f.coeffs[0, 0, 0] - 3.0) < 1e-14
        assert np.sum(np.abs(f.coeffs)) - 3.0 < 1e-12

    def test_rejects_nonfinite(self, grid2):
        vals = np.zeros((1,) + grid2.shape)
        vals[0, 0, 0] = np.nan
        with pytest.raises(ConfigError):
            PhysicalField(grid2, vals)

    def test_shape_mismatch(self, grid2, grid3):
        with pytest.raises(ConfigError):
            zeros(grid2, 2) + zeros(grid3, 2)

    def test_coefficients_are_readonly(self, grid2):
        f = zeros(grid2, 1)
        with pytest.raises(ValueError):
            f.coeffs[0, 0, 0] = 1.0


class TestOperators:
    def test_gradient_of_single_mode(self):
        g = TorusGrid(2, 3.0, 16)
        kf = 2 * math.pi / 3.0
        s = from_function(g, lambda x, y: np.sin(kf * (2 * x + y)))
        expected = from_function(g, lambda x, y: np.stack([2 * kf * np.cos(kf * (2 * x + y)), kf * np.cos(kf * (2 * x + y))]))
        assert l2_norm(gradient(s) - expected) < 1e-12

    def test_laplacian_eigenvalue(self):
        g = TorusGrid(3, 2.0, 16)
        kf = math.pi
        s = from_function(g, lambda x, y, z: np.cos(kf * (x - 2 * y + 3 * z)))
        assert l2_norm(laplacian(s) + s * (kf**2 * 14)) < 1e-10

    def test_partial_matches_gradient(self, grid3):
        s = random_field(grid3, 1, seed=2)
        grad = gradient(s)
        for j in range(3):
            assert l2_norm(partial(s, j) - grad.component(j)) == 0.0

    def test_divergence_of_linear_combination(self, grid2):
        s = random_field(grid2, 1, seed=3)
        assert l2_norm(divergence(gradient(s)) - laplacian(s)) < 1e-12 * l2_norm(laplacian(s))

    def test_rot_in_four_dimensions_unsupported(self):
        g = TorusGrid(4, 1.0, 8)
        with pytest.raises(UnsupportedOperation):
            rot(zeros(g, 4))

    def test_rot_two_dimensional_rigid_rotation(self):
        g = TorusGrid(2, 2 * math.pi, 16)
        u = from_function(g, lambda x, y: np.stack([-np.sin(y), np.sin(x)]))
        w = from_function(g, lambda x, y: np.cos(x) + np.cos(y))
        assert l2_norm(rot(u) - w) < 1e-12

    @pytest.mark.parametrize("n", [2, 3])
    def test_nyquist_is_zeroed(self, n):
        g = TorusGrid(n, 1.0, 8)
        c = np.zeros((1,) + g.shape, dtype=complex)
        c[(0, 4) + (0,) * (n - 1)] = 1.0
        f = FourierField(g, c)
        assert l2_norm(gradient(f)) == 0.0 and l2_norm(laplacian(f)) == 0.0


class TestProjection:
    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_idempotent_and_divergence_free(self, n):
        g = TorusGrid(n, 1.5, 8)
        u = random_field(g, n, seed=n)
        pu = leray_project(u)
        assert l2_norm(leray_project(pu) - pu) < 1e-14 * l2_norm(pu)
        assert l2_norm(divergence(pu)) < 1e-12 * l2_norm(u) * g.kfactor * g.N

    def test_kills_gradients_keeps_mean(self, grid2):
        grad = gradient(random_field(grid2, 1, seed=4))
        const = from_function(grid2, lambda x, y: np.stack([1.0 + 0 * x, -2.0 + 0 * y]))
        assert l2_norm(leray_project(grad)) < 1e-14 * l2_norm(grad)
        assert l2_norm(leray_project(grad + const) - const) < 1e-13

    def test_orthogonal_decomposition(self, grid3):
        u = random_field(grid3, 3, seed=5)
        pu = leray_project(u)
        assert abs(inner_product(pu, u - pu)) < 1e-12 * l2_norm(u) ** 2

    def test_hodge_formula(self, grid3):
        """-rot rot phi w + grad div phi w = w - Pi w."""
        w = random_field(grid3, 3, seed=6)
        pw = phi_inverse_laplacian(w)
        lhs = gradient(divergence(pw)) - rot(rot(pw))
        assert l2_norm(lhs - (w - mean_part(w))) < 1e-12 * l2_norm(w)

    def test_phi_inverts_laplacian(self, grid2):
        s = random_field(grid2, 1, seed=7)
        assert l2_norm(laplacian(phi_inverse_laplacian(s)) - (s - mean_part(s))) < 1e-13 * l2_norm(s)

    def test_pressure_recovery(self, grid2):
        p = random_field(grid2, 1, seed=8)
        p = p - mean_part(p)
        assert l2_norm(pressure_from_gradient(gradient(p)) - p) < 1e-13 * l2_norm(p)

    def test_pressure_rejects_solenoidal_input(self, grid2):
        u = leray_project(random_field(grid2, 2, seed=9))
        with pytest.raises(InconsistentInput):
            pressure_from_gradient(u)


class TestNorms:
    def test_parseval(self, grid2):
        u = random_field(grid2, 2, seed=1)
        vals = inverse_transform(u).values
        cell = grid2.volume / grid2.N**2
        assert abs(l2_norm(u) ** 2 - cell * np.sum(vals**2)) < 1e-12 * l2_norm(u) ** 2

    def test_sobolev_weight_is_integer_wavenumber_power(self):
        g = TorusGrid(2, 5.0, 16)
        f = from_function(g, lambda x, y: 2.0 + np.cos(2 * math.pi / 5.0 * (3 * x + 4 * y)))
        # |c_0|^2 + 2 * 25^s * (1/2)^2
        for s in (0.0, 0.5, 1.0, 2.0):
            assert sobolev_norm(f, s) == pytest.approx(math.sqrt(4.0 + 0.5 * 25.0**s), rel=1e-13)

    def test_derivative_norm_matches_gradient(self, grid2):
        s = random_field(grid2, 1, seed=11)
        assert derivative_norm(s, 1) == pytest.approx(l2_norm(gradient(s)), rel=1e-13)
        assert derivative_norm(s, 2) == pytest.approx(l2_norm(laplacian(s)), rel=1e-13)

    def test_max_abs(self, grid2):
        u = from_function(grid2, lambda x, y: np.stack([3 * np.cos(x), 4 * np.cos(x)]))
        assert max_abs(u) == pytest.approx(5.0, rel=1e-14)


class TestRandomField:
    def test_seed_determines_field(self, grid2):
        a, b = random_field(grid2, 2, seed=42), random_field(grid2, 2, seed=42)
        assert np.array_equal(a.coeffs, b.coeffs)
        assert not np.array_equal(a.coeffs, random_field(grid2, 2, seed=43).coeffs)

    def test_real_and_band_limited(self, grid2):
        u = random_field(grid2, 2, seed=0, kmax=3)
        assert hermitian_defect(u) < 1e-15
        assert np.all(np.abs(u.coeffs[:, np.any(np.abs(grid2.k) > 3, axis=0)]) == 0)

    def test_dealias_idempotent(self, grid2):
        u = random_field(grid2, 2, seed=1, kmax=8)
        assert np.array_equal(dealias(dealias(u)).coeffs, dealias(u).coeffs)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.sampled_from([2, 3]), ell=st.floats(0.5, 10.0))
def test_identities_on_random_fields(seed, n, ell):
    g = TorusGrid(n, ell, 8)
    u = random_field(g, n, seed=seed)
    s = random_field(g, 1, seed=seed + 1)
    scale = g.kfactor * g.N
    assert l2_norm(rot(gradient(s))) <= 1e-12 * l2_norm(s) * scale**2
    if n == 3:
        assert l2_norm(divergence(rot(u))) <= 1e-12 * l2_norm(u) * scale**2
        lhs = gradient(divergence(u)) - rot(rot(u))
        assert l2_norm(lhs - laplacian(u)) <= 1e-12 * l2_norm(laplacian(u))
