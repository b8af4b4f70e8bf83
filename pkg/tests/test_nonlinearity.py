import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ersatzns.errors import ConfigError
from ersatzns.nonlinearity import (
    BilinearTensor,
    NonlinearitySpec,
    apply_tensor,
    eval_B,
    eval_D,
    polarization_residual,
    trilinear_pairing,
)
from ersatzns.spectral_core import (
    TorusGrid,
    derivative_norm,
    from_function,
    gradient,
    l2_norm,
    leray_project,
    random_field,
)


def rel_trilinear(spec, u):
    return abs(trilinear_pairing(spec, u)) / (l2_norm(u) ** 2 * derivative_norm(u, 1))


class TestSpec:
    @pytest.mark.parametrize("b", [0.0, 1.0, -0.5, None])
    def test_svplechac_requires_open_interval(self, b):
        with pytest.raises(ConfigError):
            NonlinearitySpec.svplechac(b)

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            NonlinearitySpec("burgers")

    def test_tensor_shape_checked(self):
        with pytest.raises(ConfigError):
            BilinearTensor(2, np.zeros((2, 2, 2)))

    @pytest.mark.parametrize("spec", [NonlinearitySpec.advection(), NonlinearitySpec.svplechac(0.25), NonlinearitySpec.zero()])
    def test_dict_roundtrip(self, spec):
        back = NonlinearitySpec.from_dict(spec.to_dict(), 3)
        assert back.kind == spec.kind and back.b == spec.b

    def test_custom_dict_roundtrip(self):
        t = BilinearTensor(2, np.arange(16.0).reshape(2, 2, 4))
        back = NonlinearitySpec.from_dict(NonlinearitySpec.custom(t).to_dict(), 2)
        assert np.array_equal(back.tensor.coeffs, t.coeffs)


class TestEvaluation:
    def test_advection_of_shear(self, grid2):
        # u = (sin y, 0): (u . grad) u = 0
        u = from_function(grid2, lambda x, y: np.stack([np.sin(y), 0 * x]))
        assert l2_norm(eval_D(NonlinearitySpec.advection(), u)) < 1e-13

    def test_advection_closed_form(self, grid2):
        # u = (sin x, sin y): (u . grad) u = (sin x cos x, sin y cos y)
        u = from_function(grid2, lambda x, y: np.stack([np.sin(x), np.sin(y)]))
        exp = from_function(grid2, lambda x, y: np.stack([np.sin(x) * np.cos(x), np.sin(y) * np.cos(y)]))
        assert l2_norm(eval_D(NonlinearitySpec.advection(), u) - exp) < 1e-13

    @pytest.mark.parametrize("b", [0.1, 0.5, 0.9])
    def test_closed_form_matches_tensor(self, grid3, b):
        spec = NonlinearitySpec.svplechac(b)
        u = random_field(grid3, 3, seed=1, kmax=4)
        via_tensor = apply_tensor(spec.tensor_for(3), u, u)
        assert l2_norm(eval_D(spec, u) - via_tensor) < 1e-12 * l2_norm(via_tensor)

    def test_advection_tensor_matches_closed_form(self, grid2):
        u = random_field(grid2, 2, seed=2, kmax=4)
        custom = NonlinearitySpec.custom(BilinearTensor.advection(2))
        ref = eval_D(NonlinearitySpec.advection(), u)
        assert l2_norm(eval_D(custom, u) - ref) < 1e-13 * l2_norm(ref)

    def test_zero_kind(self, grid2):
        u = random_field(grid2, 2, seed=0)
        assert l2_norm(eval_D(NonlinearitySpec.zero(), u)) == 0.0

    def test_component_count_checked(self, grid2):
        with pytest.raises(ConfigError):
            eval_D(NonlinearitySpec.advection(), random_field(grid2, 1, seed=0))

    def test_output_is_dealiased(self, grid2):
        u = random_field(grid2, 2, seed=3, kmax=7)
        d = eval_D(NonlinearitySpec.advection(), u)
        assert np.all(d.coeffs[:, ~grid2.dealias_mask] == 0)

    def test_no_aliasing_for_kept_modes(self):
        # exact product of two kept modes survives dealiasing unchanged
        g = TorusGrid(2, 2 * math.pi, 12)
        u = from_function(g, lambda x, y: np.stack([np.sin(2 * x), np.cos(3 * y)]))
        exp = from_function(g, lambda x, y: np.stack([2 * np.sin(2 * x) * np.cos(2 * x), -3 * np.cos(3 * y) * np.sin(3 * y)]))
        exp = exp.coeffs * g.dealias_mask
        got = eval_D(NonlinearitySpec.advection(), u).coeffs
        assert np.max(np.abs(got - exp)) < 1e-14


class TestSymmetricForm:
    @pytest.mark.parametrize("spec", [NonlinearitySpec.advection(), NonlinearitySpec.svplechac(0.3)])
    def test_symmetric(self, grid3, spec):
        w, u = random_field(grid3, 3, seed=1), random_field(grid3, 3, seed=2)
        assert l2_norm(eval_B(spec, w, u) - eval_B(spec, u, w)) == 0.0

    @pytest.mark.parametrize("spec", [NonlinearitySpec.advection(), NonlinearitySpec.svplechac(0.7)])
    def test_diagonal_is_twice_D(self, grid3, spec):
        u = random_field(grid3, 3, seed=3)
        d = eval_D(spec, u)
        assert l2_norm(eval_B(spec, u, u) - d * 2.0) < 1e-12 * l2_norm(d)

    @pytest.mark.parametrize("spec", [NonlinearitySpec.advection(), NonlinearitySpec.svplechac(0.5)])
    def test_polarization(self, grid2, spec):
        u1, u2 = random_field(grid2, 2, seed=4), random_field(grid2, 2, seed=5)
        scale = l2_norm(eval_D(spec, u1)) + l2_norm(eval_D(spec, u2))
        assert polarization_residual(spec, u1, u2) < 1e-12 * scale


class TestTrilinear:
    @pytest.mark.parametrize("b", [0.1, 0.5, 0.9])
    def test_svplechac_null_on_any_field(self, grid3, b):
        u = random_field(grid3, 3, seed=int(10 * b))
        assert rel_trilinear(NonlinearitySpec.svplechac(b), u) < 1e-12

    def test_advection_null_on_projected_fields(self, grid3):
        u = leray_project(random_field(grid3, 3, seed=7))
        assert rel_trilinear(NonlinearitySpec.advection(), u) < 1e-12

    def test_advection_not_null_on_gradients(self, grid2):
        u = gradient(random_field(grid2, 1, seed=8))
        assert rel_trilinear(NonlinearitySpec.advection(), u) > 1e-4

    def test_half_grad_square_alone_not_null(self, grid2):
        u = gradient(random_field(grid2, 1, seed=8))
        spec = NonlinearitySpec.custom(BilinearTensor.half_grad_square(2))
        assert rel_trilinear(spec, u) > 1e-4


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), b=st.floats(0.01, 0.99))
def test_svplechac_pairing_vanishes(seed, b):
    g = TorusGrid(2, 2 * math.pi, 16)
    u = random_field(g, 2, seed=seed)
    assert rel_trilinear(NonlinearitySpec.svplechac(b), u) < 1e-12
