import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from homflow.errors import ValidationError
from homflow.grid import (MacroGrid, ScalarField, UnitCellGrid, gradient,
                          integrate, sample_periodic, sample_periodic_at)


def cell_field(n, fn, dim=1):
    g = UnitCellGrid(dim, n)
    pts = g.node_points()
    return ScalarField(g, fn(pts))


class TestIntegrate:
    def test_constant_on_cell_has_unit_measure(self):
        f = cell_field(32, lambda y: np.ones(y.shape[:-1]))
        assert integrate(f) == pytest.approx(1.0, abs=1e-14)

    def test_constant_on_macro_scales_with_domain(self):
        g = MacroGrid(1, 3.5, 29)
        assert integrate(ScalarField(g, np.full(g.shape, 2.25))) == pytest.approx(
            2.25 * 3.5, abs=1e-12)

    def test_macro_2d_measure(self):
        g = MacroGrid(2, 2.0, 17)
        assert integrate(ScalarField(g, np.ones(g.shape))) == pytest.approx(4.0)

    def test_periodic_exactness_for_sine(self):
        f = cell_field(64, lambda y: np.sin(2 * np.pi * y[..., 0]))
        assert abs(integrate(f)) < 1e-12


class TestGradient:
    def test_exact_on_affine_macro(self):
        g = MacroGrid(2, 2.0, 21)
        pts = g.node_points()
        f = ScalarField(g, 3.0 * pts[..., 0] - 1.5 * pts[..., 1] + 0.25)
        grad = gradient(f).values
        assert np.abs(grad[..., 0] - 3.0).max() < 1e-12
        assert np.abs(grad[..., 1] + 1.5).max() < 1e-12

    def test_constant_gives_zero(self):
        f = cell_field(16, lambda y: np.full(y.shape[:-1], 4.0))
        assert np.abs(gradient(f).values).max() < 1e-13

    @pytest.mark.parametrize("n", [128, 256])
    def test_sine_error_bound(self, n):
        f = cell_field(n, lambda y: np.sin(2 * np.pi * y[..., 0]))
        y = f.grid.axis_coords()
        exact = 2 * np.pi * np.cos(2 * np.pi * y)
        err = np.abs(gradient(f).values[..., 0] - exact).max()
        assert err < 2 * np.pi**3 / n**2

    def test_sine_error_decays_at_second_order(self):
        errs = []
        for n in (128, 256):
            f = cell_field(n, lambda y: np.sin(2 * np.pi * y[..., 0]))
            y = f.grid.axis_coords()
            errs.append(np.abs(gradient(f).values[..., 0]
                               - 2 * np.pi * np.cos(2 * np.pi * y)).max())
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


class TestSamplePeriodic:
    def test_sine_at_quarter_period(self):
        f = cell_field(64, lambda y: np.sin(2 * np.pi * y[..., 0]))
        g = MacroGrid(1, 1.0, 5)  # nodes at 0, .25, .5, .75, 1
        out = sample_periodic(f, 1.0, g)
        assert out.values[1] == pytest.approx(1.0, abs=1e-12)

    def test_constant_is_exact(self):
        f = cell_field(16, lambda y: np.full(y.shape[:-1], 2.5))
        g = MacroGrid(1, 3.0, 37)
        assert np.abs(sample_periodic(f, 0.7, g).values - 2.5).max() < 1e-14

    def test_corrector_profile_at_quarter_cell(self):
        # N(y) = sin(2 pi y)/(4 pi) evaluated at x/l = 1/4 gives 1/(4 pi)
        f = cell_field(64, lambda y: np.sin(2 * np.pi * y[..., 0]) / (4 * np.pi))
        val = sample_periodic_at(f, 1.0 / 16.0, np.array([[1.0 / 64.0]]))
        assert val[0] == pytest.approx(1.0 / (4 * np.pi), abs=1e-13)

    def test_rejects_nonpositive_period(self):
        f = cell_field(16, lambda y: np.ones(y.shape[:-1]))
        with pytest.raises(ValidationError):
            sample_periodic(f, 0.0, MacroGrid(1, 1.0, 9))

    def test_l_periodicity_at_grid_points(self):
        f = cell_field(32, lambda y: np.cos(2 * np.pi * y[..., 0]))
        l = 0.5
        g = MacroGrid(1, 4.0, 65)  # H = 1/16, so x + l is 8 nodes over
        out = sample_periodic(f, l, g).values
        shift = int(round(l / g.H))
        assert np.abs(out[shift:] - out[:-shift]).max() < 1e-12

    def test_2d_bilinear_matches_nodal_values(self):
        f = cell_field(16, lambda y: np.cos(2 * np.pi * y[..., 0])
                       * np.sin(2 * np.pi * y[..., 1]), dim=2)
        pts = f.grid.node_points()
        out = sample_periodic_at(f, 1.0, pts)
        assert np.abs(out - f.values).max() < 1e-14


class TestInvariants:
    @given(arrays(np.float64, (24,), elements=st.floats(-10, 10)))
    def test_divergence_theorem_on_periodic_grid(self, vals):
        f = ScalarField(UnitCellGrid(1, 24), vals)
        assert abs(integrate(gradient(f).component(0))) < 1e-12

    @given(arrays(np.float64, (8, 8), elements=st.floats(-5, 5)),
           st.integers(0, 1))
    def test_divergence_theorem_2d(self, vals, axis):
        f = ScalarField(UnitCellGrid(2, 8), vals)
        assert abs(integrate(gradient(f).component(axis))) < 1e-12

    def test_dirichlet_tag_requires_zero_boundary(self):
        g = MacroGrid(1, 1.0, 9)
        vals = np.ones(g.shape)
        with pytest.raises(ValidationError):
            ScalarField(g, vals, homogeneous_dirichlet=True)
        vals[0] = vals[-1] = 0.0
        ScalarField(g, vals, homogeneous_dirichlet=True)

    def test_field_shape_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            ScalarField(UnitCellGrid(1, 8), np.zeros(9))
