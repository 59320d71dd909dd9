"""Manufactured-solution machinery and the canned initial states."""

import math

import numpy as np
import pytest

from acbdf2.experiments import (
    MMS_EPS2,
    MmsProblem,
    convergence_order,
    coarsening_init,
    four_bubble_init,
    mms_sweep,
    random_mesh,
    run_mms,
)
from acbdf2.spatial import Grid2D, laplacian_apply, max_norm
from acbdf2.time_mesh import S0_LIMIT


class TestMmsProblem:
    def test_source_closed_form_symbolically(self):
        # derive u_t - eps^2 Lap u + u^3 - u for the manufactured solution
        # from scratch and compare with the closed form the class uses
        sympy = pytest.importorskip("sympy")
        x, y, t = sympy.symbols("x y t")
        s = sympy.sin(2 * sympy.pi * x) * sympy.sin(2 * sympy.pi * y)
        u = s * sympy.sin(t)
        eps2 = sympy.Rational(1, 8) / sympy.pi**2
        g = (
            sympy.diff(u, t)
            - eps2 * (sympy.diff(u, x, 2) + sympy.diff(u, y, 2))
            + u**3
            - u
        )
        closed = s * sympy.cos(t) + (s * sympy.sin(t)) ** 3
        assert sympy.simplify(g - closed) == 0

    def test_diffusion_parameter(self):
        assert MMS_EPS2 == pytest.approx(1.0 / (8.0 * math.pi**2), rel=1e-15)
        assert MmsProblem.eps**2 == pytest.approx(MMS_EPS2, rel=1e-15)

    def test_source_matches_discrete_residual(self):
        # on the grid the Laplacian term is not exactly -u, so compare the
        # closed form against the continuum identity at a few nodes instead
        grid = Grid2D(M=64, L=1.0)
        X, Y = grid.meshgrid()
        t = 0.7
        s = MmsProblem.shape(X, Y)
        expect = s * math.cos(t) + (s * math.sin(t)) ** 3
        np.testing.assert_allclose(MmsProblem.source(X, Y, t), expect, rtol=1e-13)

    def test_exact_starts_at_zero(self):
        grid = Grid2D(M=16, L=1.0)
        X, Y = grid.meshgrid()
        np.testing.assert_array_equal(MmsProblem.exact(X, Y, 0.0), 0.0)
        assert max_norm(MmsProblem.exact(X, Y, 1.0)) <= 1.0

    def test_shape_is_a_laplacian_eigenvector(self):
        # sin(2 pi x) sin(2 pi y) sees eigenvalue -2 (4/h^2) sin^2(pi/M)
        grid = Grid2D(M=32, L=1.0)
        X, Y = grid.meshgrid()
        s = MmsProblem.shape(X, Y)
        lam = -2.0 * 4.0 / grid.h**2 * math.sin(math.pi / grid.M) ** 2
        np.testing.assert_allclose(
            laplacian_apply(s, grid.h), lam * s, rtol=0.0, atol=1e-9
        )


class TestRandomMesh:
    def test_covers_the_horizon_exactly(self):
        for seed in (0, 1, 7):
            mesh = random_mesh(40, 1.0, seed)
            assert mesh.n_steps == 40
            assert np.all(mesh.steps > 0.0)
            assert abs(mesh.final_time - 1.0) <= 2.0 * np.spacing(1.0)

    def test_steps_are_the_normalized_draws(self):
        seed, n, T = 3, 25, 2.0
        mesh = random_mesh(n, T, seed)
        draws = np.random.default_rng(seed).uniform(0.0, 1.0, n)
        np.testing.assert_allclose(
            mesh.steps[:-1], T * draws[:-1] / draws.sum(), rtol=1e-15
        )

    def test_deterministic_per_seed(self):
        a = random_mesh(20, 1.0, 5)
        b = random_mesh(20, 1.0, 5)
        c = random_mesh(20, 1.0, 6)
        np.testing.assert_array_equal(a.steps, b.steps)
        assert not np.array_equal(a.steps, c.steps)

    def test_single_step_degenerates_to_the_horizon(self):
        mesh = random_mesh(1, 0.7, 0)
        np.testing.assert_allclose(mesh.steps, [0.7], rtol=1e-15)

    def test_needs_a_positive_count(self):
        with pytest.raises(ValueError):
            random_mesh(0, 1.0, 0)


class TestConvergenceOrder:
    def test_exact_second_order(self):
        assert convergence_order(4.0e-3, 1.0e-3, 2.0e-2, 1.0e-2) == pytest.approx(
            2.0, rel=1e-14
        )

    @pytest.mark.parametrize(
        "args",
        [
            (0.0, 1e-3, 2e-2, 1e-2),
            (1e-3, 0.0, 2e-2, 1e-2),
            (1e-3, 1e-4, 1e-2, 1e-2),
            (1e-3, 1e-4, 0.0, 1e-2),
        ],
    )
    def test_undefined_cases_give_nan(self, args):
        assert math.isnan(convergence_order(*args))


class TestRunMms:
    def test_small_march_bookkeeping(self):
        res = run_mms(8, seed=1, M=32)
        mesh = random_mesh(8, 1.0, 1)
        assert res.N == 8
        assert res.seed == 1
        assert res.tau_max == pytest.approx(float(mesh.steps.max()), rel=1e-15)
        assert res.err_inf > 0.0
        assert len(res.newton_iters) == 8
        assert all(it >= 1 for it in res.newton_iters)
        assert res.num_ratio_violations == int(
            np.sum(mesh.ratios[1:] >= S0_LIMIT)
        )

    def test_error_is_small_on_a_modest_mesh(self):
        # 8 random steps at M = 32: temporal plus spatial error stays well
        # below the solution scale
        res = run_mms(8, seed=1, M=32)
        assert res.err_inf < 5e-2

    def test_sweep_orders_and_nesting(self):
        rows = mms_sweep([5, 10, 20], seed=1, M=32)
        assert [row.N for row in rows] == [5, 10, 20]
        assert math.isnan(rows[0].order)
        assert rows[1].tau_max < rows[0].tau_max
        assert rows[2].tau_max < rows[1].tau_max
        assert math.isfinite(rows[1].order)
        assert math.isfinite(rows[2].order)


class TestFourBubbleInit:
    GRID = Grid2D(M=128, L=2.0, origin=-1.0)
    EPS = 0.02

    def test_value_at_the_origin(self):
        # each circle contributes tanh((0.09 - 0.04)/eps) = tanh(2.5) there
        phi = four_bubble_init(self.GRID, self.EPS)
        assert phi[64, 64] == pytest.approx(-math.tanh(2.5) ** 4, rel=1e-14)

    def test_bounded_by_one(self):
        phi = four_bubble_init(self.GRID, self.EPS)
        assert max_norm(phi) <= 1.0

    def test_point_symmetry(self):
        # the four centers are symmetric under (x, y) -> (-x, -y)
        phi = four_bubble_init(self.GRID, self.EPS)
        idx = (-np.arange(self.GRID.M)) % self.GRID.M
        np.testing.assert_allclose(phi, phi[np.ix_(idx, idx)], atol=1e-13)

    def test_phases_on_both_sides_of_the_interface(self):
        phi = four_bubble_init(self.GRID, self.EPS)
        assert phi.min() < -0.99  # far outside the circles
        # a bubble center is 0.04/eps interface widths inside: tanh(2)
        assert phi.max() > math.tanh(2.0) - 1e-3


class TestCoarseningInit:
    GRID = Grid2D(M=32, L=1.0)

    def test_zero_amplitude_gives_the_base(self):
        u = coarsening_init(self.GRID, seed=0, base=0.2, amp=0.0)
        np.testing.assert_array_equal(u, 0.2)

    def test_bounds_and_determinism(self):
        a = coarsening_init(self.GRID, seed=4, base=0.1, amp=0.05)
        b = coarsening_init(self.GRID, seed=4, base=0.1, amp=0.05)
        c = coarsening_init(self.GRID, seed=5, base=0.1, amp=0.05)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)
        assert np.all(np.abs(a - 0.1) <= 0.05)

    def test_negative_amplitude_raises(self):
        with pytest.raises(ValueError):
            coarsening_init(self.GRID, seed=0, amp=-0.01)
