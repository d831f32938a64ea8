import math

import numpy as np
import pytest
from scipy.special import ndtr

from kpplab import (
    BranchingLaw,
    BranchingModel,
    Field,
    FrontTrace,
    Grid,
    Kernel,
    Motion,
    convolve,
    evolve,
    front_position,
    measure_front,
    pde_step,
    picard_solve,
    shift_field,
    solve_v,
    wave_residual,
)
from kpplab.errors import (
    DomainError,
    FitError,
    GridTooSmallError,
    NoFrontError,
    RangeOverflowError,
    StepSizeError,
    UnsupportedModelError,
)

from helpers import logistic_decay


def small_grid(n=16, half=1.0):
    return Grid(-half, half, n)


class TestGrid:
    def test_power_of_two_required(self):
        with pytest.raises(DomainError):
            Grid(0.0, 1.0, 100)

    def test_spacing_consistency(self):
        g = Grid(-3.0, 5.0, 256)
        assert g.dx * (g.n_points - 1) == pytest.approx(8.0, abs=1e-12)
        assert g.xs[0] == -3.0 and g.xs[-1] == 5.0


class TestConvolve:
    def test_constant_one_preserved(self):
        grid = Grid(-24.0, 24.0, 1024)
        for kernel in (Kernel.gaussian(1.0), Kernel.two_sided_exponential(2.0)):
            out = convolve(kernel, Field.constant(grid, 1.0))
            assert np.max(np.abs(out.values - 1.0)) < 1e-9

    def test_zero_preserved(self):
        grid = Grid(-24.0, 24.0, 1024)
        out = convolve(Kernel.gaussian(1.0), Field.constant(grid, 0.0))
        assert np.max(np.abs(out.values)) == 0.0

    def test_heaviside_gives_gaussian_cdf(self):
        grid = Grid(-16.0, 16.0, 4096)
        out = convolve(Kernel.gaussian(1.0), Field.heaviside(grid))
        i0 = int(np.argmin(np.abs(grid.xs)))
        assert abs(out.values[i0] - 0.5) < 2 * grid.dx
        assert np.max(np.abs(out.values - ndtr(grid.xs))) < 1e-6

    def test_grid_too_small(self):
        grid = Grid(-2.0, 2.0, 64)
        with pytest.raises(GridTooSmallError):
            convolve(Kernel.gaussian(1.0), Field.heaviside(grid))


class TestPdeStep:
    def test_stationary_states(self, jump_gaussian_binary):
        grid = Grid(-24.0, 24.0, 1024)
        one = pde_step(jump_gaussian_binary, Field.constant(grid, 1.0), 0.1)
        zero = pde_step(jump_gaussian_binary, Field.constant(grid, 0.0), 0.1)
        assert np.max(np.abs(one.values - 1.0)) < 1e-9
        assert np.max(np.abs(zero.values)) < 1e-9

    def test_brownian_stationary(self, brownian_binary):
        grid = Grid(-8.0, 8.0, 256)
        dt = 0.2 * min(1.0, grid.dx**2)
        one = pde_step(brownian_binary, Field.constant(grid, 1.0), dt)
        assert np.max(np.abs(one.values - 1.0)) < 1e-9

    def test_logistic_closed_form(self, immobile_binary):
        u = Field.constant(small_grid(), 0.5)
        u = evolve(immobile_binary, u, 1.0, 1e-3)
        assert np.max(np.abs(u.values - logistic_decay(0.5, 1.0))) < 1e-8

    def test_stability_bound_enforced(self, brownian_binary):
        grid = Grid(-8.0, 8.0, 1024)
        with pytest.raises(StepSizeError):
            pde_step(brownian_binary, Field.heaviside(grid), 0.1)

    def test_instability_detected(self, brownian_binary):
        # well-formed dt but garbage data blowing out of [0, 1]
        grid = Grid(-8.0, 8.0, 256)
        bad = Field(grid, 1.0 + 0.5 * np.sin(10 * grid.xs) ** 2, 0.0, 0.0, 1.0)
        with pytest.raises(StepSizeError):
            pde_step(brownian_binary, bad, 0.2 * grid.dx**2)


class TestComparisonAndSandwich:
    def test_pde_comparison_principle(self, jump_gaussian_binary):
        grid = Grid(-24.0, 24.0, 1024)
        lower = Field.heaviside(grid)
        h = 2.0
        ramp = np.clip((grid.xs + h) / h, 0.0, 1.0)
        middle = Field(grid, ramp, 0.0, 0.0, 1.0)
        upper = Field(grid, (grid.xs >= -h).astype(float), 0.0, 0.0, 1.0)
        for t in (0.5, 1.5, 3.0):
            u1 = evolve(jump_gaussian_binary, lower, t, 0.1)
            u2 = evolve(jump_gaussian_binary, middle, t, 0.1)
            u3 = evolve(jump_gaussian_binary, upper, t, 0.1)
            assert np.all(u1.values <= u2.values + 1e-8)
            assert np.all(u2.values <= u3.values + 1e-8)
            assert np.all(u1.values >= -1e-8) and np.all(u3.values <= 1.0 + 1e-8)

    def test_picard_comparison_principle(self):
        model = BranchingModel(
            Motion.constant(), BranchingLaw.binary_one_displaced(Kernel.gaussian(1.0))
        )
        grid = Grid(-16.0, 16.0, 256)
        f1 = Field(grid, 0.5 * ndtr(grid.xs), 0.0, 0.0, 0.5)
        f2 = Field(grid, 0.3 + 0.7 * ndtr(grid.xs), 0.0, 0.3, 1.0)
        u1 = picard_solve(model, f1, 1.0, 65, tol=1e-10)
        u2 = picard_solve(model, f2, 1.0, 65, tol=1e-10)
        assert np.all(u1.values <= u2.values + 1e-8)


class TestPicard:
    def test_all_ones_fixed_point_immobile(self, immobile_binary):
        f = Field.constant(small_grid(), 1.0)
        u = picard_solve(immobile_binary, f, 1.0, 2000, tol=1e-10)
        assert np.max(np.abs(u.values - 1.0)) < 1e-7

    def test_all_ones_fixed_point_jump(self, jump_gaussian_binary):
        grid = Grid(-24.0, 24.0, 512)
        u = picard_solve(jump_gaussian_binary, Field.constant(grid, 1.0), 1.0, 129, tol=1e-10)
        # deviation limited by the trapezoid time mesh, not the iteration
        assert np.max(np.abs(u.values - 1.0)) < 1e-4

    def test_zero_data_stays_zero(self, jump_gaussian_binary):
        grid = Grid(-24.0, 24.0, 512)
        u = picard_solve(jump_gaussian_binary, Field.constant(grid, 0.0), 1.0, 33, tol=1e-10)
        assert np.max(np.abs(u.values)) == 0.0

    def test_logistic_closed_form(self, immobile_binary):
        f = Field.constant(small_grid(), 0.5)
        u = picard_solve(immobile_binary, f, 1.0, 2000, tol=1e-10)
        assert np.max(np.abs(u.values - logistic_decay(0.5, 1.0))) < 1e-4

    def test_iterates_increase_monotonically(self, immobile_binary):
        f = Field.constant(small_grid(), 0.5)
        _, history = picard_solve(immobile_binary, f, 1.0, 200, tol=1e-12, return_history=True)
        for early, late in zip(history, history[1:]):
            assert np.all(late >= early - 1e-12)
            assert np.all(late <= 1.0 + 1e-12)

    def test_unsupported_model_rejected(self, brownian_binary):
        with pytest.raises(UnsupportedModelError):
            picard_solve(brownian_binary, Field.constant(small_grid(), 0.5), 1.0, 10)

    def test_agrees_with_strong_form(self, jump_gaussian_binary):
        grid = Grid(-24.0, 24.0, 512)
        f = Field(grid, ndtr(grid.xs), 0.0, 0.0, 1.0)
        mild = picard_solve(jump_gaussian_binary, f, 1.0, 129, tol=1e-10)
        strong = evolve(jump_gaussian_binary, f, 1.0, 0.05)
        assert np.max(np.abs(mild.values - strong.values)) < 5e-4


class TestSolveV:
    def test_initial_data_exact(self, jump_gaussian_binary):
        grid = small_grid(64, 4.0)
        v = solve_v(jump_gaussian_binary, 0.7, grid, 0.0, 0.01)
        assert np.array_equal(v.values, np.exp(-0.7 * grid.xs))

    def test_gaussian_jump_growth(self, jump_gaussian_binary):
        grid = small_grid(64, 4.0)
        v = solve_v(jump_gaussian_binary, 0.0, grid, 1.0, 0.01)
        assert v.values[0] == pytest.approx(math.e, abs=1e-8)

    def test_brownian_offspring_closed_form(self, brownian_binary):
        grid = Grid(-4.0, 4.0, 128)
        v = solve_v(brownian_binary, 1.0, grid, 1.0, 0.01)
        want = np.exp(0.5 + 1.0) * np.exp(-grid.xs)
        assert np.max(np.abs(v.values - want) / want) < 1e-8

    def test_consistency_with_transform(self, jump_exponential_binary):
        from kpplab import log_laplace

        grid = small_grid(64, 4.0)
        for lam in (0.0, 0.5, 1.0):
            v = solve_v(jump_exponential_binary, lam, grid, 1.0, 0.005)
            ratio = v.values[32] / math.exp(-lam * grid.xs[32])
            assert math.log(ratio) == pytest.approx(
                log_laplace(jump_exponential_binary, lam), abs=1e-6
            )

    def test_overflow_guard(self, jump_gaussian_binary):
        grid = Grid(-800.0, 800.0, 128)
        with pytest.raises(RangeOverflowError):
            solve_v(jump_gaussian_binary, 2.0, grid, 1.0, 0.01)


class TestFrontPosition:
    def test_heaviside_crossing_at_origin(self):
        grid = Grid(-8.0, 8.0, 256)
        assert abs(front_position(Field.heaviside(grid))) <= grid.dx

    def test_gaussian_cdf_median(self):
        grid = Grid(-8.0, 16.0, 2048)
        f = Field(grid, ndtr(grid.xs - 3.0), 0.0, 0.0, 1.0)
        assert front_position(f) == pytest.approx(3.0, abs=grid.dx**2)

    def test_flat_field_has_no_front(self):
        grid = Grid(-8.0, 8.0, 256)
        with pytest.raises(NoFrontError):
            front_position(Field.constant(grid, 0.4))


class TestMeasureFront:
    def test_exact_model_recovery(self):
        t = np.linspace(5.0, 60.0, 111)
        m = 1.5 * t - 1.06 * np.log(t) + 2.0
        fit = measure_front(FrontTrace(t, m), 1.0, (5.0, 60.0))
        assert fit.c_est == pytest.approx(1.5, abs=1e-9)
        assert fit.log_slope == pytest.approx(-1.06, abs=1e-9)
        assert fit.intercept == pytest.approx(2.0, abs=1e-9)

    def test_pure_linear_recovery(self):
        t = np.linspace(5.0, 60.0, 111)
        c = math.sqrt(2.0)
        fit = measure_front(FrontTrace(t, c * t), 1.0, (5.0, 60.0))
        assert fit.c_est == pytest.approx(c, abs=1e-9)
        assert fit.log_slope == pytest.approx(0.0, abs=1e-9)
        assert fit.intercept == pytest.approx(0.0, abs=1e-9)

    def test_window_too_narrow(self):
        t = np.linspace(5.0, 60.0, 111)
        with pytest.raises(FitError):
            measure_front(FrontTrace(t, 1.5 * t), 1.0, (5.0, 5.2))


class TestWaveResidual:
    def test_constant_states_are_waves(self, jump_gaussian_binary):
        grid = Grid(-24.0, 24.0, 1024)
        for value in (0.0, 1.0):
            res = wave_residual(Field.constant(grid, value), 1.7, jump_gaussian_binary, 0.05)
            assert res < 1e-9

    def test_shift_field_round_trip(self):
        grid = Grid(-8.0, 8.0, 512)
        f = Field(grid, ndtr(grid.xs), 0.0, 0.0, 1.0)
        back = shift_field(shift_field(f, 1.0), -1.0)
        inner = slice(64, -64)
        assert np.max(np.abs(back.values[inner] - f.values[inner])) < 1e-4


def test_monotone_data_stays_monotone(jump_gaussian_binary, brownian_binary):
    grid = Grid(-16.0, 16.0, 512)
    u = evolve(jump_gaussian_binary, Field.heaviside(grid), 3.0, 0.1)
    assert np.all(np.diff(u.values) >= -1e-10)
    dt = 0.2 * min(1.0, grid.dx**2)
    u = evolve(brownian_binary, Field.heaviside(grid), 1.0, dt)
    assert np.all(np.diff(u.values) >= -1e-10)


class TestTravelingWaveProfile:
    def test_comoving_residual_vanishes(self, jump_gaussian_binary):
        from kpplab import traveling_wave_profile
        from kpplab.solve import _Stepper

        grid = Grid(-30.0, 30.0, 1024)
        c = math.exp(0.5)
        prof = traveling_wave_profile(jump_gaussian_binary, c, grid)
        stepper = _Stepper(jump_gaussian_binary, grid, 0.0, 1.0)
        du = np.gradient(prof.values, grid.dx)
        steady = stepper.rhs(prof.values) + c * du
        interior = slice(8, -8)
        assert np.max(np.abs(steady[interior])) < 1e-4  # gradient() is only O(dx^2)
        assert prof.values[0] < 1e-5 and prof.values[-1] > 1 - 1e-8
        # monotone up to a boundary layer at the domain-truncation scale
        assert np.all(np.diff(prof.values) >= -1e-6)

    def test_small_wave_residual_at_minimal_speed(self, jump_gaussian_binary):
        from kpplab import traveling_wave_profile

        grid = Grid(-30.0, 30.0, 1024)
        c = math.exp(0.5)
        prof = traveling_wave_profile(jump_gaussian_binary, c, grid)
        res = wave_residual(prof, c, jump_gaussian_binary, 0.05)
        assert res < 5 * grid.dx**2 + 5 * 0.05
        assert res < 5e-5


def test_convergence_order_on_logistic(immobile_binary):
    # halving both mesh sizes cuts the closed-form error by far more than 3x
    errors = []
    for dt in (2e-2, 1e-2):
        u = evolve(immobile_binary, Field.constant(small_grid(), 0.5), 1.0, dt)
        errors.append(abs(u.values[0] - logistic_decay(0.5, 1.0)))
    assert errors[0] / errors[1] > 3.0
