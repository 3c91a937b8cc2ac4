"""Observation kernels, layouts, and the two measurement functionals.

Frozen constants below were computed once with 30-digit adaptive
quadrature of the profile formulas; the package must reproduce them
through its own quadrature path.
"""

import math
import warnings

import numpy as np
import pytest

from meinhardt.domain import TorusGrid
from meinhardt.model import FieldPair
from meinhardt.solver import SolverConfig, Trajectory
from meinhardt.measurement import (
    Kernel,
    MeasurementLayout,
    MeasurementSet,
    bump_kernel,
    kernel_from_samples,
    laplace_kernel_samples,
    local_measure,
    measure_trajectory,
    regular_layout,
    scaled_kernel_samples,
)

L = 20.0

NORM_K = 2.80853786278762699e-05
NORM_DK = 9.54776724234211580e-05
SIGMA = 0.173056101360292231
INTEGRAL = 2.38196608405347630e-05
NORM_D2K = 5.43868679382466963e-04
K_AT_ZERO = 4.53999297624848515e-05


class TestBumpKernelOracles:
    def test_constants_match_the_quadrature_oracle(self, kernel):
        assert kernel.norm_K == pytest.approx(NORM_K, rel=1e-8)
        assert kernel.norm_dK == pytest.approx(NORM_DK, rel=1e-8)
        assert kernel.Sigma == pytest.approx(SIGMA, rel=1e-8)
        assert kernel.integral == pytest.approx(INTEGRAL, rel=1e-8)
        assert kernel.l1_norm == pytest.approx(INTEGRAL, rel=1e-8)

    def test_sigma_is_derived_from_the_two_norms(self, kernel):
        assert kernel.Sigma == pytest.approx(
            2.0 * kernel.norm_K**2 / kernel.norm_dK**2, rel=1e-14
        )
        assert kernel.norm_dK > 0.0

    def test_profile_support_and_center_value(self, kernel):
        assert kernel.profile(np.array([0.0]))[0] == pytest.approx(K_AT_ZERO, rel=1e-12)
        assert kernel.profile(np.array([0.0]))[0] == pytest.approx(math.exp(-10.0), rel=1e-12)
        edges = kernel.profile(np.array([-1.0, 1.0, -1.5, 2.0]))
        assert np.all(edges == 0.0)

    def test_profile_is_even(self, kernel):
        x = np.linspace(0.0, 1.0, 101)
        np.testing.assert_allclose(kernel.profile(x), kernel.profile(-x), rtol=1e-14)

    def test_second_derivative_matches_difference_quotients(self, kernel):
        x = np.array([-0.7, -0.3, 0.0, 0.2, 0.55])
        h = 1e-4
        fd = (kernel.profile(x + h) - 2.0 * kernel.profile(x) + kernel.profile(x - h)) / h**2
        np.testing.assert_allclose(kernel.second_derivative(x), fd, rtol=1e-5)

    def test_second_derivative_integrates_to_zero(self, kernel):
        x = np.linspace(-1.0, 1.0, 40001)
        total = np.trapezoid(kernel.second_derivative(x), x)
        assert abs(total) < 1e-8


class TestSampledKernel:
    def test_matches_the_analytic_bump(self, kernel):
        x = np.linspace(-1.0, 1.0, 401)
        samples = kernel.profile(x).copy()
        samples[0] = samples[-1] = 0.0
        rebuilt = kernel_from_samples(samples, name="tabled-bump")
        assert rebuilt.norm_K == pytest.approx(kernel.norm_K, rel=2e-4)
        assert rebuilt.norm_dK == pytest.approx(kernel.norm_dK, rel=2e-4)
        assert rebuilt.Sigma == pytest.approx(kernel.Sigma, rel=5e-4)
        pts = np.array([-0.7, -0.3, 0.0, 0.2, 0.55])
        np.testing.assert_allclose(
            rebuilt.second_derivative(pts), kernel.second_derivative(pts), rtol=1e-5
        )

    def test_validation(self):
        with pytest.raises(ValueError, match="at least 5"):
            kernel_from_samples(np.zeros(3))
        with pytest.raises(ValueError, match="vanish"):
            kernel_from_samples(np.ones(11))
        with pytest.raises(ValueError, match="finite"):
            kernel_from_samples(np.array([0.0, 1.0, np.nan, 1.0, 0.0]))
        good = np.array([0.0, 1.0, 2.0, 1.0, 0.0])
        with pytest.raises(ValueError, match="oversample"):
            kernel_from_samples(good, oversample_factor=1)


class TestScaledSamples:
    @pytest.mark.parametrize("delta", [0.34, 0.5, 1.0, 2.0])
    def test_squared_sum_reproduces_the_profile_norm(self, kernel, delta):
        grid = TorusGrid(L, 2000)
        s = scaled_kernel_samples(kernel, delta, 10.0, grid)
        assert grid.dx * float(s @ s) == pytest.approx(NORM_K**2, rel=0.01)

    def test_scale_invariance_of_the_norm(self, kernel):
        grid = TorusGrid(L, 2000)
        n1 = grid.dx * float(np.sum(scaled_kernel_samples(kernel, 1.0, 10.0, grid) ** 2))
        n2 = grid.dx * float(np.sum(scaled_kernel_samples(kernel, 0.5, 10.0, grid) ** 2))
        assert n1 == pytest.approx(n2, rel=0.01)

    def test_symmetry_about_the_center(self, kernel):
        grid = TorusGrid(L, 500)
        s = scaled_kernel_samples(kernel, 1.0, 0.0, grid)
        # rounding in the periodic fold is amplified near the support
        # edge, where the profile decays faster than any power
        np.testing.assert_allclose(s[1:], s[1:][::-1], rtol=1e-9)

    def test_support_wraps_across_the_seam(self, kernel):
        grid = TorusGrid(L, 500)
        at_seam = scaled_kernel_samples(kernel, 1.0, 0.0, grid)
        away = scaled_kernel_samples(kernel, 1.0, 10.0, grid)
        np.testing.assert_allclose(at_seam, np.roll(away, -250), rtol=0, atol=1e-18)
        assert at_seam[0] > 0.0

    def test_rejects_wrapping_kernel(self, kernel):
        grid = TorusGrid(L, 100)
        with pytest.raises(ValueError):
            scaled_kernel_samples(kernel, 10.0, 0.0, grid)
        with pytest.raises(ValueError):
            laplace_kernel_samples(kernel, 10.0, 0.0, grid)

    def test_l1_norm_bound(self, kernel):
        grid = TorusGrid(L, 2000)
        for delta in (0.34, 1.0, 2.0):
            s = scaled_kernel_samples(kernel, delta, 7.0, grid)
            discrete_l1 = grid.dx * float(np.sum(np.abs(s)))
            assert discrete_l1 <= math.sqrt(delta) * kernel.l1_norm * (1.0 + 1e-6)

    def test_laplace_samples_scale_like_delta_to_minus_five_halves(self, kernel):
        grid = TorusGrid(L, 2000)
        for delta in (0.5, 1.0, 2.0):
            l = laplace_kernel_samples(kernel, delta, 10.0, grid)
            norm = math.sqrt(grid.dx * float(l @ l))
            assert norm == pytest.approx(NORM_D2K * delta**-2, rel=0.01)


class TestMeasurementFunctionals:
    def test_constant_field_local_reading(self, kernel):
        grid = TorusGrid(L, 2000)
        c, delta = 3.7, 1.0
        field = np.full(grid.num_points, c)
        s = scaled_kernel_samples(kernel, delta, 5.0, grid)
        got = local_measure(field, s, grid)
        assert got == pytest.approx(c * math.sqrt(delta) * INTEGRAL, rel=1e-6)

    def test_constant_field_laplace_reading_vanishes(self, kernel):
        grid = TorusGrid(L, 2000)
        c, delta = 3.7, 1.0
        field = np.full(grid.num_points, c)
        l = laplace_kernel_samples(kernel, delta, 5.0, grid)
        assert abs(local_measure(field, l, grid)) < 1e-8 * c * delta**-1.5

    def test_self_inner_product_gives_the_squared_norm(self, kernel):
        grid = TorusGrid(L, 2000)
        s = scaled_kernel_samples(kernel, 1.0, 5.0, grid)
        assert local_measure(s, s, grid) == pytest.approx(NORM_K**2, rel=0.01)

    def test_local_reading_approximates_point_evaluation(self, kernel):
        grid = TorusGrid(L, 4000)
        field = np.cos(2.0 * np.pi * grid.coordinates / L)
        center = 3.0
        errors = []
        for delta in (1.0, 0.5):
            s = scaled_kernel_samples(kernel, delta, center, grid)
            value = local_measure(field, s, grid) / (math.sqrt(delta) * INTEGRAL)
            errors.append(abs(value - math.cos(2.0 * math.pi * center / L)))
        # quadratic convergence in delta: halving delta cuts the error
        # by about four
        assert errors[1] < errors[0] / 2.5

    def test_laplace_reading_reproduces_the_mode_eigenvalue(self, kernel):
        grid = TorusGrid(L, 2000)
        field = np.cos(2.0 * np.pi * grid.coordinates / L)
        center = 5.0
        s = scaled_kernel_samples(kernel, 1.0, center, grid)
        l = laplace_kernel_samples(kernel, 1.0, center, grid)
        loc = local_measure(field, s, grid)
        lap = local_measure(field, l, grid)
        assert lap == pytest.approx(-((2.0 * math.pi / L) ** 2) * loc, rel=0.01)

    def test_laplace_symbol_approximates_the_second_derivative(self, kernel):
        grid = TorusGrid(L, 4000)
        field = np.cos(2.0 * np.pi * grid.coordinates / L)
        center = 3.0
        second = -((2.0 * math.pi / L) ** 2) * math.cos(2.0 * math.pi * center / L)
        errors = []
        for delta in (0.8, 0.4):
            l = laplace_kernel_samples(kernel, delta, center, grid)
            value = local_measure(field, l, grid) / (math.sqrt(delta) * INTEGRAL)
            errors.append(abs(value - second))
        assert errors[1] < errors[0] / 2.0

    def test_linearity(self, kernel, rng):
        grid = TorusGrid(L, 500)
        u = rng.standard_normal(grid.num_points)
        v = rng.standard_normal(grid.num_points)
        alpha, beta = 1.7, -0.4
        for rows in (
            scaled_kernel_samples(kernel, 1.0, 5.0, grid),
            laplace_kernel_samples(kernel, 1.0, 5.0, grid),
        ):
            combined = local_measure(alpha * u + beta * v, rows, grid)
            split = alpha * local_measure(u, rows, grid) + beta * local_measure(v, rows, grid)
            assert combined == pytest.approx(split, rel=1e-12, abs=1e-15)

    def test_shape_mismatch_rejected(self, kernel):
        grid = TorusGrid(L, 500)
        s = scaled_kernel_samples(kernel, 1.0, 5.0, grid)
        with pytest.raises(ValueError):
            local_measure(np.zeros(400), s, grid)


class TestLayouts:
    def test_regular_layout_spreads_centers_evenly(self, kernel):
        grid = TorusGrid(L, 2000)
        layout = regular_layout(1.0, 5, grid)
        np.testing.assert_allclose(layout.centers, [0.0, 4.0, 8.0, 12.0, 16.0])
        assert layout.num_channels == 5
        assert layout.min_center_spacing() == pytest.approx(4.0)

    def test_centers_fold_into_the_fundamental_domain(self):
        grid = TorusGrid(L, 2000)
        layout = MeasurementLayout(delta=0.5, centers=np.array([-3.0, 21.0]), grid=grid)
        np.testing.assert_allclose(sorted(layout.centers), [1.0, 17.0])

    def test_validation(self):
        grid = TorusGrid(L, 2000)
        with pytest.raises(ValueError):
            MeasurementLayout(delta=0.0, centers=np.array([1.0]), grid=grid)
        with pytest.raises(ValueError):
            MeasurementLayout(delta=10.0, centers=np.array([1.0]), grid=grid)
        with pytest.raises(ValueError):
            regular_layout(1.0, 0, grid)

    def test_coarse_resolution_warns(self):
        grid = TorusGrid(L, 100)
        with pytest.warns(UserWarning, match="delta/dx"):
            MeasurementLayout(delta=1.0, centers=np.array([5.0]), grid=grid)

    def test_overlapping_supports_warn(self):
        grid = TorusGrid(L, 2000)
        with pytest.warns(UserWarning, match="overlap"):
            MeasurementLayout(delta=1.0, centers=np.array([5.0, 6.0]), grid=grid)

    @pytest.mark.parametrize("delta", [0.34, 2.0])
    def test_default_five_channel_layouts_do_not_overlap(self, delta):
        grid = TorusGrid(L, 2000)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            layout = regular_layout(delta, 5, grid)
        assert layout.min_center_spacing() >= 2.0 * delta


def _constant_trajectory(grid, params, value=2.0, n_times=4):
    times = np.linspace(0.0, 3.0, n_times)
    states = [
        FieldPair(
            activator=np.full(grid.num_points, value),
            inhibitor=np.full(grid.num_points, value),
            time=t,
        )
        for t in times
    ]
    config = SolverConfig(T=3.0, n_steps=n_times - 1)
    return Trajectory(
        grid=grid, times=times, states=states, discarded=False, params=params, config=config
    )


class TestMeasureTrajectory:
    def test_constant_trajectory_readings(self, kernel, params):
        grid = TorusGrid(L, 2000)
        traj = _constant_trajectory(grid, params)
        layout = regular_layout(1.0, 5, grid)
        ms = measure_trajectory(traj, layout, kernel)
        assert ms.local.shape == (4, 5)
        expected = 2.0 * math.sqrt(1.0) * INTEGRAL
        np.testing.assert_allclose(ms.local, expected, rtol=1e-6)
        assert np.all(np.abs(ms.laplace) < 1e-8)

    def test_single_channel_agrees_with_direct_calls(self, kernel, params):
        grid = TorusGrid(L, 1000)
        rng = np.random.default_rng(5)
        times = np.linspace(0.0, 1.0, 3)
        states = [
            FieldPair(
                activator=rng.standard_normal(grid.num_points),
                inhibitor=np.zeros(grid.num_points),
                time=t,
            )
            for t in times
        ]
        traj = Trajectory(
            grid=grid,
            times=times,
            states=states,
            discarded=False,
            params=params,
            config=SolverConfig(T=1.0, n_steps=2),
        )
        layout = MeasurementLayout(delta=1.0, centers=np.array([7.0]), grid=grid)
        ms = measure_trajectory(traj, layout, kernel)
        s = scaled_kernel_samples(kernel, 1.0, 7.0, grid)
        l = laplace_kernel_samples(kernel, 1.0, 7.0, grid)
        for j, state in enumerate(states):
            assert ms.local[j, 0] == pytest.approx(local_measure(state.activator, s, grid), rel=1e-12)
            assert ms.laplace[j, 0] == pytest.approx(local_measure(state.activator, l, grid), rel=1e-12)

    def test_time_stride_subsamples_frames(self, kernel, params):
        grid = TorusGrid(L, 2000)
        traj = _constant_trajectory(grid, params, n_times=7)
        layout = regular_layout(1.0, 5, grid)
        ms = measure_trajectory(traj, layout, kernel, time_stride=3)
        assert ms.times.shape == (3,)
        np.testing.assert_allclose(ms.times, traj.times[::3])

    def test_grid_mismatch_rejected(self, kernel, params):
        traj = _constant_trajectory(TorusGrid(L, 2000), params)
        layout = regular_layout(1.0, 5, TorusGrid(L, 1000))
        with pytest.raises(ValueError):
            measure_trajectory(traj, layout, kernel)
        with pytest.raises(ValueError):
            measure_trajectory(traj, regular_layout(1.0, 5, TorusGrid(L, 2000)), kernel, 0)


class TestMeasurementSet:
    def test_shape_and_time_validation(self):
        times = np.array([0.0, 1.0, 2.0])
        good = np.zeros((3, 2))
        MeasurementSet(times=times, local=good, laplace=good, layout=None)
        with pytest.raises(ValueError):
            MeasurementSet(times=times, local=np.zeros((2, 2)), laplace=good, layout=None)
        with pytest.raises(ValueError):
            MeasurementSet(times=np.array([0.0, 1.0, 1.0]), local=good, laplace=good, layout=None)
        with pytest.raises(ValueError):
            MeasurementSet(times=np.array([0.0]), local=np.zeros((1, 2)),
                           laplace=np.zeros((1, 2)), layout=None)

    def test_channel_count_and_duration(self):
        times = np.array([0.0, 0.5, 1.5])
        ms = MeasurementSet(times=times, local=np.zeros((3, 4)),
                            laplace=np.zeros((3, 4)), layout=None)
        assert ms.num_channels == 4
        assert ms.duration == pytest.approx(1.5)
