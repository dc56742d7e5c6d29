import csv
import dataclasses
import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from scipy import optimize

from apps.beam.assembly import assemble
from apps.beam.mesh import build_mesh, interpolate
from apps.coefficients.fields import BeamMaterial, make_load
from apps.kernels.kernel import build_kernel
from apps.kernels.mollifiers import MollifierSpec
from apps.services.exceptions import ConfigError, GridMismatchError, PicardNonConvergence

from .analysis import dominant_frequency, energy_history, mechanical_energy
from .problem import LoadForcing, Problem
from .solvers import e_norm, restart_horizon, solve_direct, solve_picard, trajectory_distance


def constant(value):
    return lambda x: np.full_like(np.asarray(x, dtype=float), value)


def bubble(x):
    return x**2 * (1.0 - x) ** 2


def bubble_slope(x):
    return 2.0 * x * (1.0 - x) * (1.0 - 2.0 * x)


def make_problem(
    n_elems=8,
    horizon=0.5,
    steps=128,
    alpha=None,
    theta=None,
    stiffness=1.0,
    amplitude=1.0,
    velocity=0.0,
    forcing=None,
):
    system = assemble(build_mesh(n_elems), constant(stiffness))
    shape = interpolate(system.mesh, bubble, bubble_slope)
    dt = horizon / steps
    kernel = build_kernel(alpha, theta, horizon, dt) if alpha is not None else None
    return Problem(system, amplitude * shape, velocity * shape, horizon, dt, kernel, forcing)


class ProblemTests(SimpleTestCase):
    def test_kernel_grid_mismatch(self):
        system = assemble(build_mesh(4), constant(1.0))
        zeros = np.zeros(system.mesh.n_active)
        with self.assertRaises(GridMismatchError):
            Problem(system, zeros, zeros, 1.0, 1.0 / 64, build_kernel(0.5, 0.5, 1.0, 1.0 / 32))

    def test_time_step_outside_horizon(self):
        system = assemble(build_mesh(4), constant(1.0))
        zeros = np.zeros(system.mesh.n_active)
        with self.assertRaises(ConfigError):
            Problem(system, zeros, zeros, 1.0, 2.0)

    def test_unstable_newmark_parameters(self):
        system = assemble(build_mesh(4), constant(1.0))
        zeros = np.zeros(system.mesh.n_active)
        with self.assertRaises(ConfigError) as ctx:
            Problem(system, zeros, zeros, 1.0, 0.1, beta=0.1, gamma=0.5)
        self.assertEqual(ctx.exception.field, "beta")

    def test_initial_data_shape(self):
        system = assemble(build_mesh(4), constant(1.0))
        with self.assertRaises(GridMismatchError):
            Problem(system, np.zeros(3), np.zeros(3), 1.0, 0.1)


class NewmarkTests(SimpleTestCase):
    def test_zero_data_gives_zero_trajectory(self):
        for alpha, theta in ((None, None), (0.5, 0.5), (0.3, 1.0)):
            problem = make_problem(alpha=alpha, theta=theta, amplitude=0.0)
            direct = solve_direct(problem)
            picard, _ = solve_picard(problem)
            for trajectory in (direct, picard):
                self.assertFalse(np.any(trajectory.u))
                self.assertFalse(np.any(trajectory.v))

    def test_energy_conservation_without_foundation(self):
        problem = make_problem(n_elems=2, horizon=2.0, steps=400)
        energies = energy_history(problem, solve_direct(problem))
        np.testing.assert_allclose(energies, energies[0], rtol=1e-10)

    def test_second_order_in_time(self):
        system = assemble(build_mesh(4), constant(1.0))
        shape = interpolate(system.mesh, bubble, bubble_slope)
        omega = 2.0 * math.pi

        def forcing(t):
            q, q2 = math.sin(omega * t), -omega * omega * math.sin(omega * t)
            return q2 * (system.M @ shape) + q * (system.K0 @ shape), 0.0

        errors = []
        for steps in (64, 128, 256):
            problem = Problem(system, 0.0 * shape, omega * shape, 1.0, 1.0 / steps, forcing=forcing)
            trajectory = solve_direct(problem)
            exact = np.sin(omega * trajectory.times)[:, None] * shape[None, :]
            errors.append(np.max(np.abs(trajectory.u - exact)))
        orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
        self.assertTrue(np.all(orders >= 1.8), msg=str(orders))

    def test_free_vibration_frequency(self):
        beta_1 = optimize.brentq(lambda b: math.cos(b) * math.cosh(b) - 1.0, 4.0, 5.0, xtol=1e-14)
        omega_1 = beta_1**2
        horizon = 10.0 * 2.0 * math.pi / omega_1
        problem = make_problem(n_elems=64, horizon=horizon, steps=4096, amplitude=0.01)
        trajectory = solve_direct(problem)
        measured = dominant_frequency(trajectory, problem.system.mesh.midpoint_dof())
        self.assertLess(abs(measured / omega_1 - 1.0), 0.01)

    def test_foundation_dissipates_energy(self):
        problem = make_problem(
            n_elems=8, horizon=20.0, steps=1024, alpha=0.5, theta=0.5, stiffness=1e-3
        )
        trajectory = solve_direct(problem)
        start = mechanical_energy(problem, trajectory.u[0], trajectory.v[0])
        end = mechanical_energy(problem, trajectory.u[-1], trajectory.v[-1])
        self.assertLess(end, start)

    def test_unit_theta_is_elastic_foundation(self):
        viscous = make_problem(alpha=0.5, theta=1.0)
        elastic_system = dataclasses.replace(
            viscous.system, K0=viscous.system.K0 + viscous.system.H_gram
        )
        elastic = Problem(
            elastic_system, viscous.u0, viscous.v0, viscous.horizon, viscous.dt
        )
        reference = solve_direct(elastic).u
        np.testing.assert_allclose(
            solve_direct(viscous).u, reference, rtol=1e-10, atol=1e-11 * np.abs(reference).max()
        )

    def test_theta_limit(self):
        near = make_problem(alpha=0.5, theta=0.999)
        limit = make_problem(alpha=0.5, theta=1.0)
        distance = trajectory_distance(near, solve_direct(near), solve_direct(limit))
        reference = solve_direct(limit)
        size = e_norm(limit.system.V_gram, reference.u, reference.times)
        self.assertLess(distance, 1e-2 * size)

    def test_causality(self):
        system = assemble(build_mesh(8), constant(1.0))
        shape = interpolate(system.mesh, bubble, bubble_slope)
        zeros = np.zeros_like(shape)
        kernel = build_kernel(0.5, 0.5, 0.5, 0.5 / 128)

        def full(t):
            return math.sin(5.0 * t) * (system.M @ shape), 0.0

        def truncated(t):
            return full(t) if t <= 0.25 else (zeros, 0.0)

        first = solve_direct(Problem(system, zeros, zeros, 0.5, 0.5 / 128, kernel, full))
        second = solve_direct(Problem(system, zeros, zeros, 0.5, 0.5 / 128, kernel, truncated))
        cut = int(np.searchsorted(first.times, 0.25, side="right"))
        np.testing.assert_array_equal(first.u[:cut], second.u[:cut])
        self.assertGreater(np.abs(first.u[-1] - second.u[-1]).max(), 0.0)

    def test_scaling_and_linearity(self):
        problem = make_problem(alpha=0.6, theta=0.5, velocity=0.3)
        base = solve_direct(problem)
        scaled = solve_direct(problem.scaled(3.7))
        scale = np.abs(scaled.u).max()
        np.testing.assert_allclose(scaled.u, 3.7 * base.u, rtol=1e-12, atol=1e-12 * scale)

        other = make_problem(alpha=0.6, theta=0.5, amplitude=0.0, velocity=1.0)
        combined = Problem(
            problem.system,
            problem.u0 + other.u0,
            problem.v0 + other.v0,
            problem.horizon,
            problem.dt,
            problem.kernel,
        )
        expected = base.u + solve_direct(other).u
        np.testing.assert_allclose(
            solve_direct(combined).u, expected, rtol=1e-11, atol=1e-11 * np.abs(expected).max()
        )

    def test_moving_load(self):
        material = BeamMaterial(H0=1.0, speed=1.0)
        system = assemble(build_mesh(16), constant(1.0))
        load = make_load(material, MollifierSpec("power", exponent=0.5), 2.0**-8)
        zeros = np.zeros(system.mesh.n_active)
        problem = Problem(system, zeros, zeros, 0.5, 0.5 / 128, forcing=LoadForcing(system, load))
        trajectory = solve_direct(problem)
        self.assertGreater(np.abs(trajectory.u[-1]).max(), 0.0)
        self.assertTrue(np.all(trajectory.load_norms > 0.0))

    def test_trajectory_export(self):
        problem = make_problem(n_elems=4, steps=16)
        trajectory = solve_direct(problem)
        with tempfile.TemporaryDirectory() as tmp:
            path = trajectory.to_csv(Path(tmp) / "trajectory.csv", stride=4)
            with path.open() as handle:
                rows = list(csv.reader(handle))
        self.assertEqual(rows[0], ["t"] + [f"u{i}" for i in range(problem.system.mesh.n_active)])
        self.assertEqual(len(rows), 1 + 5)

    def test_dominant_frequency_rejects_unknown_dof(self):
        trajectory = solve_direct(make_problem(n_elems=4, steps=16))
        with self.assertRaises(GridMismatchError):
            dominant_frequency(trajectory, 99)


class PicardTests(SimpleTestCase):
    def test_zero_kernel_converges_in_one_iteration(self):
        problem = make_problem(alpha=0.5, theta=1.0)
        trajectory, diagnostics = solve_picard(problem)
        self.assertTrue(diagnostics.converged)
        self.assertEqual(diagnostics.iterations, [1])
        np.testing.assert_array_equal(trajectory.u, solve_direct(problem).u)

    def test_matches_direct_solution(self):
        tol = 1e-8
        problem = make_problem(alpha=0.6, theta=0.5, horizon=0.5, steps=128)
        picard, diagnostics = solve_picard(problem, tol=tol)
        direct = solve_direct(problem)
        distance = trajectory_distance(problem, picard, direct)
        self.assertTrue(diagnostics.converged)
        self.assertLess(distance, 1e-6)
        size = e_norm(problem.system.V_gram, direct.u, direct.times)
        self.assertLess(distance, 10.0 * tol * size)

    def test_restart_plan_reproduces_direct_solution(self):
        problem = make_problem(alpha=0.5, theta=0.5, horizon=1.0, steps=128)
        plan = restart_horizon(lambda t: 4.0 * math.sqrt(t), problem.horizon, problem.dt)
        self.assertTrue(plan.restarted)
        picard, diagnostics = solve_picard(problem, tol=1e-10, plan=plan)
        self.assertEqual(len(diagnostics.iterates), len(plan.segments))
        distance = trajectory_distance(problem, picard, solve_direct(problem))
        self.assertLess(distance, 1e-7)

    def test_non_convergence_is_reported(self):
        problem = make_problem(alpha=0.5, theta=0.25, horizon=1.0, steps=64)
        with self.assertRaises(PicardNonConvergence) as ctx:
            solve_picard(problem, tol=1e-12, max_iter=2)
        self.assertFalse(ctx.exception.diagnostics.converged)
        self.assertEqual(ctx.exception.diagnostics.iterations, [2])


class RestartHorizonTests(SimpleTestCase):
    def test_single_segment(self):
        plan = restart_horizon(lambda t: 0.1 * t, 1.0, 0.01)
        self.assertEqual(plan.segments, ((0, 100),))
        self.assertFalse(plan.restarted)

    def test_explicit_formula(self):
        def gamma(t):
            return 2.0 * math.sqrt(t) * math.exp(2.0 * t)

        expected = optimize.brentq(lambda t: gamma(t) - 0.9, 1e-12, 1.0)
        plan = restart_horizon(gamma, 1.0, 1e-4)
        self.assertLess(abs(plan.T1 - expected), 1e-4)
        self.assertLess(plan.gamma_T1, 0.9)
        self.assertEqual(plan.segments[0][0], 0)
        self.assertEqual(plan.segments[-1][1], 10000)
        for (_, stop), (start, _) in zip(plan.segments[:-1], plan.segments[1:]):
            self.assertEqual(stop, start)

    def test_segment_shorter_than_two_steps(self):
        with self.assertRaises(ConfigError):
            restart_horizon(lambda t: 100.0 * math.sqrt(t), 1.0, 0.01)

    def test_last_segment_gets_two_steps(self):
        plan = restart_horizon(lambda t: 0.9 * t / 0.305, 0.91, 0.01)
        self.assertEqual(plan.segments, ((0, 30), (30, 60), (60, 89), (89, 91)))
        self.assertAlmostEqual(plan.T1, 0.3, places=12)
        self.assertLess(plan.gamma_T1, 0.9)

    def test_last_step_merged_when_chunk_is_two(self):
        plan = restart_horizon(lambda t: 0.9 * t / 0.025, 0.05, 0.01)
        self.assertEqual(plan.segments, ((0, 2), (2, 5)))
        self.assertAlmostEqual(plan.T1, 0.03, places=12)
        self.assertTrue(all(stop - start >= 2 for start, stop in plan.segments))
