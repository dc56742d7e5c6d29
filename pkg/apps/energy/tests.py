import csv
import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from apps.beam.assembly import assemble
from apps.beam.coercivity import CoercivityConstants, coercivity_constants
from apps.beam.mesh import build_mesh, interpolate
from apps.dynamics.problem import Problem, Trajectory
from apps.dynamics.solvers import restart_horizon, solve_direct, solve_picard
from apps.kernels.kernel import build_kernel, kernel_constants
from apps.services.exceptions import ConstantsError, ProbeError

from .ledger import (
    EnergyLedger,
    check_inequality,
    constants,
    contraction_factor,
    operator_bound,
)
from .sweep import SweepMember, sweep_verdict


def coercivity(mu=1.0, lam=0.0, C0=1.0, C0p=0.0, C1=0.0):
    return CoercivityConstants(mu=mu, lam=lam, C0=C0, C0p=C0p, C1=C1, c0=1.0, c1=C0, C_half=0.0)


def make_problem(alpha=0.5, theta=0.5, horizon=0.5, steps=128, amplitude=1.0, density=None):
    system = assemble(build_mesh(8), lambda x: np.ones_like(x), density=density)
    shape = interpolate(
        system.mesh,
        lambda x: x**2 * (1.0 - x) ** 2,
        lambda x: 2.0 * x * (1.0 - x) * (1.0 - 2.0 * x),
    )
    dt = horizon / steps
    kernel = build_kernel(alpha, theta, horizon, dt) if alpha is not None else None
    return Problem(system, amplitude * shape, np.zeros_like(shape), horizon, dt, kernel)


def ledger_for(problem, trajectory=None, density_floor=1.0):
    values = coercivity_constants(problem.system, 1.0, 1.0, 0.0)
    energy = constants(values, operator_bound(problem.kernel), problem.horizon, density_floor)
    if trajectory is None:
        ledger = EnergyLedger(problem.system, energy, problem.u0, problem.v0)
        solve_direct(problem, ledger=ledger)
        return ledger
    return EnergyLedger.from_trajectory(problem.system, energy, problem.u0, problem.v0, trajectory)


class ConstantsTests(SimpleTestCase):
    def test_direct_substitution(self):
        values = constants(coercivity(), 1.0, 1.0)
        self.assertEqual(values.nu, 1.0)
        self.assertEqual(values.D_T, 1.0)
        self.assertEqual(values.F_T, 2.0)
        self.assertAlmostEqual(values.gamma_T, math.e, places=14)

    def test_small_mu_halves_nu(self):
        base = constants(coercivity(mu=1.0, C0=3.0), 1.0, 1.0)
        half = constants(coercivity(mu=0.5, C0=3.0), 1.0, 1.0)
        self.assertEqual(half.nu, 0.5)
        self.assertEqual(half.D_T, 2.0 * base.D_T)

    def test_constants_are_pure(self):
        args = (coercivity(mu=0.3, lam=0.2, C1=1.5), 2.7, 0.8)
        self.assertEqual(constants(*args), constants(*args))

    def test_overflow_is_reported_as_infinite_gamma(self):
        values = constants(coercivity(mu=1e-3, C1=10.0), 2.0, 10.0)
        self.assertEqual(values.gamma_T, math.inf)
        self.assertTrue(math.isfinite(values.log_gamma_T))

    def test_invalid_mu(self):
        with self.assertRaises(ConstantsError):
            constants(coercivity(mu=0.0), 1.0, 1.0)

    def test_density_floor_scales_rate(self):
        base = constants(coercivity(), 1.0, 1.0)
        light = constants(coercivity(), 1.0, 1.0, density_floor=0.25)
        heavy = constants(coercivity(), 1.0, 1.0, density_floor=4.0)
        self.assertEqual(light.rho, 4.0)
        self.assertEqual(light.F_T, 4.0 * base.F_T)
        self.assertEqual(light.D_T, base.D_T)
        self.assertEqual(heavy, base)
        with self.assertRaises(ConstantsError):
            constants(coercivity(), 1.0, 1.0, density_floor=0.0)

    def test_operator_bound(self):
        self.assertEqual(operator_bound(None), 0.0)
        self.assertEqual(operator_bound(build_kernel(0.5, 1.0, 1.0, 1.0 / 32)), 1.0)
        kernel = build_kernel(0.5, 0.5, 1.0, 1.0 / 32)
        self.assertEqual(operator_bound(kernel), kernel_constants(kernel).young)

    def test_contraction_factor(self):
        gamma = contraction_factor(coercivity(), 1.0)
        self.assertEqual(gamma(0.0), 0.0)
        self.assertAlmostEqual(gamma(1.0), math.e, places=14)


class InequalityTests(SimpleTestCase):
    def test_zero_data(self):
        ledger = ledger_for(make_problem(amplitude=0.0))
        verdict = check_inequality(ledger)
        self.assertTrue(verdict.holds)
        self.assertFalse(np.any(ledger.measured))

    def test_bubble_with_foundation(self):
        ledger = ledger_for(make_problem())
        verdict = check_inequality(ledger)
        self.assertTrue(verdict.holds)
        self.assertGreater(verdict.worst_margin, 0.0)

    def test_bound_is_non_decreasing(self):
        ledger = ledger_for(make_problem())
        self.assertTrue(np.all(np.diff(ledger.log_bound) >= 0.0))

    def test_corrupted_trajectory_fails(self):
        problem = make_problem()
        trajectory = solve_direct(problem)
        corrupted = Trajectory(
            trajectory.times, 1e6 * trajectory.u, trajectory.v, trajectory.a, trajectory.load_norms
        )
        self.assertFalse(check_inequality(ledger_for(problem, corrupted)).holds)

    def test_per_step_and_post_hoc_ledgers_agree(self):
        problem = make_problem()
        live = ledger_for(problem)
        post = ledger_for(problem, solve_direct(problem))
        np.testing.assert_allclose(live.measured, post.measured, rtol=1e-14)
        np.testing.assert_array_equal(live.log_bound, post.log_bound)

    def test_margin_is_stable_under_refinement(self):
        coarse = check_inequality(ledger_for(make_problem(steps=64)))
        fine = check_inequality(ledger_for(make_problem(steps=128)))
        self.assertLess(abs(coarse.worst_margin - fine.worst_margin), fine.worst_margin)

    def test_ledger_export(self):
        ledger = ledger_for(make_problem(steps=32))
        with tempfile.TemporaryDirectory() as tmp:
            path = ledger.to_csv(Path(tmp) / "ledger.csv")
            with path.open() as handle:
                rows = list(csv.reader(handle))
        self.assertEqual(rows[0], ["t", "normV_u", "normH_v", "bound", "margin"])
        self.assertEqual(len(rows), 34)


class DensityLedgerTests(SimpleTestCase):
    def light(self, x):
        return np.full_like(np.asarray(x, dtype=float), 0.01)

    def test_light_beam_without_foundation_holds(self):
        problem = make_problem(alpha=None, density=self.light)
        ledger = ledger_for(problem, density_floor=0.01)
        verdict = check_inequality(ledger)
        self.assertTrue(verdict.holds)
        self.assertGreater(verdict.worst_margin, 0.0)
        self.assertAlmostEqual(ledger.energy.rho, 100.0, places=10)

    def test_velocity_is_measured_with_density(self):
        problem = make_problem(alpha=None, density=self.light)
        trajectory = solve_direct(problem)
        ledger = ledger_for(problem, trajectory, density_floor=0.01)
        v = trajectory.v[-1]
        expected = math.sqrt(v @ problem.system.M @ v)
        self.assertAlmostEqual(ledger.norm_h[-1], expected, delta=1e-12 * expected)


class PicardContractionTests(SimpleTestCase):
    def test_observed_ratios_below_predicted_factor(self):
        problem = make_problem(alpha=0.5, theta=0.5, horizon=0.5, steps=256)
        values = coercivity_constants(problem.system, 1.0, 1.0, 0.0)
        plan = restart_horizon(
            contraction_factor(values, operator_bound(problem.kernel)), problem.horizon, problem.dt
        )
        self.assertLessEqual(plan.gamma_T1, 0.9)
        _, diagnostics = solve_picard(problem, tol=1e-8, plan=plan)
        for ratios in diagnostics.ratios:
            self.assertTrue(all(ratio <= plan.gamma_T1 for ratio in ratios), msg=str(ratios))


def synthetic_members(exponent, measured_power=0.3):
    eps = [2.0**-k for k in range(3, 13)]
    return [
        SweepMember(
            eps=e,
            measured_norm=e**-measured_power,
            log_bound=exponent(e) + 2.0 * measured_power * math.log(1.0 / e) + 1.0,
            exponent=exponent(e),
        )
        for e in eps
    ]


class SweepTests(SimpleTestCase):
    def test_eps_independent_data(self):
        members = synthetic_members(lambda e: 3.0, measured_power=0.0)
        report = sweep_verdict(members)
        self.assertEqual(report.fitted_power, 0.0)
        self.assertTrue(report.holds)

    def test_log_type_growth(self):
        report = sweep_verdict(synthetic_members(lambda e: 2.0 + 0.5 * math.log(1.0 / e)))
        self.assertAlmostEqual(report.fitted_power, 0.3, places=10)
        self.assertAlmostEqual(report.bound_power, 0.5, places=10)
        self.assertFalse(report.super_polynomial)
        self.assertTrue(report.holds)

    def test_power_scaled_growth_is_flagged(self):
        report = sweep_verdict(synthetic_members(lambda e: 0.1 / e))
        self.assertTrue(report.super_polynomial)
        self.assertFalse(report.holds)

    def test_unbracketed_measurement(self):
        members = synthetic_members(lambda e: 1.0)
        members[0] = SweepMember(members[0].eps, 1e9, members[0].log_bound, members[0].exponent)
        self.assertFalse(sweep_verdict(members).bracketed)

    def test_non_finite_norm(self):
        members = synthetic_members(lambda e: 1.0)
        members[4] = SweepMember(members[4].eps, math.inf, 0.0, 1.0)
        with self.assertRaises(ProbeError) as ctx:
            sweep_verdict(members)
        self.assertEqual(ctx.exception.eps, members[4].eps)

    def test_too_few_members(self):
        with self.assertRaises(ProbeError):
            sweep_verdict(synthetic_members(lambda e: 1.0)[:2])

    def test_report_export(self):
        report = sweep_verdict(synthetic_members(lambda e: 1.0))
        with tempfile.TemporaryDirectory() as tmp:
            path = report.to_csv(Path(tmp) / "report.csv")
            with path.open() as handle:
                rows = list(csv.reader(handle))
        self.assertEqual(rows[0], ["eps", "measured_norm", "log_bound", "fitted_power"])
        self.assertEqual(len(rows), 11)
        self.assertEqual(float(rows[1][0]), 0.125)
