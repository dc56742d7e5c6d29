import csv
import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from scipy import integrate

from apps.kernels.mollifiers import MollifierSpec, bump_l2_norm, bump_max
from apps.services.exceptions import ConfigError, ProbeError

from .asymptotics import MODERATE, NEGLIGIBLE, log_type_certificate, probe_asymptotics
from .fields import (
    AXIAL_SPEC,
    LOAD_SPEC,
    STIFFNESS_SPEC,
    BeamMaterial,
    axial_snapshot,
    make_axial,
    make_density,
    make_family,
    make_load,
    make_stiffness,
    stiffness_snapshot,
    weak_association,
)

EPS_GRID = np.array([2.0**-k for k in range(3, 13)])


class MaterialTests(SimpleTestCase):
    def test_defaults_are_valid(self):
        material = BeamMaterial()
        self.assertEqual(material.stiffness_bounds, (1.0, 1.0))

    def test_jump_location_outside_beam(self):
        with self.assertRaises(ConfigError) as ctx:
            BeamMaterial(x0=1.2)
        self.assertEqual(ctx.exception.field, "x0")

    def test_negative_total_stiffness(self):
        with self.assertRaises(ConfigError):
            BeamMaterial(EI1=1.0, EI2=-2.0)

    def test_impulse_time_outside_horizon(self):
        with self.assertRaises(ConfigError) as ctx:
            BeamMaterial(t1=2.0).check_horizon(1.0)
        self.assertEqual(ctx.exception.field, "t1")


class StiffnessTests(SimpleTestCase):
    material = BeamMaterial(EI1=1.0, EI2=3.0, x0=0.4)

    def test_no_jump_gives_constant(self):
        material = BeamMaterial(EI1=2.5, EI2=0.0)
        x = np.linspace(0.0, 1.0, 101)
        for eps in EPS_GRID:
            np.testing.assert_array_equal(make_stiffness(material, STIFFNESS_SPEC, eps)(x), 2.5)

    def test_values_outside_mollifier_support(self):
        for eps in (2.0**-4, 2.0**-10):
            field = make_stiffness(self.material, STIFFNESS_SPEC, eps)
            width = STIFFNESS_SPEC.half_width(eps)
            self.assertEqual(field(self.material.x0 - 2.0 * width), 1.0)
            self.assertEqual(field(self.material.x0 + 2.0 * width), 4.0)

    def test_midpoint_value(self):
        field = make_stiffness(self.material, STIFFNESS_SPEC, 0.01)
        self.assertEqual(field(self.material.x0), 2.5)

    def test_uniform_bounds_and_monotonicity(self):
        x = np.linspace(0.0, 1.0, 2001)
        c0, c1 = self.material.stiffness_bounds
        for eps in EPS_GRID:
            values = make_stiffness(self.material, STIFFNESS_SPEC, eps)(x)
            self.assertTrue(np.all(values >= c0) and np.all(values <= c1))
            self.assertTrue(np.all(np.diff(values) >= -1e-12))

    def test_boundary_smearing_warning(self):
        material = BeamMaterial(EI1=1.0, EI2=1.0, x0=0.05)
        with self.assertLogs("apps.coefficients.fields", level="WARNING"):
            make_stiffness(material, STIFFNESS_SPEC, 0.5)

    def test_weak_association(self):
        gaps = weak_association(
            self.material, STIFFNESS_SPEC, [2.0**-k for k in range(4, 11)], lambda x: x
        )
        self.assertTrue(np.all(np.diff(np.abs(gaps)) < 0.0))
        self.assertLess(abs(gaps[-1]), 1e-3)


class AxialTests(SimpleTestCase):
    def test_constant_force(self):
        material = BeamMaterial(P0=0.7, P1=0.0)
        x = np.linspace(0.0, 1.0, 11)
        for eps in EPS_GRID:
            field = make_axial(material, AXIAL_SPEC, eps)
            np.testing.assert_array_equal(field(x, 0.5), 0.7)
            self.assertEqual(field.sup_norm, 0.7)

    def test_pulse_normalization(self):
        material = BeamMaterial(P1=1.0, t1=0.5)
        for eps in (2.0**-3, 2.0**-8, 2.0**-12):
            field = make_axial(material, AXIAL_SPEC, eps)
            width = AXIAL_SPEC.half_width(eps)
            mass, _ = integrate.quad(
                lambda t: float(field.pulse(t)),
                0.5 - width,
                0.5 + width,
                epsabs=1e-14,
                epsrel=1e-12,
            )
            self.assertLess(abs(mass - 1.0), 1e-10)

    def test_sup_norm_is_attained(self):
        material = BeamMaterial(P0=0.5, P1=2.0, t1=0.5)
        field = make_axial(material, AXIAL_SPEC, 2.0**-6)
        self.assertAlmostEqual(float(field(np.array([0.3]), 0.5)[0]), field.sup_norm, places=12)

    def test_log_type_certificate(self):
        material = BeamMaterial(P0=0.5, P1=2.0)
        certificate = log_type_certificate(material, AXIAL_SPEC, EPS_GRID)
        self.assertTrue(certificate.holds)
        self.assertGreaterEqual(certificate.rvalue, 0.999)
        self.assertAlmostEqual(certificate.slope, 2.0 * bump_max(), places=9)

    def test_power_rule_is_not_log_type(self):
        material = BeamMaterial(P1=1.0)
        certificate = log_type_certificate(material, MollifierSpec("power"), EPS_GRID)
        self.assertFalse(certificate.holds)

    def test_density_composition(self):
        material = BeamMaterial(P0=0.0, P1=1.0, t1=0.5, density_enabled=True, R0=2.0)
        density = make_density(material, STIFFNESS_SPEC, 0.01)
        field = make_axial(material, AXIAL_SPEC, 0.01, density)
        expected = AXIAL_SPEC.rho(2.0 * 0.25 - 0.5, 0.01)
        self.assertAlmostEqual(float(field(np.array([0.2]), 0.25)[0]), float(expected))

    def test_density_ignored_when_disabled(self):
        material = BeamMaterial()
        density = make_density(material, STIFFNESS_SPEC, 0.01)
        np.testing.assert_array_equal(density(np.linspace(0.0, 1.0, 5)), 1.0)
        self.assertIsNone(make_axial(material, AXIAL_SPEC, 0.01, density).density)


class LoadTests(SimpleTestCase):
    def test_zero_load(self):
        field = make_load(BeamMaterial(H0=0.0), LOAD_SPEC, 0.01)
        np.testing.assert_array_equal(field(np.linspace(0.0, 1.0, 9), 0.3), 0.0)

    def test_mass_while_interior(self):
        material = BeamMaterial(H0=1.5, speed=2.0)
        field = make_load(material, LOAD_SPEC, 2.0**-8)
        for t in (0.1, 0.25, 0.4):
            centre = material.speed * t
            width = LOAD_SPEC.half_width(2.0**-8)
            mass, _ = integrate.quad(
                lambda x: float(field(x, t)), centre - width, centre + width, epsrel=1e-12
            )
            self.assertAlmostEqual(mass, 1.5, places=9)

    def test_moderate_l2_growth(self):
        material = BeamMaterial(H0=1.0, speed=1.0)
        probe = probe_asymptotics(
            lambda eps: (lambda x: make_load(material, LOAD_SPEC, eps)(x, 0.5)), EPS_GRID
        )
        self.assertEqual(probe.classification, MODERATE)
        self.assertAlmostEqual(probe.fitted_rate, 0.25, places=2)


class ProbeTests(SimpleTestCase):
    def test_constant_family(self):
        probe = probe_asymptotics(lambda eps: (lambda x: np.ones_like(x)), EPS_GRID)
        self.assertEqual(probe.fitted_rate, 0.0)
        self.assertEqual(probe.classification, MODERATE)

    def test_scaled_family_is_negligible(self):
        probe = probe_asymptotics(
            lambda eps: (lambda x: eps * np.sin(np.pi * x)), EPS_GRID, orders=(0, 1, 2)
        )
        for order in (0, 1, 2):
            self.assertAlmostEqual(probe.rates[order], -1.0, places=8)
        self.assertEqual(probe.classification, NEGLIGIBLE)

    def test_mollified_dirac(self):
        spec = MollifierSpec("power", exponent=1.0)
        eps_grid = np.array([2.0**-k for k in range(3, 11)])
        probe = probe_asymptotics(
            lambda eps: (lambda x: spec.rho(x - 0.5, eps)), eps_grid, points=65537
        )
        self.assertAlmostEqual(probe.fitted_rate, 0.5, places=3)
        expected = math.sqrt(spec.gamma(eps_grid[-1])) * bump_l2_norm()
        self.assertAlmostEqual(probe.norms[0][-1] / expected, 1.0, places=4)

    def test_zero_family(self):
        probe = probe_asymptotics(lambda eps: (lambda x: np.zeros_like(x)), EPS_GRID)
        self.assertEqual(probe.fitted_rate, -math.inf)
        self.assertEqual(probe.classification, NEGLIGIBLE)

    def test_short_grid(self):
        with self.assertRaises(ProbeError):
            probe_asymptotics(lambda eps: np.sin, EPS_GRID[:3])

    def test_narrow_grid(self):
        with self.assertRaises(ProbeError):
            probe_asymptotics(lambda eps: np.sin, [0.1, 0.09, 0.08, 0.07])

    def test_increasing_grid(self):
        with self.assertRaises(ProbeError):
            probe_asymptotics(lambda eps: np.sin, EPS_GRID[::-1])

    def test_non_finite_norm(self):
        with self.assertRaises(ProbeError) as ctx:
            probe_asymptotics(
                lambda eps: (lambda x: np.full_like(x, np.inf if eps < 0.01 else 1.0)), EPS_GRID
            )
        self.assertLess(ctx.exception.eps, 0.01)


class FamilyTests(SimpleTestCase):
    def test_family_constants(self):
        material = BeamMaterial(EI1=2.0, EI2=-1.0, P0=0.2, P1=1.0)
        family = make_family(material, 2.0**-5)
        self.assertEqual((family.c0, family.c1), (1.0, 2.0))
        self.assertAlmostEqual(family.b_inf, 0.2 + math.log(2.0**5) * bump_max())

    def test_snapshots(self):
        family = make_family(BeamMaterial(EI2=1.0, P1=1.0), 0.01)
        with tempfile.TemporaryDirectory() as tmp:
            path = stiffness_snapshot(family, points=33).to_csv(Path(tmp) / "c.csv")
            with path.open() as handle:
                rows = list(csv.reader(handle))
            self.assertEqual(rows[0], ["x", "c_eps"])
            self.assertEqual(len(rows), 34)
            path = axial_snapshot(family, 1.0, points=17).to_csv(Path(tmp) / "b.csv", stride=4)
            with path.open() as handle:
                rows = list(csv.reader(handle))
            self.assertEqual(rows[0], ["t", "b_eps_at_x"])
            self.assertEqual(len(rows), 6)
