import csv
import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from scipy import optimize

from apps.coefficients.fields import STIFFNESS_SPEC, BeamMaterial, make_axial, make_stiffness
from apps.kernels.mollifiers import MollifierSpec
from apps.services.exceptions import AssemblyError, GridMismatchError, MeshError

from .assembly import (
    MatrixSnapshot,
    assemble,
    discrete_norms,
    energy_norms,
    element_quadrature,
    first_eigenfrequency,
    load_vector,
    quadrature_levels,
)
from .coercivity import coercivity_constants, garding_margin
from .mesh import build_mesh, evaluate, interpolate


def constant(value):
    return lambda x: np.full_like(np.asarray(x, dtype=float), value)


def bubble(x):
    return x**2 * (1.0 - x) ** 2


def bubble_slope(x):
    return 2.0 * x * (1.0 - x) * (1.0 - 2.0 * x)


def clamped_root():
    """
    Первый корень cos β·cosh β = 1
    """
    return optimize.brentq(lambda b: math.cos(b) * math.cosh(b) - 1.0, 4.0, 5.0, xtol=1e-14)


class MeshTests(SimpleTestCase):
    def test_dof_counts(self):
        mesh = build_mesh(2)
        self.assertEqual(mesh.n_raw, 6)
        self.assertEqual(mesh.n_active, 2)
        self.assertEqual(build_mesh(100).n_active, 198)

    def test_single_element_rejected(self):
        with self.assertRaises(MeshError):
            build_mesh(1)

    def test_boundary_conditions_hold_exactly(self):
        mesh = build_mesh(8)
        dofs = np.random.default_rng(1).normal(size=mesh.n_active)
        ends = np.array([0.0, 1.0])
        np.testing.assert_array_equal(evaluate(mesh, dofs, ends), 0.0)
        np.testing.assert_array_equal(evaluate(mesh, dofs, ends, derivative=1), 0.0)

    def test_interpolant_reproduces_nodal_values(self):
        mesh = build_mesh(10)
        dofs = interpolate(mesh, bubble, bubble_slope)
        np.testing.assert_allclose(evaluate(mesh, dofs, mesh.nodes), bubble(mesh.nodes), atol=1e-14)

    def test_midpoint_dof(self):
        mesh = build_mesh(4)
        dofs = interpolate(mesh, bubble, bubble_slope)
        self.assertEqual(dofs[mesh.midpoint_dof()], bubble(0.5))

    def test_expand_shape_mismatch(self):
        with self.assertRaises(GridMismatchError):
            build_mesh(4).expand(np.zeros(3))


class ElementMatrixTests(SimpleTestCase):
    def setUp(self):
        self.mesh = build_mesh(4)
        self.h = self.mesh.h
        self.quad = element_quadrature(self.mesh)

    def test_bending_matrix(self):
        h, c = self.h, 2.5
        block = np.einsum("q,qi,qj->ij", c * self.quad.w[0], self.quad.second, self.quad.second)
        expected = (c / h**3) * np.array(
            [
                [12.0, 6.0 * h, -12.0, 6.0 * h],
                [6.0 * h, 4.0 * h**2, -6.0 * h, 2.0 * h**2],
                [-12.0, -6.0 * h, 12.0, -6.0 * h],
                [6.0 * h, 2.0 * h**2, -6.0 * h, 4.0 * h**2],
            ]
        )
        np.testing.assert_allclose(block, expected, rtol=1e-12, atol=1e-10)

    def test_mass_matrix(self):
        h = self.h
        block = np.einsum("q,qi,qj->ij", self.quad.w[0], self.quad.values, self.quad.values)
        expected = (h / 420.0) * np.array(
            [
                [156.0, 22.0 * h, 54.0, -13.0 * h],
                [22.0 * h, 4.0 * h**2, 13.0 * h, -3.0 * h**2],
                [54.0, 13.0 * h, 156.0, -22.0 * h],
                [-13.0 * h, -3.0 * h**2, -22.0 * h, 4.0 * h**2],
            ]
        )
        np.testing.assert_allclose(block, expected, rtol=1e-12, atol=1e-13 * np.abs(expected).max())


class AssemblyTests(SimpleTestCase):
    def test_stiffness_is_linear_in_coefficient(self):
        mesh = build_mesh(6)
        single = assemble(mesh, constant(1.0))
        double = assemble(mesh, constant(2.0))
        np.testing.assert_array_equal(double.K0, 2.0 * single.K0)

    def test_symmetry(self):
        material = BeamMaterial(EI1=1.0, EI2=2.0, x0=0.37)
        system = assemble(build_mesh(16), make_stiffness(material, STIFFNESS_SPEC, 0.01))
        for matrix in (system.K0, system.M, system.V_gram, system.H_gram):
            np.testing.assert_allclose(matrix, matrix.T, rtol=1e-13, atol=1e-13 * np.abs(matrix).max())

    def test_non_finite_sampler(self):
        with self.assertRaises(AssemblyError):
            assemble(build_mesh(4), constant(np.nan))

    def test_quadrature_levels(self):
        self.assertEqual(quadrature_levels(0.1, None), 1)
        self.assertEqual(quadrature_levels(0.1, 0.2), 1)
        self.assertEqual(quadrature_levels(0.1, 0.07), 2)
        self.assertEqual(quadrature_levels(0.1, 0.01), 4)

    def test_subdivided_quadrature_is_exact_for_constants(self):
        mesh = build_mesh(8)
        narrow = make_stiffness(BeamMaterial(EI1=1.5), MollifierSpec("power", exponent=1.0), 1e-3)
        reference = assemble(mesh, constant(1.5)).K0
        scale = np.abs(reference).max()
        np.testing.assert_allclose(assemble(mesh, narrow).K0, reference, rtol=1e-12, atol=1e-12 * scale)

    def test_axial_operator_reassembly(self):
        mesh = build_mesh(8)
        material = BeamMaterial(P0=0.3, P1=1.0, t1=0.5)
        axial = make_axial(material, MollifierSpec("log"), 2.0**-6)
        system = assemble(mesh, constant(1.0), axial=axial, t=0.0)
        quiet = assemble(mesh, constant(1.0), axial=make_axial(BeamMaterial(P0=0.3), MollifierSpec("log"), 0.5))
        np.testing.assert_allclose(system.K1, quiet.K1, rtol=1e-14)
        buffer = np.empty_like(system.K1)
        system.axial_operator(0.5, out=buffer)
        self.assertGreater(np.abs(buffer - system.K1).max(), 0.0)

    def test_matrix_export(self):
        system = assemble(build_mesh(4), constant(1.0))
        with tempfile.TemporaryDirectory() as tmp:
            path = MatrixSnapshot(system.K0).to_csv(Path(tmp) / "K0.csv")
            with path.open() as handle:
                rows = list(csv.reader(handle))
        self.assertEqual(rows[0], ["row", "col", "value"])
        self.assertEqual(len(rows) - 1, np.count_nonzero(system.K0))


class LoadTests(SimpleTestCase):
    def test_uniform_load(self):
        mesh = build_mesh(8)
        system = assemble(mesh, constant(1.0))
        forces, norm2 = load_vector(system, lambda x, t: np.ones_like(x), 0.0)
        raw = mesh.expand(forces)
        np.testing.assert_allclose(raw[mesh.dof_map[1:-1, 0]], mesh.h, rtol=1e-13)
        np.testing.assert_allclose(raw[mesh.dof_map[1:-1, 1]], 0.0, atol=1e-15)
        self.assertAlmostEqual(norm2, 1.0, places=13)


class NormTests(SimpleTestCase):
    def test_zero_vector(self):
        system = assemble(build_mesh(8), constant(1.0))
        zero = np.zeros(system.mesh.n_active)
        self.assertEqual(discrete_norms(system, zero, zero), (0.0, 0.0))

    def test_bubble_norm(self):
        for n_elems in (4, 8, 16):
            system = assemble(build_mesh(n_elems), constant(1.0))
            dofs = interpolate(system.mesh, bubble, bubble_slope)
            _, norm_h = discrete_norms(system, dofs, dofs)
            self.assertLess(abs(norm_h**2 * 630.0 - 1.0), 1e-2)

    def test_interpolation_convergence(self):
        errors = []
        x = np.linspace(0.0, 1.0, 4001)
        profile = lambda s: np.sin(np.pi * s) ** 2
        slope = lambda s: np.pi * np.sin(2.0 * np.pi * s)
        for n_elems in (4, 8, 16):
            mesh = build_mesh(n_elems)
            dofs = interpolate(mesh, profile, slope)
            errors.append(np.sqrt(np.mean((evaluate(mesh, dofs, x) - profile(x)) ** 2)))
        orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
        self.assertTrue(np.all(orders >= 2.0))

    def test_h_norm_below_v_norm(self):
        system = assemble(build_mesh(8), constant(1.0))
        rng = np.random.default_rng(5)
        for _ in range(20):
            u = rng.normal(size=system.mesh.n_active)
            norm_v, norm_h = discrete_norms(system, u, u)
            self.assertLessEqual(norm_h, norm_v)

    def test_velocity_uses_density_mass(self):
        mesh = build_mesh(8)
        light = assemble(mesh, constant(1.0), density=constant(0.25))
        unit = assemble(mesh, constant(1.0))
        dofs = interpolate(mesh, bubble, bubble_slope)
        norm_v, norm_r = energy_norms(light, dofs, dofs)
        _, norm_h = discrete_norms(light, dofs, dofs)
        self.assertEqual(norm_v, discrete_norms(unit, dofs, dofs)[0])
        self.assertAlmostEqual(norm_r, 0.5 * norm_h, delta=1e-12 * norm_h)
        self.assertEqual(energy_norms(unit, dofs, dofs), discrete_norms(unit, dofs, dofs))

    def test_shape_mismatch(self):
        system = assemble(build_mesh(4), constant(1.0))
        with self.assertRaises(GridMismatchError):
            discrete_norms(system, np.zeros(2), np.zeros(system.mesh.n_active))


class EigenfrequencyTests(SimpleTestCase):
    def test_clamped_clamped_fundamental(self):
        system = assemble(build_mesh(64), constant(1.0))
        expected = clamped_root() ** 2
        self.assertAlmostEqual(clamped_root(), 4.7300408, places=6)
        self.assertLess(abs(first_eigenfrequency(system) / expected - 1.0), 1e-6)


class CoercivityTests(SimpleTestCase):
    def test_unit_stiffness(self):
        for n_elems in (16, 32):
            system = assemble(build_mesh(n_elems), constant(1.0))
            constants = coercivity_constants(system, 1.0, 1.0, 0.0)
            self.assertEqual(constants.mu, 0.5)
            self.assertEqual(constants.C1, 0.0)
            self.assertEqual(constants.C0p, 0.0)
            self.assertGreaterEqual(garding_margin(system, constants), -1e-10)

    def test_large_mu_is_mesh_stable(self):
        values = []
        for n_elems in (32, 64):
            system = assemble(build_mesh(n_elems), constant(1.0))
            constants = coercivity_constants(system, 1.0, 1.0, 0.0, mu=0.999)
            self.assertGreater(constants.lam, 0.0)
            self.assertGreaterEqual(garding_margin(system, constants), -1e-9 * np.abs(system.K0).max())
            values.append(constants.lam)
        self.assertLess(abs(values[1] / values[0] - 1.0), 0.02)

    def test_homogeneity(self):
        mesh = build_mesh(32)
        base = coercivity_constants(assemble(mesh, constant(1.0)), 1.0, 1.0, 0.0, mu=0.999)
        scaled = coercivity_constants(assemble(mesh, constant(3.0)), 3.0, 3.0, 0.0, mu=3.0 * 0.999)
        self.assertAlmostEqual(scaled.lam / base.lam, 3.0, places=8)
        self.assertAlmostEqual(scaled.C_half, base.C_half, places=8)

    def test_stepped_stiffness_family(self):
        material = BeamMaterial(EI1=1.0, EI2=2.0, x0=0.4)
        mesh = build_mesh(32)
        for eps in (2.0**-3, 2.0**-8, 2.0**-12):
            system = assemble(mesh, make_stiffness(material, STIFFNESS_SPEC, eps))
            constants = coercivity_constants(system, 1.0, 3.0, 0.0)
            self.assertGreaterEqual(garding_margin(system, constants), -1e-9 * np.abs(system.K0).max())

    def test_continuity_of_axial_form(self):
        material = BeamMaterial(P0=0.5, P1=1.0, t1=0.5)
        axial = make_axial(material, MollifierSpec("log"), 2.0**-6)
        system = assemble(build_mesh(16), constant(1.0), axial=axial, t=0.5)
        constants = coercivity_constants(system, 1.0, 1.0, axial.sup_norm)
        rng = np.random.default_rng(11)
        for _ in range(50):
            u, v = rng.normal(size=(2, system.mesh.n_active))
            norm_v, _ = discrete_norms(system, u, u)
            _, norm_h = discrete_norms(system, v, v)
            self.assertLessEqual(abs(v @ system.K1 @ u), constants.C1 * norm_v * norm_h * (1.0 + 1e-12))
