import math

import mpmath
import numpy as np
from django.test import SimpleTestCase
from scipy import integrate, special

from apps.kernels.fractional import riemann_liouville, verify_zener
from apps.kernels.kernel import (
    build_kernel,
    convolve_L,
    exact_symbol,
    kernel_constants,
    kernel_l1_norm,
    laplace_symbol,
    mollification_error,
    mollified_values,
    mollify_kernel,
)
from apps.kernels.mittag_leffler import (
    MLParams,
    e_alpha,
    e_alpha_prime,
    mittag_leffler,
)
from apps.kernels.mollifiers import MollifierSpec, bump_l2_norm, bump_max
from apps.services.exceptions import (
    GridMismatchError,
    KernelDomainError,
    MittagLefflerError,
)


def mp_mittag_leffler(alpha, beta, z, terms=900, dps=90):
    """
    Эталон: ряд E_{α,β}(z) в арифметике повышенной точности
    """
    with mpmath.workdps(dps):
        z = mpmath.mpf(z)
        total = mpmath.fsum(
            z**k / mpmath.gamma(mpmath.mpf(alpha) * k + beta) for k in range(terms)
        )
        return float(total)


def smooth_signal(times, rng, modes=3):
    coefficients = rng.normal(size=(modes, 2))
    signal = np.zeros_like(times)
    for k, (a, b) in enumerate(coefficients, start=1):
        signal += a * np.sin(k * np.pi * times) + b * np.cos(k * np.pi * times)
    return signal


class MittagLefflerTests(SimpleTestCase):
    def test_exponential_reduction(self):
        self.assertAlmostEqual(mittag_leffler(MLParams(1.0, 1.0), -1.0), math.exp(-1.0), places=14)

    def test_value_at_zero(self):
        self.assertEqual(mittag_leffler(MLParams(0.5, 1.0), 0.0), 1.0)

    def test_half_order_matches_erfcx(self):
        for x in (0.5, 2.0, 7.5, 20.0, 50.0):
            value = mittag_leffler(MLParams(0.5, 1.0), -x)
            self.assertLess(abs(value / special.erfcx(x) - 1.0), 1e-10, msg=f"x={x}")

    def test_against_high_precision_series(self):
        cases = [
            (0.5, 1.0, -0.7),
            (0.3, 1.0, -3.0),
            (0.7, 0.7, -10.0),
            (0.6, 2.0, -4.0),
            (0.3, 2.0, -2.5),
            (0.8, 1.0, 3.0),
        ]
        for alpha, beta, z in cases:
            expected = mp_mittag_leffler(alpha, beta, z)
            value = mittag_leffler(MLParams(alpha, beta), z)
            self.assertLess(
                abs(value - expected), 1e-10 * abs(expected), msg=f"{alpha},{beta},{z}"
            )

    def test_array_input_keeps_shape(self):
        z = -np.linspace(0.0, 30.0, 12).reshape(3, 4)
        values = mittag_leffler(MLParams(0.5, 1.0), z)
        self.assertEqual(values.shape, (3, 4))
        np.testing.assert_allclose(values, special.erfcx(-z), rtol=1e-10)

    def test_divergent_series_raises(self):
        with self.assertRaises(MittagLefflerError) as ctx:
            mittag_leffler(MLParams(0.3, 1.0), 40.0)
        self.assertEqual(ctx.exception.z, 40.0)

    def test_invalid_parameters(self):
        with self.assertRaises(KernelDomainError):
            MLParams(1.5, 1.0)
        with self.assertRaises(KernelDomainError):
            MLParams(0.5, 0.0)


class RelaxationFunctionTests(SimpleTestCase):
    def test_e_alpha_at_zero(self):
        self.assertEqual(e_alpha(0.0, 3.0, 0.4), 1.0)

    def test_e_alpha_exponential(self):
        self.assertAlmostEqual(e_alpha(1.0, 2.0, 1.0), math.exp(-2.0), places=14)

    def test_e_alpha_half_order(self):
        self.assertAlmostEqual(e_alpha(1.0, 2.0, 0.5), special.erfcx(2.0), places=11)

    def test_e_alpha_negative_time(self):
        with self.assertRaises(KernelDomainError):
            e_alpha(-0.1, 1.0, 0.5)

    def test_derivative_exponential(self):
        self.assertAlmostEqual(e_alpha_prime(1.0, 2.0, 1.0), -2.0 * math.exp(-2.0), places=14)

    def test_derivative_small_time_asymptote(self):
        t = 1e-8
        ratio = e_alpha_prime(t, 1.0, 0.5) / (-(t**-0.5) / math.gamma(0.5))
        self.assertLess(abs(ratio - 1.0), 1e-3)

    def test_derivative_is_negative(self):
        t = np.geomspace(1e-6, 50.0, 400)
        for alpha in (0.2, 0.5, 0.9, 1.0):
            self.assertTrue(np.all(e_alpha_prime(t, 1.5, alpha) < 0.0), msg=f"alpha={alpha}")

    def test_derivative_domain(self):
        with self.assertRaises(KernelDomainError):
            e_alpha_prime(0.0, 1.0, 0.5)


class KernelTests(SimpleTestCase):
    def test_theta_one_gives_zero_kernel(self):
        kernel = build_kernel(0.5, 1.0, 1.0, 1.0 / 64)
        self.assertTrue(kernel.is_zero)
        self.assertFalse(np.any(kernel.samples))

    def test_kernel_sign_near_zero(self):
        kernel = build_kernel(0.4, 0.5, 1.0, 1.0 / 128)
        self.assertTrue(np.all(kernel.samples[:10] < 0.0))
        self.assertTrue(np.all(kernel.weights < 0.0))

    def test_weights_reproduce_kernel_integral(self):
        alpha, theta, horizon = 0.3, 0.25, 1.0
        kernel = build_kernel(alpha, theta, horizon, 1.0 / 256)
        n = kernel.steps
        total = kernel.weights[:n].sum() + kernel.tails[n]
        expected = -kernel_l1_norm(alpha, theta, horizon)
        self.assertAlmostEqual(total, expected, places=9)

    def test_l1_norm_identity_against_quadrature(self):
        alpha, theta, horizon = 0.5, 0.5, 1.0
        kappa, lam = 1.0 / theta - 1.0, 1.0 / theta
        value, _ = integrate.quad(lambda t: kappa * e_alpha_prime(t, lam, alpha), 0.0, horizon)
        expected = kappa * (e_alpha(0.0, lam, alpha) - e_alpha(horizon, lam, alpha))
        self.assertAlmostEqual(-value, expected, places=6)
        self.assertAlmostEqual(kernel_l1_norm(alpha, theta, horizon), expected, places=12)

    def test_laplace_symbol_match(self):
        s = np.array([0.5, 1.0, 2.0, 5.0, 10.0])
        for alpha in (0.3, 0.5, 0.7):
            for theta in (0.25, 0.5, 0.9):
                numeric = laplace_symbol(alpha, theta, s)
                error = np.max(np.abs(numeric - exact_symbol(alpha, theta, s)))
                self.assertLess(error, 1e-4, msg=f"alpha={alpha} theta={theta}")

    def test_laplace_symbol_collapse(self):
        np.testing.assert_array_equal(laplace_symbol(0.5, 1.0, [1.0, 2.0]), [1.0, 1.0])

    def test_constants_for_identity(self):
        constants = kernel_constants(build_kernel(0.6, 1.0, 1.0, 1.0 / 32))
        self.assertEqual(constants.young, 1.0)
        self.assertEqual(constants.printed, 1.0)

    def test_csv_export(self):
        kernel = build_kernel(0.5, 0.5, 0.25, 1.0 / 8)
        rows = list(kernel.csv_rows())
        self.assertEqual(len(rows), 3)
        self.assertEqual(rows[0][0], 0.0)


class ConvolutionTests(SimpleTestCase):
    def setUp(self):
        self.kernel = build_kernel(0.5, 0.5, 1.0, 1.0 / 256)
        self.rng = np.random.default_rng(7)

    def test_zero_input(self):
        np.testing.assert_array_equal(convolve_L(np.zeros(257), self.kernel), np.zeros(257))

    def test_identity_collapse_is_bitwise(self):
        kernel = build_kernel(0.5, 1.0, 1.0, 1.0 / 256)
        u = self.rng.normal(size=(257, 3))
        np.testing.assert_array_equal(convolve_L(u, kernel), u)

    def test_linearity(self):
        u = smooth_signal(self.kernel.times, self.rng)
        v = smooth_signal(self.kernel.times, self.rng)
        combined = convolve_L(2.0 * u - 3.0 * v, self.kernel)
        separate = 2.0 * convolve_L(u, self.kernel) - 3.0 * convolve_L(v, self.kernel)
        np.testing.assert_allclose(combined, separate, atol=1e-12)

    def test_causality(self):
        u = smooth_signal(self.kernel.times, self.rng)
        changed = u.copy()
        changed[150:] += 5.0
        np.testing.assert_array_equal(
            convolve_L(u, self.kernel)[:150], convolve_L(changed, self.kernel)[:150]
        )

    def test_grid_mismatch(self):
        with self.assertRaises(GridMismatchError):
            convolve_L(np.zeros(10), self.kernel)

    def test_operator_bound_on_random_inputs(self):
        for alpha, theta in ((0.3, 0.25), (0.5, 0.5), (0.7, 0.9)):
            kernel = build_kernel(alpha, theta, 1.0, 1.0 / 256)
            bound = kernel_constants(kernel).young
            for _ in range(50):
                u = smooth_signal(kernel.times, self.rng, modes=4)
                ratio = np.linalg.norm(convolve_L(u, kernel)) / np.linalg.norm(u)
                self.assertLessEqual(ratio, bound * (1.0 + 1e-12))

    def test_history_sum_matches_convolution(self):
        u = smooth_signal(self.kernel.times, self.rng)
        full = convolve_L(u, self.kernel)
        m = 100
        explicit = self.kernel.history_sum(u, m)
        implicit = (self.kernel.instantaneous + self.kernel.weights[0]) * u[m]
        self.assertAlmostEqual(explicit + implicit, full[m], places=12)


class RiemannLiouvilleTests(SimpleTestCase):
    dt = 1.0 / 200

    def test_constant_function(self):
        alpha = 0.4
        times = self.dt * np.arange(201)
        result = riemann_liouville(alpha, np.ones(201), self.dt)
        expected = times[1:] ** (-alpha) / math.gamma(1.0 - alpha)
        np.testing.assert_allclose(result[1:], expected, rtol=1e-12)

    def test_linear_function(self):
        alpha = 0.6
        times = self.dt * np.arange(201)
        result = riemann_liouville(alpha, times, self.dt)
        expected = times ** (1.0 - alpha) / math.gamma(2.0 - alpha)
        np.testing.assert_allclose(result, expected, rtol=1e-11, atol=1e-12 * expected.max())

    def test_order_one_limit(self):
        times = self.dt * np.arange(201)
        result = riemann_liouville(0.999, np.sin(times), self.dt)
        self.assertLess(np.max(np.abs(result[1:] - np.cos(times[1:]))), 2e-2)

    def test_domain(self):
        with self.assertRaises(KernelDomainError):
            riemann_liouville(1.0, np.zeros(5), 0.1)

    def test_linearity(self):
        rng = np.random.default_rng(3)
        u, v = rng.normal(size=(2, 64))
        np.testing.assert_allclose(
            riemann_liouville(0.5, u + v, 0.01)[1:],
            riemann_liouville(0.5, u, 0.01)[1:] + riemann_liouville(0.5, v, 0.01)[1:],
            rtol=1e-12,
            atol=1e-9,
        )


class ZenerEquivalenceTests(SimpleTestCase):
    @staticmethod
    def displacement(times):
        return np.clip(times - 0.1, 0.0, None) ** 4

    def test_zero_data(self):
        self.assertEqual(verify_zener(np.zeros(20), np.zeros(20), 0.5, 0.5, 0.05), 0.0)

    def test_identity_when_theta_is_one(self):
        u = np.sin(np.linspace(0.0, 1.0, 65))
        self.assertEqual(verify_zener(u, u, 0.5, 1.0, 1.0 / 64), 0.0)

    def test_convolution_solves_constitutive_law(self):
        for alpha, theta in ((0.3, 0.5), (0.5, 0.25), (0.7, 0.9)):
            residuals = []
            for steps in (64, 128, 256):
                kernel = build_kernel(alpha, theta, 1.0, 1.0 / steps)
                u = self.displacement(kernel.times)
                g = convolve_L(u, kernel)
                residuals.append(verify_zener(u, g, alpha, theta, kernel.dt))
            orders = np.log2(np.array(residuals[:-1]) / np.array(residuals[1:]))
            self.assertTrue(
                np.all(orders >= min(1.0, 2.0 - alpha) - 0.2), msg=f"{alpha},{theta}: {orders}"
            )

    def test_grid_mismatch(self):
        with self.assertRaises(GridMismatchError):
            verify_zener(np.zeros(4), np.zeros(5), 0.5, 0.5, 0.1)


class MollifierTests(SimpleTestCase):
    def test_normalization(self):
        for spec in (MollifierSpec("log"), MollifierSpec("power", exponent=0.5)):
            for eps in (2.0**-3, 2.0**-8, 2.0**-12):
                width = spec.half_width(eps)
                mass, _ = integrate.quad(
                    lambda x: spec.rho(x, eps), -width, width, epsabs=1e-14, epsrel=1e-13
                )
                self.assertLess(abs(mass - 1.0), 1e-10)

    def test_support(self):
        spec = MollifierSpec("power", exponent=1.0)
        eps = 0.01
        self.assertEqual(spec.rho(1.01 / spec.gamma(eps), eps), 0.0)
        self.assertGreater(spec.rho(0.99 / spec.gamma(eps), eps), 0.0)

    def test_heaviside_midpoint(self):
        spec = MollifierSpec("log")
        self.assertEqual(spec.heaviside(0.0, 0.1), 0.5)
        self.assertEqual(spec.heaviside(-1.0, 0.1), 0.0)
        self.assertEqual(spec.heaviside(1.0, 0.1), 1.0)

    def test_log_rule_requires_eps_below_one(self):
        with self.assertRaises(KernelDomainError):
            MollifierSpec("log").gamma(1.0)

    def test_max_value(self):
        self.assertAlmostEqual(bump_max(), math.exp(-1.0) / 0.4439938161680794, places=10)


class MollifiedKernelTests(SimpleTestCase):
    def test_zero_kernel_stays_zero(self):
        kernel = build_kernel(0.3, 1.0, 1.0, 1.0 / 64)
        mollified = mollify_kernel(kernel, MollifierSpec("log"), 0.01)
        self.assertFalse(np.any(mollified.samples))

    def test_l1_convergence_is_monotone(self):
        spec = MollifierSpec("log")
        errors = [
            mollification_error(0.3, 0.5, spec, 2.0**-k, 1.0) for k in (3, 5, 7, 9, 11)
        ]
        self.assertTrue(np.all(np.diff(errors) < 0.0), msg=str(errors))

    def test_l2_growth_is_at_most_square_root(self):
        spec = MollifierSpec("power", exponent=1.0)
        kernel = build_kernel(0.3, 0.5, 1.0, 1.0 / 1024)
        eps_grid = np.array([2.0**-k for k in range(2, 7)])
        norms = []
        for eps in eps_grid:
            mollified = mollify_kernel(kernel, spec, eps)
            norm = math.sqrt(integrate.trapezoid(mollified.samples**2, mollified.times))
            width = spec.half_width(eps)
            bound = kernel_l1_norm(0.3, 0.5, 1.0 + width) * math.sqrt(spec.gamma(eps))
            self.assertLessEqual(norm, bound * bump_l2_norm())
            norms.append(norm)
        slope = np.polyfit(np.log(1.0 / eps_grid), np.log(norms), 1)[0]
        self.assertGreater(slope, 0.0)
        self.assertLessEqual(slope, 0.55)

    def test_mollified_values_are_finite_at_origin(self):
        values = mollified_values(0.3, 0.5, MollifierSpec("log"), 0.01, [0.0, 0.05])
        self.assertTrue(np.all(np.isfinite(values)))
        self.assertTrue(np.all(values < 0.0))
