"""
Ядро памяти основания Зинера и оператор L = (1/θ)·Id + l_α ∗_t.

Обращение символа (1+s^α)/(1+θ s^α) даёт мгновенную часть (1/θ)δ и
интегрируемое ядро l_α(t) = (1/θ-1)·e'_α(t, 1/θ) с особенностью t^{α-1}.
Свёртка считается произведением-интегрированием: u кусочно-линейна,
l_α интегрируется точно через первообразные A = ∫l и B = ∫A.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, signal

from apps.kernels.mittag_leffler import (
    MLParams,
    e_alpha,
    e_alpha_integral,
    e_alpha_prime,
    mittag_leffler,
)
from apps.kernels.mollifiers import MollifierSpec
from apps.services.exceptions import GridMismatchError, KernelDomainError
from apps.services.mixins import CsvExportMixin
from apps.services.utils import solver_setting

logger = logging.getLogger(__name__)


def _validate(alpha: float, theta: float):
    if not 0.0 < alpha < 1.0:
        raise KernelDomainError(f"alpha must lie in (0,1), got {alpha}")
    if not 0.0 < theta <= 1.0:
        raise KernelDomainError(f"theta must lie in (0,1], got {theta}")


@dataclass(frozen=True, eq=False)
class FractionalKernel(CsvExportMixin):
    """
    Табулированное ядро на равномерной сетке t_j = j·dt, j = 0..n.

    weights[j] - вес узла u(t_n - t_j) (полная «шапочка» при j ≥ 1,
    половинная при j = 0), tails[n] - вес u(t_0) в конце отрезка [0, t_n].
    """

    alpha: float
    theta: float
    horizon: float
    dt: float
    times: np.ndarray
    samples: np.ndarray
    weights: np.ndarray
    tails: np.ndarray
    mollified_eps: float | None = None

    csv_header = ("t", "l_alpha")

    @property
    def lam(self) -> float:
        return 1.0 / self.theta

    @property
    def kappa(self) -> float:
        return 1.0 / self.theta - 1.0

    @property
    def instantaneous(self) -> float:
        return 1.0 / self.theta

    @property
    def steps(self) -> int:
        return self.times.size - 1

    @property
    def is_zero(self) -> bool:
        return not np.any(self.weights) and not np.any(self.tails)

    def history_sum(self, history: np.ndarray, m: int) -> np.ndarray:
        """
        Явная часть (l ∗ u)(t_m) без текущего узла: Σ_{j=1}^{m-1} w_j u_{m-j} + e_m u_0
        """
        if m == 0:
            return np.zeros_like(history[0])
        total = self.tails[m] * history[0]
        if m > 1:
            total = total + self.weights[1:m] @ history[m - 1 : 0 : -1]
        return total

    def csv_rows(self):
        return zip(self.times, self.samples)


def _antiderivatives(alpha: float, theta: float, times: np.ndarray):
    lam, kappa = 1.0 / theta, 1.0 / theta - 1.0
    first = kappa * (e_alpha(times, lam, alpha) - 1.0)
    second = kappa * (e_alpha_integral(times, lam, alpha) - times)
    return first, second


def build_kernel(alpha: float, theta: float, horizon: float, dt: float) -> FractionalKernel:
    _validate(alpha, theta)
    if dt <= 0.0 or horizon < dt:
        raise KernelDomainError(f"need dt > 0 and T >= dt, got dt={dt}, T={horizon}")
    steps = int(round(horizon / dt))
    times = dt * np.arange(steps + 1)
    if theta == 1.0:
        zeros = np.zeros(steps + 1)
        return FractionalKernel(alpha, theta, horizon, dt, times, zeros, zeros, zeros.copy())

    extended = dt * np.arange(steps + 2)
    first, second = _antiderivatives(alpha, theta, extended)
    weights = np.empty(steps + 1)
    weights[0] = second[1] / dt
    weights[1:] = (second[2:] - 2.0 * second[1:-1] + second[:-2]) / dt
    tails = np.zeros(steps + 1)
    tails[1:] = first[1 : steps + 1] - (second[1 : steps + 1] - second[:steps]) / dt

    samples = np.empty(steps + 1)
    # первая ячейка: среднее значение l_α на [0, dt] вместо бесконечного l_α(0)
    samples[0] = first[1] / dt
    if steps:
        samples[1:] = (1.0 / theta - 1.0) * e_alpha_prime(times[1:], 1.0 / theta, alpha)
    logger.info("kernel built: alpha=%g theta=%g steps=%d dt=%g", alpha, theta, steps, dt)
    return FractionalKernel(alpha, theta, horizon, dt, times, samples, weights, tails)


def convolve_L(u: np.ndarray, kernel: FractionalKernel) -> np.ndarray:
    """
    (Lu)(t_n) = u(t_n)/θ + (l ∗ u)(t_n) на сетке ядра; u(t) = 0 при t < 0
    """
    u = np.asarray(u, dtype=float)
    if u.shape[0] != kernel.times.size:
        raise GridMismatchError(
            f"series has {u.shape[0]} samples, kernel grid has {kernel.times.size}"
        )
    result = kernel.instantaneous * u
    if kernel.is_zero:
        return result
    shape = (-1,) + (1,) * (u.ndim - 1)
    memory = signal.convolve(u, kernel.weights.reshape(shape), mode="full", method="direct")
    memory = memory[: u.shape[0]]
    correction = kernel.tails - kernel.weights
    memory = memory + correction.reshape(shape) * u[0]
    return result + memory


def mollified_values(alpha: float, theta: float, spec: MollifierSpec, eps: float, t):
    """
    l_ε(t) = (l ∗ ρ_ε)(t) = ∫ A(s) ρ_ε'(t - s) ds, A = ∫_0^s l, A = 0 при s < 0
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    kappa, lam = 1.0 / theta - 1.0, 1.0 / theta
    if kappa == 0.0:
        return np.zeros_like(t)
    width = spec.half_width(eps)
    nodes, weights = np.polynomial.legendre.leggauss(solver_setting("MOLLIFIER_GAUSS_POINTS"))
    lower = t - width
    upper = t + width
    crosses = lower < 0.0

    # отрезок, пересекающий 0: подстановка s = b·w^{1/α} сглаживает A(s) ~ s^α
    unit = 0.5 * (nodes + 1.0)
    power = 1.0 / alpha
    s_cross = upper[:, None] * unit**power
    jac_cross = upper[:, None] * power * unit ** (power - 1.0) * 0.5 * weights
    s_plain = 0.5 * (upper - lower)[:, None] * nodes + 0.5 * (upper + lower)[:, None]
    jac_plain = 0.5 * (upper - lower)[:, None] * weights
    s = np.where(crosses[:, None], s_cross, s_plain)
    jac = np.where(crosses[:, None], jac_cross, jac_plain)

    s = np.clip(s, 0.0, None)
    antiderivative = kappa * (e_alpha(s.ravel(), lam, alpha).reshape(s.shape) - 1.0)
    kernel_values = spec.rho_derivative(t[:, None] - s, eps)
    return np.sum(jac * antiderivative * kernel_values, axis=1)


def mollify_kernel(kernel: FractionalKernel, spec: MollifierSpec, eps: float) -> FractionalKernel:
    """
    Сглаженное ядро l_ε на сетке исходного ядра; веса - формула трапеций
    """
    samples = mollified_values(kernel.alpha, kernel.theta, spec, eps, kernel.times)
    weights = kernel.dt * samples
    weights[0] *= 0.5
    tails = 0.5 * kernel.dt * samples
    tails[0] = 0.0
    logger.info("kernel mollified: eps=%g gamma=%g", eps, spec.gamma(eps))
    return FractionalKernel(
        kernel.alpha,
        kernel.theta,
        kernel.horizon,
        kernel.dt,
        kernel.times,
        samples,
        weights,
        tails,
        mollified_eps=eps,
    )


def laplace_symbol(alpha: float, theta: float, s):
    """
    Численное преобразование Лапласа ядра (1/θ)δ + l_α в точках s.

    После подстановки u = t^α: l̂(s) = -(κλ/α)∫_0^∞ e^{-s u^{1/α}} E_{α,α}(-λu) du.
    """
    _validate(alpha, theta)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if theta == 1.0:
        return np.ones_like(s)
    kappa, lam = 1.0 / theta - 1.0, 1.0 / theta
    params = MLParams(alpha, alpha)

    def integrand(u):
        return np.exp(-s * u ** (1.0 / alpha)) * mittag_leffler(params, -lam * u)

    value, _ = integrate.quad_vec(integrand, 0.0, np.inf, epsabs=1e-12, epsrel=1e-10)
    return 1.0 / theta - kappa * lam / alpha * np.asarray(value)


def exact_symbol(alpha: float, theta: float, s):
    s = np.asarray(s, dtype=float)
    return (1.0 + s**alpha) / (1.0 + theta * s**alpha)


@dataclass(frozen=True)
class KernelConstants:
    """
    Константы оператора L на [0, T]: ‖l‖_{L¹}, оценка Юнга и её варианты
    """

    l1_norm: float
    young: float
    printed: float
    lemma: float


def kernel_l1_norm(alpha: float, theta: float, horizon: float) -> float:
    """
    ‖l_α‖_{L¹(0,T)} = (1/θ-1)(1 - e_α(T, 1/θ)), так как e'_α < 0
    """
    kappa = 1.0 / theta - 1.0
    if kappa == 0.0:
        return 0.0
    return kappa * (1.0 - e_alpha(horizon, 1.0 / theta, alpha))


def kernel_l2_norm(alpha: float, theta: float, horizon: float) -> float:
    """
    ‖l_α‖_{L²(0,T)}; конечна только при α > 1/2
    """
    kappa, lam = 1.0 / theta - 1.0, 1.0 / theta
    if kappa == 0.0:
        return 0.0
    if alpha <= 0.5:
        return math.inf
    params = MLParams(alpha, alpha)
    value, _ = integrate.quad(
        lambda u: mittag_leffler(params, -lam * u) ** 2,
        0.0,
        horizon**alpha,
        weight="alg",
        wvar=(1.0 - 1.0 / alpha, 0.0),
    )
    return kappa * lam * math.sqrt(value / alpha)


def kernel_constants(kernel: FractionalKernel) -> KernelConstants:
    l1_norm = kernel_l1_norm(kernel.alpha, kernel.theta, kernel.horizon)
    if kernel.mollified_eps is not None:
        l2_norm = math.sqrt(integrate.trapezoid(kernel.samples**2, kernel.times))
    else:
        l2_norm = kernel_l2_norm(kernel.alpha, kernel.theta, kernel.horizon)
    return KernelConstants(
        l1_norm=l1_norm,
        young=kernel.instantaneous + l1_norm,
        printed=1.0 + l1_norm,
        lemma=kernel.instantaneous + l2_norm * kernel.horizon,
    )


def mollification_error(
    alpha: float, theta: float, spec: MollifierSpec, eps: float, horizon: float
) -> float:
    """
    ‖l_ε - l‖_{L¹(0,T)}
    """
    kappa, lam = 1.0 / theta - 1.0, 1.0 / theta
    if kappa == 0.0:
        return 0.0

    def difference(t):
        exact = kappa * e_alpha_prime(t, lam, alpha)
        return abs(mollified_values(alpha, theta, spec, eps, t)[0] - exact)

    width = min(spec.half_width(eps), horizon)
    near, _ = integrate.quad(difference, 0.0, width, limit=200)
    far = 0.0
    if width < horizon:
        far, _ = integrate.quad(difference, width, horizon, limit=200)
    return near + far
