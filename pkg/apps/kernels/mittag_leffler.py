"""
Функции Миттаг-Леффлера E_{α,β}(z) для вещественного аргумента.

Малые |z| (и сходящиеся положительные z) суммируются степенным рядом,
отрицательная полуось z < -R считается через интегральное представление
на вещественной оси. Для α = 1 используются явные формулы.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from apps.services.exceptions import KernelDomainError, MittagLefflerError
from apps.services.utils import solver_setting

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MLParams:
    alpha: float
    beta: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise KernelDomainError(f"alpha must lie in (0,1], got {self.alpha}")
        if not self.beta > 0.0:
            raise KernelDomainError(f"beta must be positive, got {self.beta}")


def _series(alpha: float, beta: float, z: np.ndarray) -> np.ndarray:
    n_terms = solver_setting("ML_SERIES_TERMS")
    tol = solver_setting("ML_SERIES_TOL")
    k = np.arange(n_terms)
    log_coeff = -special.gammaln(alpha * k + beta)
    magnitude = np.where(z == 0.0, 1.0, np.abs(z))
    with np.errstate(over="ignore", invalid="ignore"):
        terms = np.exp(np.log(magnitude)[:, None] * k + log_coeff)
        terms *= np.where(z < 0.0, -1.0, 1.0)[:, None] ** k
    terms[z == 0.0, 1:] = 0.0
    total = terms.sum(axis=1)
    tail = np.abs(terms[:, -1])
    failed = ~np.isfinite(total) | (tail > tol * np.maximum(np.abs(total), 1e-300))
    if failed.any():
        bad = float(z[failed][0])
        raise MittagLefflerError(
            alpha, beta, bad, f"series not converged within {n_terms} terms"
        )
    return total


def _negative_axis(alpha: float, beta: float, z: np.ndarray) -> np.ndarray:
    """
    Интегральное представление при z < 0 (|arg z| = π > απ), β < 1 + α
    """
    if beta >= 1.0 + alpha:
        return (_negative_axis(alpha, beta - alpha, z) - special.rgamma(beta - alpha)) / z

    a_pi = alpha * math.pi
    sin_b = math.sin(math.pi * (1.0 - beta))
    sin_ab = math.sin(math.pi * (1.0 - beta + alpha))
    cos_a = math.cos(a_pi)
    power = (1.0 - beta) / alpha

    def integrand(chi):
        weight = chi**power * math.exp(-(chi ** (1.0 / alpha))) / a_pi
        return weight * (chi * sin_b - z * sin_ab) / (chi * chi - 2.0 * chi * z * cos_a + z * z)

    # exp(-chi^{1/α}) < 1e-30 за пределами chi_max
    chi_max = 70.0**alpha
    value, error = integrate.quad_vec(
        integrand,
        0.0,
        chi_max,
        epsabs=0.0,
        epsrel=solver_setting("ML_INTEGRAL_TOL"),
        limit=20000,
    )
    if not np.all(np.isfinite(value)):
        raise MittagLefflerError(alpha, beta, float(z[0]), "integral representation diverged")
    return np.asarray(value)


def _exponential_case(beta: float, z: np.ndarray) -> np.ndarray:
    if beta == 1.0:
        return np.exp(z)
    radius = solver_setting("ML_SERIES_RADIUS")
    out = np.empty_like(z)
    near = (np.abs(z) <= radius) | (z > 0.0)
    if near.any():
        out[near] = _series(1.0, beta, z[near])
    far = ~near
    if far.any():
        if beta != round(beta):
            raise MittagLefflerError(1.0, beta, float(z[far][0]), "non-integer beta for alpha=1")
        value = np.exp(z[far])
        for b in range(1, int(beta)):
            value = (value - special.rgamma(b)) / z[far]
        out[far] = value
    return out


def mittag_leffler(params: MLParams, z):
    """
    E_{α,β}(z) для скаляра или массива вещественных z
    """
    z_arr = np.asarray(z, dtype=float)
    flat = np.atleast_1d(z_arr).ravel()
    if params.alpha == 1.0:
        out = _exponential_case(params.beta, flat)
    else:
        out = np.empty_like(flat)
        near = (np.abs(flat) <= solver_setting("ML_SERIES_RADIUS")) | (flat > 0.0)
        if near.any():
            out[near] = _series(params.alpha, params.beta, flat[near])
        if (~near).any():
            out[~near] = _negative_axis(params.alpha, params.beta, flat[~near])
    if z_arr.ndim == 0:
        return float(out[0])
    return out.reshape(z_arr.shape)


def e_alpha(t, lam: float, alpha: float):
    """
    Функция релаксации e_α(t, λ) = E_α(-λ t^α), t ≥ 0
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0):
        raise KernelDomainError("e_alpha is defined for t >= 0")
    return mittag_leffler(MLParams(alpha, 1.0), -lam * t_arr**alpha)


def e_alpha_prime(t, lam: float, alpha: float):
    """
    Производная e'_α(t, λ) = -λ t^{α-1} E_{α,α}(-λ t^α), t > 0.

    Особенность t^{α-1} в нуле интегрируема.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0.0):
        raise KernelDomainError("e_alpha_prime is defined for t > 0 only")
    values = -lam * t_arr ** (alpha - 1.0) * mittag_leffler(
        MLParams(alpha, alpha), -lam * t_arr**alpha
    )
    if np.ndim(values) == 0:
        return float(values)
    return values


def e_alpha_integral(t, lam: float, alpha: float):
    """
    ∫_0^t e_α(s, λ) ds = t·E_{α,2}(-λ t^α)
    """
    t_arr = np.asarray(t, dtype=float)
    return t_arr * mittag_leffler(MLParams(alpha, 2.0), -lam * t_arr**alpha)
