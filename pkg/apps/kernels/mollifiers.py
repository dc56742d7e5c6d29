"""
Сглаживающее ядро ρ(x) = exp(-1/(1-x²))/Z на (-1, 1) и его ε-семейства
ρ_ε(x) = γ_ε ρ(γ_ε x).
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from apps.services.exceptions import KernelDomainError
from apps.services.utils import solver_setting

GAMMA_RULES = ("log", "power")


def _raw_bump(x):
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 1.0
    safe = np.where(inside, x, 0.0)
    return np.where(inside, np.exp(-1.0 / (1.0 - safe * safe)), 0.0)


@lru_cache(maxsize=None)
def normalization() -> float:
    value, _ = integrate.quad(_raw_bump, -1.0, 1.0, epsabs=1e-15, epsrel=1e-14)
    return value


@lru_cache(maxsize=None)
def _gauss_legendre(n: int):
    return np.polynomial.legendre.leggauss(n)


def bump(x):
    """
    Нормированное ядро ρ, ∫ρ = 1
    """
    return _raw_bump(x) / normalization()


def bump_derivative(x):
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 1.0
    safe = np.where(inside, x, 0.0)
    factor = -2.0 * safe / (1.0 - safe * safe) ** 2
    return np.where(inside, factor * bump(safe), 0.0)


def bump_cumulative(y):
    """
    Φ(y) = ∫_{-1}^{y} ρ; Φ(0) = 1/2 точно, Φ = 0 слева от -1 и 1 справа от 1
    """
    y = np.asarray(y, dtype=float)
    nodes, weights = _gauss_legendre(solver_setting("MOLLIFIER_GAUSS_POINTS"))
    half = np.clip(np.abs(y), 0.0, 1.0)
    # ∫_0^{|y|} ρ: узлы Гаусса на [0, |y|]
    points = 0.5 * half[..., None] * (nodes + 1.0)
    partial = 0.5 * half * np.sum(weights * bump(points), axis=-1)
    value = 0.5 + np.sign(y) * partial
    value = np.where(y <= -1.0, 0.0, np.where(y >= 1.0, 1.0, value))
    return np.clip(value, 0.0, 1.0)


@lru_cache(maxsize=None)
def bump_l2_norm() -> float:
    value, _ = integrate.quad(lambda x: bump(x) ** 2, -1.0, 1.0, epsabs=1e-15, epsrel=1e-13)
    return math.sqrt(value)


def bump_max() -> float:
    return math.exp(-1.0) / normalization()


@dataclass(frozen=True)
class MollifierSpec:
    """
    Правило масштаба γ_ε: "log" - γ_ε = scale·log(1/ε), "power" - γ_ε = scale·ε^{-r}
    """

    rule: str = "log"
    exponent: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if self.rule not in GAMMA_RULES:
            raise KernelDomainError(f"unknown gamma rule {self.rule!r}")
        if self.scale <= 0.0 or self.exponent <= 0.0:
            raise KernelDomainError("gamma rule scale and exponent must be positive")

    def gamma(self, eps: float) -> float:
        if not 0.0 < eps <= 1.0:
            raise KernelDomainError(f"eps must lie in (0,1], got {eps}")
        if self.rule == "log":
            value = self.scale * math.log(1.0 / eps)
        else:
            value = self.scale * eps ** (-self.exponent)
        if value <= 0.0:
            raise KernelDomainError(f"gamma_eps must be positive, got {value} at eps={eps}")
        return value

    def half_width(self, eps: float) -> float:
        return 1.0 / self.gamma(eps)

    def rho(self, x, eps: float):
        gamma = self.gamma(eps)
        return gamma * bump(gamma * np.asarray(x, dtype=float))

    def rho_derivative(self, x, eps: float):
        gamma = self.gamma(eps)
        return gamma * gamma * bump_derivative(gamma * np.asarray(x, dtype=float))

    def heaviside(self, x, eps: float):
        """
        Сглаженная функция Хевисайда H ∗ ρ_ε
        """
        return bump_cumulative(self.gamma(eps) * np.asarray(x, dtype=float))
