"""
Производная Римана-Лиувилля (схема L1) и проверка закона Зинера
D^α u + u = θ D^α g + g.
"""

import math

import numpy as np
from scipy import special

from apps.services.exceptions import GridMismatchError, KernelDomainError


def riemann_liouville(alpha: float, u, dt: float) -> np.ndarray:
    """
    D^α u(t_n) по схеме L1: u кусочно-линейна внутри дробного интеграла.

    Значение в t_0 равно 0 при u(0) = 0 и ±inf иначе (особенность t^{-α}).
    """
    if not 0.0 < alpha < 1.0:
        raise KernelDomainError(f"alpha must lie in (0,1), got {alpha}")
    u = np.asarray(u, dtype=float)
    steps = u.size - 1
    result = np.empty(steps + 1)
    result[0] = 0.0 if u[0] == 0.0 else math.copysign(math.inf, u[0])
    if steps == 0:
        return result
    k = np.arange(steps, dtype=float)
    b = (k + 1.0) ** (1.0 - alpha) - k ** (1.0 - alpha)
    caputo = np.convolve(np.diff(u), b)[:steps] * dt ** (-alpha) / special.gamma(2.0 - alpha)
    times = dt * np.arange(1, steps + 1)
    result[1:] = caputo + u[0] * times ** (-alpha) / special.gamma(1.0 - alpha)
    return result


def verify_zener(u, g, alpha: float, theta: float, dt: float) -> float:
    """
    max_n |D^α u + u - θ D^α g - g| по узлам t_n, n ≥ 1
    """
    u = np.asarray(u, dtype=float)
    g = np.asarray(g, dtype=float)
    if u.shape != g.shape:
        raise GridMismatchError(f"u has shape {u.shape}, g has shape {g.shape}")
    if u.size < 2:
        return 0.0
    du = riemann_liouville(alpha, u, dt)
    dg = riemann_liouville(alpha, g, dt)
    residual = (du[1:] - theta * dg[1:]) + (u[1:] - g[1:])
    return float(np.max(np.abs(residual)))
