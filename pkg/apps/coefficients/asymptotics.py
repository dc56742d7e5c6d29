"""
Оценка ε-асимптотик семейств: умеренность O(ε^{-p}) и пренебрежимость O(ε^q).
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

from apps.kernels.mollifiers import MollifierSpec, bump_max
from apps.services.exceptions import ProbeError
from apps.services.utils import loglog_fit

from .fields import AxialField, BeamMaterial

logger = logging.getLogger(__name__)

MODERATE = "moderate"
NEGLIGIBLE = "negligible"
RATE_TOLERANCE = 0.05


@dataclass
class AsymptoticProbe:
    eps_grid: np.ndarray
    norms: dict = field(default_factory=dict)
    rates: dict = field(default_factory=dict)
    rvalues: dict = field(default_factory=dict)
    null_orders: tuple = (1.0,)

    @property
    def fitted_rate(self) -> float:
        """
        Наибольший наклон log‖∂^k u_ε‖ относительно log(1/ε)
        """
        return max(self.rates.values())

    @property
    def classification(self) -> str:
        worst = self.fitted_rate
        if all(worst <= -order + RATE_TOLERANCE for order in self.null_orders):
            return NEGLIGIBLE
        return MODERATE


def _check_grid(eps_grid) -> np.ndarray:
    eps = np.asarray(eps_grid, dtype=float)
    if eps.size < 4:
        raise ProbeError(float(eps[-1]) if eps.size else math.nan, "need at least 4 eps samples")
    if np.any(np.diff(eps) >= 0.0):
        raise ProbeError(float(eps[0]), "eps grid must be strictly decreasing")
    if math.log10(eps[0] / eps[-1]) < 2.0:
        raise ProbeError(float(eps[-1]), "eps grid must span at least two decades")
    return eps


def probe_asymptotics(
    family,
    eps_grid,
    orders=(0,),
    domain=(0.0, 1.0),
    points: int = 8193,
    null_orders=(1.0,),
) -> AsymptoticProbe:
    """
    family(eps) возвращает функцию x -> u_ε(x); нормы L² производных
    порядков orders считаются на равномерной сетке.
    """
    eps = _check_grid(eps_grid)
    x = np.linspace(domain[0], domain[1], points)
    probe = AsymptoticProbe(eps_grid=eps, null_orders=tuple(null_orders))
    for order in orders:
        probe.norms[order] = np.empty(eps.size)

    for i, value in enumerate(eps):
        samples = np.asarray(family(value)(x), dtype=float)
        for order in orders:
            derivative = samples
            for _ in range(order):
                derivative = np.gradient(derivative, x)
            norm = math.sqrt(integrate.trapezoid(derivative**2, x))
            if not math.isfinite(norm):
                raise ProbeError(float(value), f"non-finite norm of derivative {order}")
            probe.norms[order][i] = norm

    for order, norms in probe.norms.items():
        if not np.any(norms):
            probe.rates[order], probe.rvalues[order] = -math.inf, 1.0
            continue
        if not np.all(norms > 0.0):
            bad = float(eps[np.argmin(norms)])
            raise ProbeError(bad, f"norm of derivative {order} vanishes for part of the grid")
        probe.rates[order], probe.rvalues[order] = loglog_fit(eps, norms)
    logger.info("probe: rates=%s class=%s", probe.rates, probe.classification)
    return probe


@dataclass(frozen=True)
class LogTypeCertificate:
    slope: float
    intercept: float
    rvalue: float
    expected_slope: float

    @property
    def holds(self) -> bool:
        if self.expected_slope == 0.0:
            return abs(self.slope) < 1e-12
        return self.rvalue >= 0.999 and abs(self.slope / self.expected_slope - 1.0) <= 0.05


def log_type_certificate(
    material: BeamMaterial, spec: MollifierSpec, eps_grid
) -> LogTypeCertificate:
    """
    Аффинная подгонка ‖b_ε‖_∞ относительно log(1/ε); ожидаемый наклон P1·max ρ.

    Для степенного правила ожидаемого наклона нет, сертификат не выполняется.
    """
    eps = np.asarray(eps_grid, dtype=float)
    sup = np.array([AxialField(material, spec, value).sup_norm for value in eps])
    expected = abs(material.P1) * bump_max() * (spec.scale if spec.rule == "log" else 0.0)
    if np.ptp(sup) == 0.0:
        return LogTypeCertificate(0.0, float(sup[0]), 1.0, expected)
    fit = stats.linregress(np.log(1.0 / eps), sup)
    logger.info("log-type fit: slope=%g r=%g expected=%g", fit.slope, fit.rvalue, expected)
    return LogTypeCertificate(float(fit.slope), float(fit.intercept), float(fit.rvalue), expected)
