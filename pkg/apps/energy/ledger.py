"""
Априорная энергетическая оценка

    ‖u(t)‖²_V + ‖u'(t)‖²_R ≤ (D_T‖f1‖²_V + (‖f2‖²_R + ∫_0^t ‖h‖²_H dτ)/ν)·e^{t·F_T}

и её проверка вдоль вычисленной траектории. Скорость измеряется в норме
с плотностью ‖v‖²_R = vᵀMv; при R ≥ R_min показатель F_T умножается на
ρ = max(1, 1/R_min). Оценка хранится в логарифмах, так как e^{t·F_T}
быстро переполняется.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from apps.beam.assembly import BeamSystem, energy_norms
from apps.beam.coercivity import CoercivityConstants
from apps.kernels.kernel import FractionalKernel, kernel_constants
from apps.services.exceptions import ConstantsError
from apps.services.mixins import CsvExportMixin
from apps.services.utils import solver_setting

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnergyConstants:
    nu: float
    D_T: float
    F_T: float
    C_L: float
    gamma_T: float
    horizon: float
    rho: float = 1.0

    @property
    def log_gamma_T(self) -> float:
        if self.C_L == 0.0:
            return -math.inf
        return math.log(self.C_L) + 0.5 * math.log(self.horizon) + 0.5 * self.horizon * self.F_T


def operator_bound(kernel: FractionalKernel | None) -> float:
    """
    C_L: оценка Юнга для ядра l_α, ‖l_ε‖_{L²}·T для сглаженного ядра;
    без основания оператор L отсутствует
    """
    if kernel is None:
        return 0.0
    values = kernel_constants(kernel)
    return values.lemma if kernel.mollified_eps is not None else values.young


def constants(
    coercivity: CoercivityConstants, C_L: float, horizon: float, density_floor: float = 1.0
) -> EnergyConstants:
    if coercivity.mu <= 0.0:
        raise ConstantsError(f"coercivity constant mu must be positive, got {coercivity.mu}")
    if horizon <= 0.0:
        raise ConstantsError(f"horizon must be positive, got {horizon}")
    if density_floor <= 0.0:
        raise ConstantsError(f"density must stay positive, got R_min={density_floor}")
    rho = max(1.0, 1.0 / density_floor)
    nu = min(1.0, coercivity.mu)
    growth = coercivity.lam * (1.0 + horizon)
    D_T = (coercivity.C0 + growth) / nu
    F_T = rho * max((coercivity.C0p + coercivity.C1 + C_L) / nu, (coercivity.C1 + 2.0 + growth) / nu)
    exponent = 0.5 * horizon * F_T
    gamma_T = C_L * math.sqrt(horizon) * math.exp(exponent) if exponent < 700.0 else math.inf
    return EnergyConstants(nu, D_T, F_T, C_L, gamma_T, horizon, rho)


def contraction_factor(coercivity: CoercivityConstants, C_L: float, density_floor: float = 1.0):
    """
    T -> γ_T для выбора подотрезков итераций Пикара
    """

    def gamma_of(horizon):
        if horizon <= 0.0:
            return 0.0
        return constants(coercivity, C_L, horizon, density_floor).gamma_T

    return gamma_of


class EnergyLedger(CsvExportMixin):
    """
    Пошаговый журнал: нормы решения, накопленный ∫‖h‖², оценка и запас
    """

    csv_header = ("t", "normV_u", "normH_v", "bound", "margin")

    def __init__(self, system: BeamSystem, energy: EnergyConstants, f1, f2):
        self.system = system
        self.energy = energy
        norm_f1, norm_f2 = energy_norms(system, f1, f2)
        self.data_f1 = norm_f1**2
        self.data_f2 = norm_f2**2
        self.times, self.norm_v, self.norm_h, self.load_integral, self.log_bound = [], [], [], [], []
        self._last = None

    def _log_data(self, load_integral: float) -> float:
        data = self.energy.D_T * self.data_f1 + (self.data_f2 + load_integral) / self.energy.nu
        return math.log(data) if data > 0.0 else -math.inf

    def record(self, state):
        norm_v, norm_h = energy_norms(self.system, state.u, state.v)
        if self._last is None:
            integral = 0.0
        else:
            t_prev, load_prev, integral_prev = self._last
            integral = integral_prev + 0.5 * (state.t - t_prev) * (load_prev + state.load_norm2)
        self._last = (state.t, state.load_norm2, integral)
        self.times.append(state.t)
        self.norm_v.append(norm_v)
        self.norm_h.append(norm_h)
        self.load_integral.append(integral)
        self.log_bound.append(self._log_data(integral) + state.t * self.energy.F_T)

    @classmethod
    def from_trajectory(cls, system, energy, f1, f2, trajectory) -> "EnergyLedger":
        """
        Журнал по готовой траектории (траектория хранит ‖h(t_n)‖²_H)
        """
        ledger = cls(system, energy, f1, f2)
        for n, t in enumerate(trajectory.times):
            ledger.record(_NodeState(t, trajectory.u[n], trajectory.v[n], trajectory.load_norms[n]))
        return ledger

    @property
    def measured(self) -> np.ndarray:
        return np.asarray(self.norm_v) ** 2 + np.asarray(self.norm_h) ** 2

    @property
    def bound(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(np.asarray(self.log_bound))

    @property
    def margin(self) -> np.ndarray:
        return self.bound - self.measured

    def csv_rows(self):
        return zip(self.times, self.norm_v, self.norm_h, self.bound, self.margin)


@dataclass(frozen=True)
class _NodeState:
    t: float
    u: np.ndarray
    v: np.ndarray
    load_norm2: float


@dataclass(frozen=True)
class InequalityVerdict:
    holds: bool
    worst_margin: float
    worst_step: int


def check_inequality(ledger: EnergyLedger, slack: float | None = None) -> InequalityVerdict:
    """
    measured ≤ bound·(1 + slack) в каждом узле; worst_margin - наименьший
    относительный запас (bound - measured)/bound
    """
    slack = solver_setting("ENERGY_SLACK") if slack is None else slack
    measured = ledger.measured
    log_bound = np.asarray(ledger.log_bound)
    with np.errstate(divide="ignore"):
        log_measured = np.log(measured)
    violated = log_measured > log_bound + math.log1p(slack)
    with np.errstate(invalid="ignore", over="ignore"):
        relative = np.where(
            ~np.isneginf(log_bound),
            1.0 - np.exp(log_measured - log_bound),
            np.where(measured > 0.0, -math.inf, 0.0),
        )
    relative = np.where(np.isnan(relative), 0.0, relative)
    worst = int(np.argmin(relative)) if relative.size else 0
    verdict = InequalityVerdict(
        holds=not bool(np.any(violated)),
        worst_margin=float(relative[worst]) if relative.size else 0.0,
        worst_step=worst,
    )
    level = logging.INFO if verdict.holds else logging.WARNING
    logger.log(level, "energy inequality: holds=%s worst margin=%g", verdict.holds, verdict.worst_margin)
    return verdict
