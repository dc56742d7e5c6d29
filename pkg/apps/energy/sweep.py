"""
Вердикт умеренности по ε-серии траекторий
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from apps.services.exceptions import ProbeError
from apps.services.mixins import CsvExportMixin
from apps.services.utils import loglog_fit, solver_setting

from .ledger import EnergyLedger, check_inequality

logger = logging.getLogger(__name__)

MIN_BOUND_CORRELATION = 0.99
ACCELERATION_RATIO = 2.0


@dataclass(frozen=True)
class SweepMember:
    eps: float
    measured_norm: float
    log_bound: float
    exponent: float
    inequality_holds: bool = True

    @classmethod
    def from_ledger(cls, eps: float, ledger: EnergyLedger) -> "SweepMember":
        """
        measured_norm = max_t (‖u‖²_V + ‖u'‖²_H)^{1/2}, exponent = T·F_T
        """
        return cls(
            eps=eps,
            measured_norm=float(np.sqrt(np.max(ledger.measured))),
            log_bound=float(ledger.log_bound[-1]),
            exponent=ledger.energy.horizon * ledger.energy.F_T,
            inequality_holds=check_inequality(ledger).holds,
        )


def _linear_fit(x: np.ndarray, y: np.ndarray):
    if np.ptp(y) == 0.0:
        return 0.0, 1.0
    fit = stats.linregress(x, y)
    return float(fit.slope), float(fit.rvalue)


@dataclass
class SweepReport(CsvExportMixin):
    members: list
    fitted_power: float
    rvalue: float
    bound_power: float
    bound_rvalue: float
    first_slope: float
    last_slope: float
    bracketed: bool
    notes: list = field(default_factory=list)

    csv_header = ("eps", "measured_norm", "log_bound", "fitted_power")

    @property
    def super_polynomial(self) -> bool:
        return self.last_slope > ACCELERATION_RATIO * max(self.first_slope, 0.0) + 1e-9

    @property
    def finite(self) -> bool:
        return math.isfinite(self.fitted_power)

    @property
    def holds(self) -> bool:
        return (
            self.finite
            and self.bracketed
            and self.bound_rvalue >= MIN_BOUND_CORRELATION
            and not self.super_polynomial
            and all(member.inequality_holds for member in self.members)
        )

    def csv_rows(self):
        for member in self.members:
            yield member.eps, member.measured_norm, member.log_bound, self.fitted_power


def sweep_verdict(members, slack: float | None = None) -> SweepReport:
    """
    Степень роста норм траекторий по 1/ε и предсказание оценки e^{T·F_T^ε}.

    При логарифмическом росте F_T^ε предсказание полиномиально по 1/ε; ускорение
    наклона в log-log координатах отмечается как сверхполиномиальный рост.
    """
    slack = solver_setting("ENERGY_SLACK") if slack is None else slack
    members = sorted(members, key=lambda member: member.eps, reverse=True)
    if len(members) < 3:
        raise ProbeError(members[-1].eps if members else math.nan, "sweep needs at least 3 eps values")
    for member in members:
        if not (math.isfinite(member.measured_norm) and member.log_bound < math.inf):
            raise ProbeError(member.eps, "non-finite trajectory norm")

    eps = np.array([member.eps for member in members])
    measured = np.array([member.measured_norm for member in members])
    x = np.log(1.0 / eps)
    if np.any(measured > 0.0):
        if np.any(measured <= 0.0):
            bad = float(eps[np.argmin(measured)])
            raise ProbeError(bad, "trajectory vanishes for part of the sweep")
        power, rvalue = loglog_fit(eps, measured)
    else:
        power, rvalue = 0.0, 1.0

    exponent = np.array([member.exponent for member in members])
    bound_power, bound_rvalue = _linear_fit(x, exponent)
    half = len(members) // 2
    first_slope, _ = _linear_fit(x[: half + 1], exponent[: half + 1])
    last_slope, _ = _linear_fit(x[half:], exponent[half:])

    log_bound = np.array([member.log_bound for member in members])
    with np.errstate(divide="ignore"):
        bracketed = bool(np.all(2.0 * np.log(measured) <= log_bound + math.log1p(slack)))

    report = SweepReport(
        members=members,
        fitted_power=power,
        rvalue=rvalue,
        bound_power=bound_power,
        bound_rvalue=bound_rvalue,
        first_slope=first_slope,
        last_slope=last_slope,
        bracketed=bracketed,
    )
    if report.super_polynomial:
        report.notes.append("bound-side growth accelerates: super-polynomial in 1/eps")
        logger.warning("sweep: super-polynomial bound growth, slopes %g -> %g", first_slope, last_slope)
    logger.info(
        "sweep: power=%g r=%g bound power=%g r=%g holds=%s",
        power,
        rvalue,
        bound_power,
        bound_rvalue,
        report.holds,
    )
    return report
