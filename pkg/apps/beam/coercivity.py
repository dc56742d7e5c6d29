"""
Константы коэрцитивности и непрерывности форм a0, a1 на дискретном пространстве
"""

import logging
from dataclasses import asdict, dataclass

import numpy as np
from scipy import linalg

from apps.services.exceptions import ConstantsError

from .assembly import BeamSystem

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CoercivityConstants:
    mu: float
    lam: float
    C0: float
    C0p: float
    C1: float
    c0: float
    c1: float
    C_half: float

    def as_dict(self) -> dict:
        return asdict(self)


def _extreme_eigenvalue(a: np.ndarray, b: np.ndarray, largest: bool) -> float:
    n = a.shape[0]
    index = n - 1 if largest else 0
    try:
        return float(linalg.eigh(a, b, eigvals_only=True, subset_by_index=[index, index])[0])
    except (linalg.LinAlgError, ValueError) as exc:
        raise ConstantsError(f"generalized eigenvalue problem failed: {exc}") from exc


def coercivity_constants(
    system: BeamSystem, c0: float, c1: float, b_inf: float, mu: float | None = None
) -> CoercivityConstants:
    """
    μ = c0/2 и наименьшее λ ≥ 0, при котором K0 + λH - μV_gram ⪰ 0.

    λ - наибольшее собственное значение пучка (μV_gram - K0, H_gram), обрезанное нулём.
    """
    if c0 <= 0.0:
        raise ConstantsError(f"lower stiffness bound must be positive, got {c0}")
    mu = 0.5 * c0 if mu is None else mu
    top = _extreme_eigenvalue(mu * system.V_gram - system.K0, system.H_gram, largest=True)
    lam = max(0.0, top)
    constants = CoercivityConstants(
        mu=mu, lam=lam, C0=c1, C0p=0.0, C1=b_inf, c0=c0, c1=c1, C_half=lam / c0
    )
    logger.info("coercivity: mu=%g lambda=%g C_half=%g", mu, lam, constants.C_half)
    return constants


def garding_margin(system: BeamSystem, constants: CoercivityConstants) -> float:
    """
    min-eig(K0 + λH - μV_gram); неотрицательно при верных константах
    """
    matrix = system.K0 + constants.lam * system.H_gram - constants.mu * system.V_gram
    try:
        return float(linalg.eigvalsh(matrix, subset_by_index=[0, 0])[0])
    except linalg.LinAlgError as exc:
        raise ConstantsError(f"eigenvalue problem failed: {exc}") from exc
