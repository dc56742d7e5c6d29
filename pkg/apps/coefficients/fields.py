"""
Физические коэффициенты балки и их ε-регуляризации.

Жёсткость A(x) = EI1 + H(x-x0)·EI2, продольная сила P(t) = P0 + P1·δ(t-t1),
подвижная нагрузка h(x,t) = H0·δ(x-ct), плотность R(x) = R0 + H(x-x0)·(R1-R2).
Скачки и дельта-функции сглаживаются ядром ρ_ε из apps.kernels.mollifiers.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from apps.kernels.mollifiers import MollifierSpec, bump_max
from apps.services.exceptions import ConfigError
from apps.services.mixins import CsvExportMixin

logger = logging.getLogger(__name__)

# c - любое умеренное масштабирование, b - обязательно логарифмическое
STIFFNESS_SPEC = MollifierSpec("power", exponent=0.5)
AXIAL_SPEC = MollifierSpec("log")
LOAD_SPEC = MollifierSpec("power", exponent=0.5)


@dataclass(frozen=True)
class BeamMaterial:
    EI1: float = 1.0
    EI2: float = 0.0
    x0: float = 0.5
    P0: float = 0.0
    P1: float = 0.0
    t1: float = 0.5
    H0: float = 0.0
    speed: float = 1.0
    density_enabled: bool = False
    R0: float = 1.0
    R1R2gap: float = 0.0

    def __post_init__(self):
        if self.EI1 <= 0.0:
            raise ConfigError("EI1 must be positive", field="EI1")
        if self.EI1 + self.EI2 <= 0.0:
            raise ConfigError("EI1 + EI2 must be positive", field="EI2")
        if not 0.0 < self.x0 < 1.0:
            raise ConfigError("x0 must lie in (0,1)", field="x0")
        if self.speed <= 0.0:
            raise ConfigError("speed must be positive", field="speed")
        if self.density_enabled and min(self.R0, self.R0 + self.R1R2gap) <= 0.0:
            raise ConfigError("density must stay positive", field="R1R2gap")

    def check_horizon(self, horizon: float):
        if not 0.0 < self.t1 < horizon:
            raise ConfigError(f"t1 must lie in (0,{horizon:g})", field="t1")

    @property
    def stiffness_bounds(self) -> tuple[float, float]:
        return min(self.EI1, self.EI1 + self.EI2), max(self.EI1, self.EI1 + self.EI2)

    def stiffness(self, x):
        """
        Несглаженная жёсткость A(x), H(0) = 1/2
        """
        return self.EI1 + self.EI2 * np.heaviside(np.asarray(x, dtype=float) - self.x0, 0.5)


def _warn_smearing(name: str, x0: float, width: float):
    if x0 - width < 0.0 or x0 + width > 1.0:
        logger.warning(
            "%s: jump at x0=%g is within 1/gamma=%g of the beam end, mollifier is smeared",
            name,
            x0,
            width,
        )


@dataclass(frozen=True)
class StiffnessField:
    """
    c_ε(x) = EI1 + EI2·(H ∗ ρ_ε)(x - x0)
    """

    material: BeamMaterial
    spec: MollifierSpec
    eps: float

    def __call__(self, x):
        jump = self.spec.heaviside(np.asarray(x, dtype=float) - self.material.x0, self.eps)
        return self.material.EI1 + self.material.EI2 * jump

    @property
    def bounds(self) -> tuple[float, float]:
        return self.material.stiffness_bounds


@dataclass(frozen=True)
class DensityField:
    material: BeamMaterial
    spec: MollifierSpec
    eps: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if not self.material.density_enabled:
            return np.ones_like(x)
        jump = self.spec.heaviside(x - self.material.x0, self.eps)
        return self.material.R0 + self.material.R1R2gap * jump

    @property
    def floor(self) -> float:
        if not self.material.density_enabled:
            return 1.0
        return min(self.material.R0, self.material.R0 + self.material.R1R2gap)


@dataclass(frozen=True)
class AxialField:
    """
    b_ε(x,t) = P0 + P1·δ_ε(t - t1); при включённой плотности b = P(R(x)·t)
    """

    material: BeamMaterial
    spec: MollifierSpec
    eps: float
    density: DensityField | None = None

    def __call__(self, x, t: float):
        x = np.asarray(x, dtype=float)
        time = t * self.density(x) if self.density is not None else np.full_like(x, t)
        return self.material.P0 + self.material.P1 * self.spec.rho(time - self.material.t1, self.eps)

    @property
    def sup_norm(self) -> float:
        """
        ‖b_ε‖_∞ = max(|P0|, |P0 + P1·γ_ε·max ρ|)
        """
        peak = self.material.P1 * self.spec.gamma(self.eps) * bump_max()
        return max(abs(self.material.P0), abs(self.material.P0 + peak))

    @property
    def time_dependent(self) -> bool:
        return self.material.P1 != 0.0

    def pulse(self, t):
        return self.spec.rho(np.asarray(t, dtype=float) - self.material.t1, self.eps)


@dataclass(frozen=True)
class LoadField:
    """
    h_ε(x,t) = H0·δ_ε(x - c·t)
    """

    material: BeamMaterial
    spec: MollifierSpec
    eps: float

    def __call__(self, x, t: float):
        x = np.asarray(x, dtype=float)
        if self.material.H0 == 0.0:
            return np.zeros_like(x)
        return self.material.H0 * self.spec.rho(x - self.material.speed * t, self.eps)


def make_stiffness(material: BeamMaterial, spec: MollifierSpec, eps: float) -> StiffnessField:
    _warn_smearing("stiffness", material.x0, spec.half_width(eps))
    return StiffnessField(material, spec, eps)


def make_density(material: BeamMaterial, spec: MollifierSpec, eps: float) -> DensityField:
    if material.density_enabled and material.R1R2gap:
        _warn_smearing("density", material.x0, spec.half_width(eps))
    return DensityField(material, spec, eps)


def make_axial(
    material: BeamMaterial,
    spec: MollifierSpec,
    eps: float,
    density: DensityField | None = None,
) -> AxialField:
    if density is not None and not material.density_enabled:
        density = None
    return AxialField(material, spec, eps, density)


def make_load(material: BeamMaterial, spec: MollifierSpec, eps: float) -> LoadField:
    return LoadField(material, spec, eps)


@dataclass(frozen=True)
class CoefficientFamily:
    """
    Набор ε-регуляризованных коэффициентов для одного значения ε
    """

    eps: float
    stiffness: StiffnessField
    axial: AxialField
    load: LoadField
    density: DensityField

    @property
    def c0(self) -> float:
        return self.stiffness.bounds[0]

    @property
    def c1(self) -> float:
        return self.stiffness.bounds[1]

    @property
    def b_inf(self) -> float:
        return self.axial.sup_norm


def make_family(
    material: BeamMaterial,
    eps: float,
    stiffness_spec: MollifierSpec = STIFFNESS_SPEC,
    axial_spec: MollifierSpec = AXIAL_SPEC,
    load_spec: MollifierSpec = LOAD_SPEC,
) -> CoefficientFamily:
    density = make_density(material, stiffness_spec, eps)
    return CoefficientFamily(
        eps=eps,
        stiffness=make_stiffness(material, stiffness_spec, eps),
        axial=make_axial(material, axial_spec, eps, density),
        load=make_load(material, load_spec, eps),
        density=density,
    )


@dataclass
class CoefficientSnapshot(CsvExportMixin):
    csv_header: tuple
    columns: list = field(default_factory=list)

    def csv_rows(self):
        return zip(*self.columns)


def stiffness_snapshot(family: CoefficientFamily, points: int = 513) -> CoefficientSnapshot:
    x = np.linspace(0.0, 1.0, points)
    return CoefficientSnapshot(("x", "c_eps"), [x, family.stiffness(x)])


def axial_snapshot(
    family: CoefficientFamily, horizon: float, x: float = 0.5, points: int = 513
) -> CoefficientSnapshot:
    t = np.linspace(0.0, horizon, points)
    values = np.array([float(family.axial(np.array([x]), s)[0]) for s in t])
    return CoefficientSnapshot(("t", "b_eps_at_x"), [t, values])


def weak_association(material: BeamMaterial, spec: MollifierSpec, eps_grid, phi) -> np.ndarray:
    """
    ∫_0^1 (c_ε - A)·φ dx по сетке ε
    """
    reference, _ = integrate.quad(
        lambda x: float(material.stiffness(x)) * phi(x), 0.0, 1.0, points=[material.x0]
    )
    gaps = []
    for eps in eps_grid:
        sampler = StiffnessField(material, spec, eps)
        width = spec.half_width(eps)
        breaks = [p for p in (material.x0 - width, material.x0, material.x0 + width) if 0.0 < p < 1.0]
        value, _ = integrate.quad(
            lambda x: float(sampler(x)) * phi(x), 0.0, 1.0, points=breaks, limit=200
        )
        gaps.append(value - reference)
    return np.array(gaps)
