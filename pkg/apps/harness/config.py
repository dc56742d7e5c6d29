"""
Файл конфигурации запуска (TOML) и его проверка формами по таблицам
"""

import hashlib
import logging
import re
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, replace
from pathlib import Path

from apps.coefficients.fields import BeamMaterial
from apps.kernels.mollifiers import MollifierSpec
from apps.services.exceptions import ConfigError, KernelDomainError
from apps.services.utils import default_eps_grid, run_slug, solver_setting

from .forms import TABLE_FORMS

logger = logging.getLogger(__name__)

# Значения по умолчанию, которые сценарий подставляет под пользовательские
PRESETS = {
    "free_vibration": {},
    "stepped_stiffness": {"material": {"EI2": 1.0}},
    "axial_impulse": {"material": {"EI2": 1.0, "P1": 0.1}},
    "moving_load": {"material": {"H0": 1.0}, "scenario": {"amplitude": 0.0}},
    "eps_sweep": {"material": {"EI2": 1.0, "P1": 0.1}},
    "picard": {"solver": {"mode": "picard"}},
}

_LOCATION = re.compile(r"line (\d+), column (\d+)")


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    material: BeamMaterial
    alpha: float
    theta: float
    horizon: float
    dt: float
    n_elems: int = 64
    foundation: bool = True
    mollified: bool = False
    amplitude: float = 1e-2
    velocity: float = 0.0
    initial_eps_power: float = 0.0
    speeds: tuple = ()
    eps: tuple = ()
    stiffness_spec: MollifierSpec = MollifierSpec("power", exponent=0.5)
    axial_spec: MollifierSpec = MollifierSpec("log")
    load_spec: MollifierSpec = MollifierSpec("power", exponent=0.5)
    kernel_spec: MollifierSpec = MollifierSpec("log")
    mode: str = "direct"
    tol: float = 1e-8
    max_iter: int = 50
    restart: bool = True
    output: Path = field(default_factory=lambda: Path(solver_setting("OUTPUT_DIR")))
    stride: int = 1
    snapshots: bool = False
    digest: str = ""

    @property
    def slug(self) -> str:
        return run_slug(
            self.scenario, alpha=self.alpha, theta=self.theta, T=self.horizon, n=self.n_elems
        )

    @property
    def mollified_kernel(self) -> bool:
        """
        Сглаженное ядро l_ε: по ключу mollified, а в серии по ε также при α ≤ 1/2
        """
        if not self.foundation:
            return False
        return self.mollified or (self.scenario == "eps_sweep" and self.alpha <= 0.5)

    @property
    def eps_grid(self) -> tuple:
        return self.eps or tuple(float(value) for value in default_eps_grid())

    def with_output(self, directory) -> "RunConfig":
        return replace(self, output=Path(directory))


def _parse(path: Path) -> dict:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        match = _LOCATION.search(str(exc))
        line = int(match.group(1)) if match else getattr(exc, "lineno", None)
        raise ConfigError(f"{path}: {exc}", line=line) from exc


def _clean_table(name: str, data, defaults: dict) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"[{name}] must be a table", field=name)
    form_class = TABLE_FORMS[name]
    unknown = sorted(set(data) - set(form_class.base_fields))
    if unknown:
        raise ConfigError(f"[{name}] unknown key {unknown[0]!r}", field=unknown[0])
    form = form_class(data, defaults)
    if not form.is_valid():
        errors = form.errors.as_data()
        key = next(iter(errors))
        message = " ".join(errors[key][0].messages)
        raise ConfigError(f"[{name}] {key}: {message}", field=key)
    return form.cleaned_data


def _spec(tables: dict, prefix: str) -> MollifierSpec:
    regularization = tables["regularization"]
    try:
        return MollifierSpec(
            regularization[f"{prefix}_rule"], exponent=regularization[f"{prefix}_exponent"]
        )
    except KernelDomainError as exc:
        raise ConfigError(f"[regularization] {exc}", field=f"{prefix}_exponent") from exc


def build_config(raw: dict, digest: str = "") -> RunConfig:
    """
    RunConfig из разобранного TOML: неизвестные таблицы и ключи отклоняются
    """
    unknown = sorted(set(raw) - set(TABLE_FORMS))
    if unknown:
        raise ConfigError(f"unknown table [{unknown[0]}]", field=unknown[0])
    scenario = raw.get("scenario", {})
    name = scenario.get("name") if isinstance(scenario, dict) else None
    preset = PRESETS.get(name, {})

    tables = {
        table: _clean_table(table, raw.get(table, {}), preset.get(table, {}))
        for table in TABLE_FORMS
    }
    material_data = tables["material"]
    material = BeamMaterial(**material_data)
    horizon = tables["time"]["T"]
    if material.P1 != 0.0:
        material.check_horizon(horizon)

    output = tables["output"]["directory"]
    output = Path(output) if output else Path(solver_setting("OUTPUT_DIR"))

    kernel = tables["kernel"]
    solver = tables["solver"]
    config = RunConfig(
        scenario=tables["scenario"]["name"],
        material=material,
        alpha=kernel["alpha"],
        theta=kernel["theta"],
        horizon=horizon,
        dt=tables["time"]["dt"],
        n_elems=tables["mesh"]["n_elems"],
        foundation=kernel["foundation"],
        mollified=kernel["mollified"],
        amplitude=tables["scenario"]["amplitude"],
        velocity=tables["initial"]["velocity"],
        initial_eps_power=tables["initial"]["eps_power"],
        speeds=tuple(tables["scenario"]["speeds"]) or (material.speed,),
        eps=tuple(tables["regularization"]["eps"]),
        stiffness_spec=_spec(tables, "stiffness"),
        axial_spec=_spec(tables, "axial"),
        load_spec=_spec(tables, "load"),
        kernel_spec=_spec(tables, "kernel"),
        mode=solver["mode"],
        tol=solver["tol"],
        max_iter=solver["max_iter"],
        restart=solver["restart"],
        output=output,
        stride=tables["output"]["stride"],
        snapshots=tables["output"]["snapshots"],
        digest=digest,
    )
    logger.info("config loaded: scenario=%s mode=%s slug=%s", config.scenario, config.mode, config.slug)
    return config


def load_config(path) -> RunConfig:
    path = Path(path)
    raw = _parse(path)
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    return build_config(raw, digest)
