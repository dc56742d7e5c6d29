"""
Сценарии запуска: одиночные траектории, серия по ε и сравнение режимов
"""

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from django.core.serializers.json import DjangoJSONEncoder

from apps.beam.assembly import MatrixSnapshot, assemble
from apps.beam.coercivity import CoercivityConstants, coercivity_constants
from apps.beam.mesh import build_mesh, interpolate
from apps.coefficients.fields import (
    CoefficientFamily,
    axial_snapshot,
    make_family,
    stiffness_snapshot,
)
from apps.dynamics.analysis import dominant_frequency
from apps.dynamics.problem import LoadForcing, Problem
from apps.dynamics.solvers import (
    PicardDiagnostics,
    e_norm,
    restart_horizon,
    solve_direct,
    solve_picard,
    trajectory_distance,
)
from apps.energy.ledger import (
    EnergyConstants,
    EnergyLedger,
    check_inequality,
    constants,
    contraction_factor,
    operator_bound,
)
from apps.energy.sweep import SweepMember, SweepReport, sweep_verdict
from apps.kernels.kernel import FractionalKernel, build_kernel, mollify_kernel
from apps.services.exceptions import ConfigError, PicardNonConvergence, ZenerBeamError
from apps.services.mixins import CsvExportMixin
from apps.services.utils import run_slug, solver_setting, unique_run_dir

from .config import RunConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VERDICT = 4


def bubble(x):
    return x**2 * (1.0 - x) ** 2


def bubble_derivative(x):
    return 2.0 * x * (1.0 - x) * (1.0 - 2.0 * x)


@dataclass
class ColumnTable(CsvExportMixin):
    csv_header: tuple
    columns: list = field(default_factory=list)

    def csv_rows(self):
        return zip(*self.columns)


@dataclass(frozen=True)
class Setup:
    """
    Собранная задача для одного значения ε (и одной скорости нагрузки)
    """

    eps: float
    family: CoefficientFamily
    problem: Problem
    coercivity: CoercivityConstants
    energy: EnergyConstants


@dataclass
class RunOutcome:
    scenario: str
    slug: str
    directory: Path
    holds: bool
    worst_margin: float
    files: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.holds else EXIT_VERDICT


def sweep_slug(config: RunConfig) -> str:
    return run_slug(
        "eps_sweep", alpha=config.alpha, theta=config.theta, T=config.horizon, n=config.n_elems
    )


def compare_slug(config: RunConfig) -> str:
    return run_slug(
        "compare", alpha=config.alpha, theta=config.theta, T=config.horizon, n=config.n_elems
    )


def base_kernel(config: RunConfig) -> FractionalKernel | None:
    if not config.foundation:
        return None
    return build_kernel(config.alpha, config.theta, config.horizon, config.dt)


def build_setup(
    config: RunConfig, eps: float, kernel: FractionalKernel | None = None, speed: float | None = None
) -> Setup:
    material = config.material if speed is None else replace(config.material, speed=speed)
    family = make_family(material, eps, config.stiffness_spec, config.axial_spec, config.load_spec)
    mesh = build_mesh(config.n_elems)
    system = assemble(
        mesh,
        family.stiffness,
        axial=family.axial if (material.P0 or material.P1) else None,
        density=family.density if material.density_enabled else None,
    )
    if kernel is not None and config.mollified_kernel:
        kernel = mollify_kernel(kernel, config.kernel_spec, eps)
    shape = interpolate(mesh, bubble, bubble_derivative)
    scale = eps**-config.initial_eps_power
    velocity = config.velocity * scale * shape if config.velocity else np.zeros_like(shape)
    problem = Problem(
        system,
        config.amplitude * scale * shape,
        velocity,
        config.horizon,
        config.dt,
        kernel,
        LoadForcing(system, family.load) if material.H0 else None,
    )
    coercivity = coercivity_constants(system, family.c0, family.c1, family.b_inf)
    energy = constants(coercivity, operator_bound(kernel), config.horizon, family.density.floor)
    return Setup(eps, family, problem, coercivity, energy)


def restart_plan(config: RunConfig, setup: Setup):
    if not config.restart:
        return None
    gamma_of = contraction_factor(setup.coercivity, setup.energy.C_L, setup.family.density.floor)
    return restart_horizon(gamma_of, config.horizon, config.dt)


def solve(config: RunConfig, setup: Setup):
    """
    Траектория в выбранном режиме и журнал энергии вдоль неё
    """
    problem = setup.problem
    if config.mode == "picard":
        trajectory, diagnostics = solve_picard(
            problem, config.tol, config.max_iter, restart_plan(config, setup)
        )
        ledger = EnergyLedger.from_trajectory(
            problem.system, setup.energy, problem.u0, problem.v0, trajectory
        )
        return trajectory, ledger, diagnostics
    ledger = EnergyLedger(problem.system, setup.energy, problem.u0, problem.v0)
    return solve_direct(problem, ledger=ledger), ledger, None


def write_failure(directory: Path, config: RunConfig, exc: ZenerBeamError) -> Path:
    record = {
        "scenario": config.scenario,
        "digest": config.digest,
        "error": type(exc).__name__,
        "message": str(exc),
    }
    for attribute in ("step", "eps", "field", "line"):
        if getattr(exc, attribute, None) is not None:
            record[attribute] = getattr(exc, attribute)
    if isinstance(exc, PicardNonConvergence):
        record["ratios"] = exc.diagnostics.ratios
    path = directory / "failure.json"
    path.write_text(json.dumps(record, cls=DjangoJSONEncoder, indent=2, sort_keys=True) + "\n")
    logger.warning("%s failed: %s", config.scenario, exc)
    return path


def write_summary(directory: Path, summary: dict) -> Path:
    path = directory / "summary.json"
    path.write_text(json.dumps(summary, cls=DjangoJSONEncoder, indent=2, sort_keys=True) + "\n")
    return path


def _guarded(config: RunConfig, directory: Path, action):
    try:
        return action()
    except ConfigError:
        raise
    except ZenerBeamError as exc:
        write_failure(directory, config, exc)
        raise


def _trajectory_files(config, directory, name, setup, trajectory, ledger) -> list:
    files = [
        trajectory.to_csv(directory / f"trajectory{name}.csv", stride=config.stride),
        ledger.to_csv(directory / f"ledger{name}.csv", stride=config.stride),
    ]
    if config.scenario == "free_vibration":
        dof = setup.problem.system.mesh.midpoint_dof()
        series = ColumnTable(("t", "u_mid"), [trajectory.times, trajectory.u[:, dof]])
        files.append(series.to_csv(directory / f"midpoint{name}.csv"))
    return files


def _snapshot_files(config: RunConfig, directory: Path, setup: Setup) -> list:
    """
    Сглаженные коэффициенты и матрицы K0, M для текущего ε
    """
    family = setup.family
    system = setup.problem.system
    files = [stiffness_snapshot(family).to_csv(directory / "stiffness.csv")]
    if config.material.P0 or config.material.P1:
        files.append(axial_snapshot(family, config.horizon).to_csv(directory / "axial.csv"))
    files.append(MatrixSnapshot(system.K0).to_csv(directory / "K0.csv"))
    files.append(MatrixSnapshot(system.M).to_csv(directory / "M.csv"))
    return files


def run_single(config: RunConfig) -> RunOutcome:
    directory = unique_run_dir(config.output, config.slug)
    kernel = _guarded(config, directory, lambda: base_kernel(config))
    eps = config.eps_grid[0]
    speeds = config.speeds if config.scenario == "moving_load" else (None,)
    outcome = RunOutcome(config.scenario, config.slug, directory, True, math.inf)
    members = []
    for speed in speeds:
        name = "" if speed is None else "_" + run_slug("speed", c=speed)

        def action():
            setup = build_setup(config, eps, kernel, speed)
            return (setup,) + solve(config, setup)

        setup, trajectory, ledger, diagnostics = _guarded(config, directory, action)
        verdict = check_inequality(ledger)
        outcome.files += _trajectory_files(config, directory, name, setup, trajectory, ledger)
        outcome.holds = outcome.holds and verdict.holds
        outcome.worst_margin = min(outcome.worst_margin, verdict.worst_margin)
        member = {
            "speed": speed,
            "holds": verdict.holds,
            "worst_margin": verdict.worst_margin,
            "worst_step": verdict.worst_step,
        }
        if config.scenario == "free_vibration":
            dof = setup.problem.system.mesh.midpoint_dof()
            member["dominant_frequency"] = dominant_frequency(trajectory, dof)
        if diagnostics is not None:
            member["picard_iterations"] = diagnostics.iterations
            member["picard_ratios"] = diagnostics.ratios
            member["gamma_T1"] = diagnostics.gamma_T
        members.append(member)

    if config.snapshots:
        outcome.files += _snapshot_files(config, directory, setup)
    outcome.summary = {
        "scenario": config.scenario,
        "mode": config.mode,
        "digest": config.digest,
        "eps": eps,
        "mollified": config.mollified_kernel,
        "energy": asdict(setup.energy),
        "coercivity": setup.coercivity.as_dict(),
        "members": members,
        "holds": outcome.holds,
    }
    outcome.files.append(write_summary(directory, outcome.summary))
    logger.info("%s finished: holds=%s margin=%g", config.scenario, outcome.holds, outcome.worst_margin)
    return outcome


def _sweep_member(config: RunConfig, kernel, eps: float):
    try:
        setup = build_setup(config, eps, kernel)
        trajectory, ledger, _ = solve(config, setup)
    except ZenerBeamError as exc:
        if getattr(exc, "eps", None) is None:
            exc.eps = eps
        raise
    return SweepMember.from_ledger(eps, ledger), ledger


def run_sweep(config: RunConfig) -> RunOutcome:
    """
    Траектории по всей сетке ε в пуле потоков; файлы пишутся по порядку сетки
    """
    slug = sweep_slug(config)
    directory = unique_run_dir(config.output, slug)
    grid = config.eps_grid
    if config.mollified_kernel and not config.mollified:
        logger.info("eps_sweep: alpha=%g <= 1/2, using the mollified kernel", config.alpha)
    kernel = _guarded(config, directory, lambda: base_kernel(config))

    def action():
        with ThreadPoolExecutor(max_workers=solver_setting("WORKERS")) as pool:
            return list(pool.map(lambda eps: _sweep_member(config, kernel, eps), grid))

    results = _guarded(config, directory, action)
    report: SweepReport = _guarded(
        config, directory, lambda: sweep_verdict([member for member, _ in results])
    )
    outcome = RunOutcome(
        "eps_sweep",
        slug,
        directory,
        report.holds,
        min(check_inequality(ledger).worst_margin for _, ledger in results),
    )
    for index, (member, ledger) in enumerate(results):
        outcome.files.append(
            ledger.to_csv(directory / f"ledger_{index:02d}.csv", stride=config.stride)
        )
    outcome.files.append(report.to_csv(directory / "report.csv"))
    outcome.summary = {
        "scenario": "eps_sweep",
        "digest": config.digest,
        "eps": list(grid),
        "mollified": config.mollified_kernel,
        "fitted_power": report.fitted_power,
        "rvalue": report.rvalue,
        "bound_power": report.bound_power,
        "bound_rvalue": report.bound_rvalue,
        "super_polynomial": report.super_polynomial,
        "bracketed": report.bracketed,
        "notes": report.notes,
        "holds": report.holds,
    }
    outcome.files.append(write_summary(directory, outcome.summary))
    return outcome


def run_scenario(config: RunConfig) -> RunOutcome:
    if config.scenario == "eps_sweep":
        return run_sweep(config)
    return run_single(config)


@dataclass
class ComparisonReport:
    distance: float
    size: float
    tol: float
    converged: bool
    diagnostics: PicardDiagnostics
    directory: Path

    @property
    def passes(self) -> bool:
        return self.converged and self.distance <= 10.0 * self.tol * self.size

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.passes else EXIT_VERDICT


def compare_modes(config: RunConfig) -> ComparisonReport:
    """
    Расстояние в норме E_V между прямым решением и пределом итераций Пикара
    """
    slug = compare_slug(config)
    directory = unique_run_dir(config.output, slug)

    def action():
        setup = build_setup(config, config.eps_grid[0], base_kernel(config))
        return setup, solve_direct(setup.problem)

    setup, direct = _guarded(config, directory, action)
    problem = setup.problem
    size = e_norm(problem.system.V_gram, direct.u, direct.times)
    try:
        picard, diagnostics = solve_picard(
            problem, config.tol, config.max_iter, restart_plan(config, setup)
        )
    except PicardNonConvergence as exc:
        report = ComparisonReport(math.inf, size, config.tol, False, exc.diagnostics, directory)
    except ConfigError:
        raise
    except ZenerBeamError as exc:
        write_failure(directory, config, exc)
        raise
    else:
        distance = trajectory_distance(problem, direct, picard)
        report = ComparisonReport(distance, size, config.tol, True, diagnostics, directory)

    write_summary(
        directory,
        {
            "distance": report.distance if math.isfinite(report.distance) else None,
            "size": report.size,
            "tol": report.tol,
            "converged": report.converged,
            "passes": report.passes,
            "iterations": report.diagnostics.iterations,
            "ratios": report.diagnostics.ratios,
            "gamma_T1": report.diagnostics.gamma_T,
        },
    )
    logger.info(
        "compare: distance=%g size=%g converged=%s passes=%s",
        report.distance,
        report.size,
        report.converged,
        report.passes,
    )
    return report
