"""
Прямое интегрирование и итерации Пикара для задачи с оператором памяти
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from apps.kernels.kernel import convolve_L
from apps.services.exceptions import ConfigError, PicardNonConvergence

from .newmark import NewmarkStepper
from .problem import Problem, Trajectory

logger = logging.getLogger(__name__)


def e_norm(gram: np.ndarray, values: np.ndarray, times: np.ndarray) -> float:
    """
    (∫ ‖u(t)‖² dt)^{1/2} по формуле трапеций; ‖·‖ задаётся матрицей Грама
    """
    if times.size < 2:
        return 0.0
    pointwise = np.einsum("ni,ij,nj->n", values, gram, values)
    return math.sqrt(max(integrate.trapezoid(pointwise, times), 0.0))


def trajectory_distance(problem: Problem, first: Trajectory, second: Trajectory) -> float:
    return e_norm(problem.system.V_gram, first.u - second.u, first.times)


def _initial_trajectory(problem: Problem) -> Trajectory:
    trajectory = Trajectory.empty(problem)
    trajectory.u[0] = problem.u0
    trajectory.v[0] = problem.v0
    return trajectory


def solve_direct(problem: Problem, ledger=None) -> Trajectory:
    """
    Траектория на [0, T]; ledger.record(state) вызывается в каждом узле
    """
    trajectory = _initial_trajectory(problem)
    stepper = NewmarkStepper(problem)
    observer = ledger.record if ledger is not None else None
    stepper.march(trajectory, observer=observer)
    logger.info(
        "direct solve finished: steps=%d foundation=%s", problem.steps, problem.foundation
    )
    return trajectory


@dataclass(frozen=True)
class RestartPlan:
    T1: float
    gamma_T1: float
    segments: tuple

    @property
    def restarted(self) -> bool:
        return len(self.segments) > 1


def restart_horizon(
    gamma_of: Callable[[float], float], horizon: float, dt: float, target: float = 0.9
) -> RestartPlan:
    """
    Разбиение [0, T] на отрезки длины T1 с γ(T1) < target; границы в узлах сетки.

    Последний отрезок короче двух шагов не остаётся: граница сдвигается на узел
    назад, а при chunk = 2 он сливается с предыдущим. T1 и γ_T1 в плане
    считаются по самому длинному отрезку.
    """
    steps = int(round(horizon / dt))
    full = gamma_of(horizon)
    if full < target:
        return RestartPlan(horizon, full, ((0, steps),))
    T1 = optimize.bisect(lambda t: gamma_of(t) - target, 0.0, horizon, xtol=1e-12)
    chunk = int(math.floor(T1 / dt))
    if chunk < 2:
        raise ConfigError(
            f"restart segment T1={T1:g} is shorter than 2*dt={2 * dt:g}", field="dt"
        )
    bounds = list(range(0, steps, chunk)) + [steps]
    if len(bounds) > 2 and bounds[-1] - bounds[-2] < 2:
        if chunk > 2:
            bounds[-2] -= 1
        else:
            del bounds[-2]
    segments = tuple(zip(bounds[:-1], bounds[1:]))
    longest = max(stop - start for start, stop in segments) * dt
    logger.info("restart plan: T1=%g segments=%d", T1, len(segments))
    return RestartPlan(longest, gamma_of(longest), segments)


@dataclass
class PicardDiagnostics:
    iterates: list = field(default_factory=list)
    gamma_T: float = math.nan
    T1: float = math.nan
    segments: tuple = ()
    converged: bool = False

    @property
    def ratios(self) -> list:
        """
        Отношения соседних разностей ‖u_k - u_{k-1}‖_{E_V} по каждому отрезку
        """
        result = []
        for differences in self.iterates:
            values = np.asarray(differences, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                result.append(list(np.where(values[:-1] > 0.0, values[1:] / values[:-1], 0.0)))
        return result

    @property
    def iterations(self) -> list:
        return [len(differences) for differences in self.iterates]


def solve_picard(
    problem: Problem,
    tol: float = 1e-8,
    max_iter: int = 50,
    plan: RestartPlan | None = None,
) -> tuple[Trajectory, PicardDiagnostics]:
    """
    Итерации M u_k'' + (K0 + K1 + H/θ) u_k = F - H·(l ∗ u_{k-1}), u_0 ≡ 0.

    На каждом отрезке плана уже найденная часть траектории фиксирована.
    """
    steps = problem.steps
    segments = plan.segments if plan is not None else ((0, steps),)
    diagnostics = PicardDiagnostics(
        gamma_T=plan.gamma_T1 if plan is not None else math.nan,
        T1=plan.T1 if plan is not None else problem.horizon,
        segments=segments,
    )
    kernel = problem.kernel
    if kernel is None or kernel.is_zero:
        trajectory = solve_direct(problem)
        diagnostics.iterates.append([0.0])
        diagnostics.converged = True
        return trajectory, diagnostics

    system = problem.system
    current = _initial_trajectory(problem)
    for start, stop in segments:
        window = slice(start, stop + 1)
        times = current.times[window]
        previous = current.u.copy()
        # начальное приближение u_0 ≡ 0 на ещё не найденной части отрезка
        previous[start + 1 if start else 0 : stop + 1] = 0.0
        differences = []
        diagnostics.iterates.append(differences)
        for k in range(1, max_iter + 1):
            memory = convolve_L(previous, kernel) - kernel.instantaneous * previous
            candidate = Trajectory(
                current.times,
                current.u.copy(),
                current.v.copy(),
                current.a.copy(),
                current.load_norms.copy(),
            )
            NewmarkStepper(problem, frozen_memory=memory).march(candidate, start, stop)
            difference = e_norm(system.V_gram, candidate.u[window] - previous[window], times)
            size = e_norm(system.V_gram, candidate.u[window], times)
            differences.append(difference)
            logger.debug("picard segment %d-%d iteration %d: diff=%g", start, stop, k, difference)
            current, previous = candidate, candidate.u
            if difference <= tol * size:
                break
        else:
            logger.warning("picard iteration did not converge on %d-%d", start, stop)
            raise PicardNonConvergence(
                diagnostics,
                f"segment [{start}, {stop}] not converged after {max_iter} iterations, "
                f"ratios={diagnostics.ratios[-1]}",
            )
    diagnostics.converged = True
    logger.info("picard converged: iterations=%s", diagnostics.iterations)
    return current, diagnostics
