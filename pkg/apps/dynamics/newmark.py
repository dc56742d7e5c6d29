"""
Шаг Ньюмарка (β = 1/4, γ = 1/2 по умолчанию) с разделением оператора памяти:
мгновенная часть L неявно входит в эффективную жёсткость, свёртка с
прошлыми перемещениями - явно в правую часть.
"""

import logging

import numpy as np
from scipy import linalg

from apps.services.exceptions import StepFailure

from .problem import Problem, Trajectory, TrajectoryState

logger = logging.getLogger(__name__)


class NewmarkStepper:
    def __init__(self, problem: Problem, frozen_memory: np.ndarray | None = None):
        """
        frozen_memory - заданная (l ∗ u)(t_n) по всем узлам (итерации Пикара);
        без неё история свёртки берётся из уже посчитанных перемещений.
        """
        self.problem = problem
        self.system = problem.system
        self.frozen_memory = frozen_memory
        beta, gamma, dt = problem.beta, problem.gamma, problem.dt

        # constants for the Newmark integration
        self.a0 = 1.0 / (beta * dt**2)
        self.a2 = 1.0 / (beta * dt)
        self.a3 = 1.0 / (2.0 * beta) - 1.0
        self.a6 = dt * (1.0 - gamma)
        self.a7 = gamma * dt

        kernel = problem.kernel
        self.instantaneous = 0.0 if kernel is None else kernel.instantaneous
        self.implicit = self.instantaneous
        if kernel is not None and frozen_memory is None:
            self.implicit += kernel.weights[0]
        self._static = self.a0 * self.system.M + self.system.K0 + self.implicit * self.system.H_gram
        self._K1 = self.system.K1.copy()
        self.varying = self.system.axial is not None and getattr(
            self.system.axial, "time_dependent", True
        )
        self._factor = None if self.varying else self._factorize(0, self._static + self._K1)

    @staticmethod
    def _factorize(step: int, matrix: np.ndarray):
        try:
            factor = linalg.lu_factor(matrix, check_finite=True)
        except (linalg.LinAlgError, ValueError) as exc:
            raise StepFailure(step, f"effective operator cannot be factorized: {exc}") from exc
        if np.any(np.diag(factor[0]) == 0.0):
            raise StepFailure(step, "effective operator is singular")
        return factor

    def _memory(self, trajectory: Trajectory, n: int) -> np.ndarray:
        kernel = self.problem.kernel
        if kernel is None:
            return np.zeros(self.system.mesh.n_active)
        if self.frozen_memory is not None:
            return self.frozen_memory[n]
        return kernel.history_sum(trajectory.u, n)

    def start(self, trajectory: Trajectory, step: int = 0) -> TrajectoryState:
        """
        Начальное ускорение из уравнения движения в узле step
        """
        t = trajectory.times[step]
        u, v = trajectory.u[step], trajectory.v[step]
        force, norm2 = self.problem.force(t)
        K1 = self.system.axial_operator(t, out=self._K1) if self.varying else self._K1
        foundation = self.instantaneous * u
        if step > 0:
            foundation = foundation + self._full_memory(trajectory, step)
        rhs = force - (self.system.K0 + K1) @ u - self.system.H_gram @ foundation
        try:
            a = linalg.solve(self.system.M, rhs, assume_a="pos")
        except linalg.LinAlgError as exc:
            raise StepFailure(step, f"mass matrix solve failed: {exc}") from exc
        trajectory.a[step] = a
        trajectory.load_norms[step] = norm2
        return TrajectoryState(step, t, u, v, a, trajectory.u, norm2)

    def _full_memory(self, trajectory: Trajectory, n: int) -> np.ndarray:
        kernel = self.problem.kernel
        if kernel is None:
            return 0.0
        if self.frozen_memory is not None:
            return self.frozen_memory[n]
        return kernel.history_sum(trajectory.u, n) + kernel.weights[0] * trajectory.u[n]

    def step(self, state: TrajectoryState, trajectory: Trajectory) -> TrajectoryState:
        n = state.step + 1
        t = trajectory.times[n]
        force, norm2 = self.problem.force(t)
        factor = self._factor
        if self.varying:
            self.system.axial_operator(t, out=self._K1)
            factor = self._factorize(n, self._static + self._K1)

        memory = self._memory(trajectory, n)
        inertia = self.system.M @ (self.a0 * state.u + self.a2 * state.v + self.a3 * state.a)
        rhs = force + inertia - self.system.H_gram @ memory
        u = linalg.lu_solve(factor, rhs)
        if not np.all(np.isfinite(u)):
            raise StepFailure(n, "non-finite displacement")

        a = self.a0 * (u - state.u) - self.a2 * state.v - self.a3 * state.a
        v = state.v + self.a6 * state.a + self.a7 * a
        trajectory.u[n], trajectory.v[n], trajectory.a[n] = u, v, a
        trajectory.load_norms[n] = norm2
        return TrajectoryState(
            n, t, trajectory.u[n], trajectory.v[n], trajectory.a[n], trajectory.u, norm2
        )

    def march(self, trajectory: Trajectory, start: int = 0, stop: int | None = None, observer=None):
        """
        Шаги start -> stop; observer(state) вызывается в каждом узле
        """
        stop = self.problem.steps if stop is None else stop
        state = self.start(trajectory, start)
        if observer is not None:
            observer(state)
        for _ in range(start, stop):
            state = self.step(state, trajectory)
            if observer is not None:
                observer(state)
        return state
