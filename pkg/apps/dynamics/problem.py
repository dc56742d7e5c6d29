"""
Полудискретная задача M u'' + K0 u + K1(t) u + H·(Lu) = F(t) и её траектории
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from apps.beam.assembly import BeamSystem, load_vector
from apps.kernels.kernel import FractionalKernel
from apps.services.exceptions import ConfigError, GridMismatchError
from apps.services.mixins import CsvExportMixin
from apps.services.utils import solver_setting


@dataclass(frozen=True)
class LoadForcing:
    """
    Согласованная нагрузка от сэмплера h(x, t)
    """

    system: BeamSystem
    load: object

    def __call__(self, t: float):
        return load_vector(self.system, self.load, t)


@dataclass(eq=False)
class Problem:
    system: BeamSystem
    u0: np.ndarray
    v0: np.ndarray
    horizon: float
    dt: float
    kernel: FractionalKernel | None = None
    forcing: Callable | None = None
    beta: float = field(default_factory=lambda: solver_setting("NEWMARK_BETA"))
    gamma: float = field(default_factory=lambda: solver_setting("NEWMARK_GAMMA"))

    def __post_init__(self):
        n = self.system.mesh.n_active
        self.u0 = np.asarray(self.u0, dtype=float)
        self.v0 = np.asarray(self.v0, dtype=float)
        if self.u0.shape != (n,) or self.v0.shape != (n,):
            raise GridMismatchError(f"initial data must have {n} active dofs")
        if not 0.0 < self.dt < self.horizon:
            raise ConfigError("dt must lie in (0, T)", field="dt")
        if not 2.0 * self.beta >= self.gamma >= 0.5:
            raise ConfigError("Newmark parameters need 2*beta >= gamma >= 1/2", field="beta")
        if self.kernel is not None and (
            self.kernel.times.size != self.steps + 1 or not np.isclose(self.kernel.dt, self.dt)
        ):
            raise GridMismatchError(
                f"kernel grid ({self.kernel.steps} steps of {self.kernel.dt:g}) "
                f"does not match the time grid ({self.steps} steps of {self.dt:g})"
            )

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.steps + 1)

    @property
    def foundation(self) -> bool:
        return self.kernel is not None

    def force(self, t: float) -> tuple[np.ndarray, float]:
        """
        Правая часть F(t) и ‖h(·,t)‖²_H
        """
        if self.forcing is None:
            return np.zeros(self.system.mesh.n_active), 0.0
        return self.forcing(t)

    def scaled(self, factor: float) -> "Problem":
        forcing = self.forcing
        scaled_forcing = None
        if forcing is not None:

            def scaled_forcing(t):
                values, norm2 = forcing(t)
                return factor * values, factor * factor * norm2

        return Problem(
            self.system,
            factor * self.u0,
            factor * self.v0,
            self.horizon,
            self.dt,
            self.kernel,
            scaled_forcing,
            self.beta,
            self.gamma,
        )


@dataclass(eq=False)
class Trajectory(CsvExportMixin):
    """
    Перемещения, скорости и ускорения активных степеней свободы в узлах t_n
    """

    times: np.ndarray
    u: np.ndarray
    v: np.ndarray
    a: np.ndarray
    load_norms: np.ndarray

    @classmethod
    def empty(cls, problem: Problem) -> "Trajectory":
        shape = (problem.steps + 1, problem.system.mesh.n_active)
        return cls(
            problem.times,
            np.zeros(shape),
            np.zeros(shape),
            np.zeros(shape),
            np.zeros(problem.steps + 1),
        )

    @property
    def csv_header(self):
        return ("t",) + tuple(f"u{i}" for i in range(self.u.shape[1]))

    def csv_rows(self):
        return (np.concatenate(([t], row)) for t, row in zip(self.times, self.u))


@dataclass(eq=False)
class TrajectoryState:
    """
    Состояние на шаге step; history - буфер перемещений u_0..u_step
    """

    step: int
    t: float
    u: np.ndarray
    v: np.ndarray
    a: np.ndarray
    history: np.ndarray
    load_norm2: float = 0.0

    @property
    def history_length(self) -> int:
        return self.step + 1
