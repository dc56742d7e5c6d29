"""
Энергия и спектральный анализ траекторий
"""

import math

import numpy as np
from scipy import fft

from apps.services.exceptions import GridMismatchError

from .problem import Problem, Trajectory


def mechanical_energy(problem: Problem, u: np.ndarray, v: np.ndarray) -> float:
    """
    ½vᵀMv + ½uᵀK0u + ½(1/θ)uᵀHu; слагаемое основания только при включённом L
    """
    system = problem.system
    energy = 0.5 * v @ system.M @ v + 0.5 * u @ system.K0 @ u
    if problem.kernel is not None:
        energy += 0.5 * problem.kernel.instantaneous * (u @ system.H_gram @ u)
    return float(energy)


def energy_history(problem: Problem, trajectory: Trajectory) -> np.ndarray:
    return np.array([mechanical_energy(problem, u, v) for u, v in zip(trajectory.u, trajectory.v)])


def dominant_frequency(trajectory: Trajectory, dof: int, padding: int = 16) -> float:
    """
    Круговая частота максимума спектра (рад/с): БПФ с дополнением нулями и
    параболическим уточнением пика
    """
    if not 0 <= dof < trajectory.u.shape[1]:
        raise GridMismatchError(f"dof {dof} is outside 0..{trajectory.u.shape[1] - 1}")
    signal = trajectory.u[:, dof] - trajectory.u[:, dof].mean()
    dt = trajectory.times[1] - trajectory.times[0]
    size = fft.next_fast_len(padding * signal.size)
    spectrum = np.abs(fft.rfft(signal * np.hanning(signal.size), n=size))
    k = int(np.argmax(spectrum[1:-1])) + 1
    left, centre, right = spectrum[k - 1], spectrum[k], spectrum[k + 1]
    curvature = left - 2.0 * centre + right
    shift = 0.5 * (left - right) / curvature if curvature != 0.0 else 0.0
    return 2.0 * math.pi * (k + shift) / (size * dt)
