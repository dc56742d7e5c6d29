"""
Равномерная сетка защемлённой балки на (0, 1) и эрмитовы кубические
функции формы. В узле две степени свободы: прогиб и угол поворота.
"""

from dataclasses import dataclass

import numpy as np

from apps.services.exceptions import GridMismatchError, MeshError


@dataclass(frozen=True, eq=False)
class BeamMesh:
    n_elems: int
    nodes: np.ndarray
    dof_map: np.ndarray
    clamped_mask: np.ndarray

    @property
    def h(self) -> float:
        return 1.0 / self.n_elems

    @property
    def n_raw(self) -> int:
        return self.dof_map.size

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(~self.clamped_mask)

    @property
    def n_active(self) -> int:
        return int(np.count_nonzero(~self.clamped_mask))

    @property
    def element_dofs(self) -> np.ndarray:
        """
        Глобальные номера (w_i, w'_i, w_{i+1}, w'_{i+1}) каждого элемента
        """
        return np.hstack([self.dof_map[:-1], self.dof_map[1:]])

    def expand(self, active_values: np.ndarray) -> np.ndarray:
        active_values = np.asarray(active_values, dtype=float)
        if active_values.shape[0] != self.n_active:
            raise GridMismatchError(
                f"expected {self.n_active} active dofs, got {active_values.shape[0]}"
            )
        raw = np.zeros((self.n_raw,) + active_values.shape[1:])
        raw[self.active] = active_values
        return raw

    def midpoint_dof(self) -> int:
        """
        Номер активной степени свободы прогиба в ближайшем к x = 1/2 узле
        """
        node = self.n_elems // 2
        return int(np.searchsorted(self.active, self.dof_map[node, 0]))


def build_mesh(n_elems: int) -> BeamMesh:
    if n_elems < 2:
        raise MeshError(f"clamped beam needs at least 2 elements, got {n_elems}")
    nodes = np.linspace(0.0, 1.0, n_elems + 1)
    dof_map = np.arange(2 * (n_elems + 1)).reshape(-1, 2)
    clamped_mask = np.zeros(dof_map.size, dtype=bool)
    clamped_mask[dof_map[0]] = True
    clamped_mask[dof_map[-1]] = True
    return BeamMesh(n_elems, nodes, dof_map, clamped_mask)


def shape_functions(xi, h: float):
    """
    Функции формы Эрмита и их первые и вторые производные по x на
    элементе длины h; xi ∈ [0, 1] - локальная координата.
    """
    xi = np.asarray(xi, dtype=float)
    xi2, xi3 = xi * xi, xi * xi * xi
    values = np.stack(
        [1.0 - 3.0 * xi2 + 2.0 * xi3, h * (xi - 2.0 * xi2 + xi3), 3.0 * xi2 - 2.0 * xi3, h * (xi3 - xi2)],
        axis=-1,
    )
    first = np.stack(
        [6.0 * (xi2 - xi) / h, 1.0 - 4.0 * xi + 3.0 * xi2, 6.0 * (xi - xi2) / h, 3.0 * xi2 - 2.0 * xi],
        axis=-1,
    )
    second = np.stack(
        [(12.0 * xi - 6.0) / h**2, (6.0 * xi - 4.0) / h, (6.0 - 12.0 * xi) / h**2, (6.0 * xi - 2.0) / h],
        axis=-1,
    )
    return values, first, second


def interpolate(mesh: BeamMesh, f, df) -> np.ndarray:
    """
    Эрмитов интерполянт: узловые значения f и f' на активных степенях свободы
    """
    raw = np.empty(mesh.n_raw)
    raw[mesh.dof_map[:, 0]] = f(mesh.nodes)
    raw[mesh.dof_map[:, 1]] = df(mesh.nodes)
    return raw[mesh.active]


def evaluate(mesh: BeamMesh, dofs: np.ndarray, x, derivative: int = 0) -> np.ndarray:
    """
    Значение конечноэлементной функции (или её производной) в точках x
    """
    raw = mesh.expand(dofs)
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    element = np.minimum((x / mesh.h).astype(int), mesh.n_elems - 1)
    xi = x / mesh.h - element
    basis = shape_functions(xi, mesh.h)[derivative]
    return np.sum(basis * raw[mesh.element_dofs[element]], axis=-1)
