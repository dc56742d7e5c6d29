"""
Сборка операторов полудискретной задачи на эрмитовых элементах.

K0 - билинейная форма a0(u,v) = ⟨c u'', v''⟩, K1(t) - a1(u,v) = ⟨b(t) u'', v⟩,
M - масса с плотностью, H_gram - скалярное произведение L²(0,1),
V_gram - полное скалярное произведение H²: Σ_k ⟨u^(k), v^(k)⟩, k = 0..2.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import linalg

from apps.services.exceptions import AssemblyError, ConstantsError, GridMismatchError
from apps.services.mixins import CsvExportMixin
from apps.services.utils import solver_setting

from .mesh import BeamMesh, shape_functions

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Quadrature:
    """
    Узлы x[e, q] и веса w[e, q] квадратуры Гаусса на каждом элементе,
    значения функций формы в узлах (одинаковы для всех элементов).
    """

    x: np.ndarray
    w: np.ndarray
    values: np.ndarray
    first: np.ndarray
    second: np.ndarray


@lru_cache(maxsize=32)
def _reference_rule(points: int, levels: int):
    nodes, weights = np.polynomial.legendre.leggauss(points)
    nodes, weights = 0.5 * (nodes + 1.0), 0.5 * weights
    offsets = np.arange(levels) / levels
    xi = (offsets[:, None] + nodes[None, :] / levels).ravel()
    return xi, np.tile(weights / levels, levels)


def quadrature_levels(h: float, width: float | None) -> int:
    """
    Дробление элемента для сглаженных коэффициентов уже элемента (до 2 уровней)
    """
    if width is None or width >= h:
        return 1
    return 2 if width >= 0.5 * h else 4


@lru_cache(maxsize=8)
def element_quadrature(mesh: BeamMesh, levels: int = 1) -> Quadrature:
    xi, weights = _reference_rule(solver_setting("GAUSS_POINTS"), levels)
    values, first, second = shape_functions(xi, mesh.h)
    x = mesh.nodes[:-1, None] + mesh.h * xi[None, :]
    w = np.broadcast_to(mesh.h * weights, x.shape)
    return Quadrature(x, w, values, first, second)


def _resolution(sampler) -> float | None:
    spec = getattr(sampler, "spec", None)
    if spec is None:
        return None
    return spec.half_width(sampler.eps)


def _sample(name: str, values, shape) -> np.ndarray:
    values = np.broadcast_to(np.asarray(values, dtype=float), shape)
    if not np.all(np.isfinite(values)):
        raise AssemblyError(f"{name} sampler returned non-finite values")
    return values


def _scatter(mesh: BeamMesh, blocks: np.ndarray) -> np.ndarray:
    dofs = mesh.element_dofs
    matrix = np.zeros((mesh.n_raw, mesh.n_raw))
    np.add.at(matrix, (dofs[:, :, None], dofs[:, None, :]), blocks)
    active = mesh.active
    return matrix[np.ix_(active, active)]


def _gram(quad: Quadrature, weight, left, right) -> np.ndarray:
    return np.einsum("eq,qi,qj->eij", quad.w * weight, left, right)


@dataclass(eq=False)
class BeamSystem:
    mesh: BeamMesh
    M: np.ndarray
    H_gram: np.ndarray
    K0: np.ndarray
    V_gram: np.ndarray
    K1: np.ndarray
    t: float = 0.0
    axial: object = None
    quadrature: Quadrature = field(default=None, repr=False)

    def axial_operator(self, t: float, out: np.ndarray | None = None) -> np.ndarray:
        """
        K1(t); при заданном out матрица пересобирается на месте
        """
        if self.axial is None:
            if out is None:
                return np.zeros_like(self.K0)
            out[...] = 0.0
            return out
        quad = self.quadrature
        b = _sample("axial", self.axial(quad.x.ravel(), t), quad.x.size).reshape(quad.x.shape)
        matrix = _scatter(self.mesh, _gram(quad, b, quad.values, quad.second))
        if out is None:
            return matrix
        out[...] = matrix
        return out


def assemble(mesh: BeamMesh, stiffness, axial=None, density=None, t: float = 0.0) -> BeamSystem:
    widths = [w for w in (_resolution(stiffness), _resolution(density)) if w]
    levels = quadrature_levels(mesh.h, min(widths) if widths else None)
    quad = element_quadrature(mesh, levels)
    points = quad.x.ravel()

    c = _sample("stiffness", stiffness(points), points.size).reshape(quad.x.shape)
    rho = (
        _sample("density", density(points), points.size).reshape(quad.x.shape)
        if density is not None
        else np.ones_like(quad.x)
    )
    unit = np.ones_like(quad.x)
    K0 = _scatter(mesh, _gram(quad, c, quad.second, quad.second))
    M = _scatter(mesh, _gram(quad, rho, quad.values, quad.values))
    H_gram = _scatter(mesh, _gram(quad, unit, quad.values, quad.values))
    V_blocks = (
        _gram(quad, unit, quad.values, quad.values)
        + _gram(quad, unit, quad.first, quad.first)
        + _gram(quad, unit, quad.second, quad.second)
    )
    V_gram = _scatter(mesh, V_blocks)
    system = BeamSystem(mesh, M, H_gram, K0, V_gram, np.zeros_like(K0), t, axial, quad)
    if axial is not None:
        system.axial_operator(t, out=system.K1)
    logger.info(
        "system assembled: n_elems=%d active=%d quadrature levels=%d",
        mesh.n_elems,
        mesh.n_active,
        levels,
    )
    return system


def load_vector(system: BeamSystem, load, t: float) -> tuple[np.ndarray, float]:
    """
    Согласованные узловые силы ∫h φ_i и ‖h(·,t)‖²_H
    """
    mesh = system.mesh
    levels = quadrature_levels(mesh.h, _resolution(load))
    quad = system.quadrature
    if levels > 1 or quad is None:
        quad = element_quadrature(mesh, levels)
    h = _sample("load", load(quad.x.ravel(), t), quad.x.size).reshape(quad.x.shape)
    blocks = np.einsum("eq,qi->ei", quad.w * h, quad.values)
    raw = np.zeros(mesh.n_raw)
    np.add.at(raw, mesh.element_dofs, blocks)
    return raw[mesh.active], float(np.sum(quad.w * h * h))


def _check(system: BeamSystem, vector: np.ndarray, name: str) -> np.ndarray:
    vector = np.asarray(vector, dtype=float)
    if vector.shape != (system.mesh.n_active,):
        raise GridMismatchError(
            f"{name} has shape {vector.shape}, expected ({system.mesh.n_active},)"
        )
    return vector


def discrete_norms(system: BeamSystem, u: np.ndarray, v: np.ndarray) -> tuple[float, float]:
    """
    (‖u‖_V, ‖v‖_H) по матрицам Грама
    """
    u = _check(system, u, "u")
    v = _check(system, v, "v")
    return math.sqrt(max(u @ system.V_gram @ u, 0.0)), math.sqrt(max(v @ system.H_gram @ v, 0.0))


def energy_norms(system: BeamSystem, u: np.ndarray, v: np.ndarray) -> tuple[float, float]:
    """
    (‖u‖_V, ‖v‖_R): скорость в норме с плотностью vᵀMv; при R ≡ 1 совпадает с discrete_norms
    """
    u = _check(system, u, "u")
    v = _check(system, v, "v")
    return math.sqrt(max(u @ system.V_gram @ u, 0.0)), math.sqrt(max(v @ system.M @ v, 0.0))


def first_eigenfrequency(system: BeamSystem) -> float:
    """
    Низшая собственная частота sqrt(min λ) задачи K0 x = λ M x
    """
    try:
        value = linalg.eigh(system.K0, system.M, eigvals_only=True, subset_by_index=[0, 0])[0]
    except linalg.LinAlgError as exc:
        raise ConstantsError(f"eigenvalue problem failed: {exc}") from exc
    return math.sqrt(value)


@dataclass
class MatrixSnapshot(CsvExportMixin):
    """
    Ненулевые элементы матрицы в координатном виде (row, col, value)
    """

    matrix: np.ndarray
    csv_header = ("row", "col", "value")

    def csv_rows(self):
        rows, cols = np.nonzero(self.matrix)
        return zip(rows, cols, self.matrix[rows, cols])
