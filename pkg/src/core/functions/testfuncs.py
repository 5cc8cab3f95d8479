"""检验用函数族：调和、特征函数、示性函数、分片调和随机函数、坐标函数。"""
import functools
import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from src.core.errors import DomainError, UsageError
from src.core.functions.discrete import DiscreteFunction
from src.core.geometry.ifs import FractalSpec
from src.core.geometry.mesh import LevelMesh, build_mesh
from src.core.spectral.dirichlet import SpectralData, harmonic_basis

logger = logging.getLogger(__name__)

KINDS = ("constant", "harmonic", "eigenfunction", "indicator", "random-cellwise", "coordinate")


@functools.lru_cache(maxsize=16)
def _reference_basis(spec: FractalSpec, depth: int) -> Tuple[np.ndarray, np.ndarray]:
    """K 的 depth 层网格上的调和基，按单元展开为 (M^depth, #V⁰, #V⁰)"""
    sub = build_mesh(spec, depth)
    basis = harmonic_basis(sub)
    cells_basis = basis[sub.cells]
    cells_basis.setflags(write=False)
    return cells_basis, sub.cells


def piecewise_harmonic(mesh: LevelMesh, level: int, corner_values: np.ndarray) -> np.ndarray:
    """
    给定 level 层单形角点上的值，在每个 level 层单形内部做调和延拓。

    Args:
        corner_values: (M^level, #V⁰)，相邻单形在公共角点上的值必须一致
    """
    spec = mesh.spec
    depth = mesh.level - level
    cells_basis, _ = _reference_basis(spec, depth)
    block = spec.mass_factor ** depth
    local = np.einsum("jab,wb->wja", cells_basis, np.asarray(corner_values, dtype=float))
    values = np.zeros(mesh.n_vertices)
    values[mesh.cells.reshape(spec.mass_factor ** level, block, spec.n_boundary)] = local
    return values


def random_cellwise(mesh: LevelMesh, seed: int, level: Optional[int] = None) -> DiscreteFunction:
    level = min(2, mesh.level) if level is None else level
    if not 0 <= level <= mesh.level:
        raise DomainError(f"随机函数层级 {level} 超出 0..{mesh.level}")
    corners = mesh.corner_ids(level)
    uids, inverse = np.unique(corners, return_inverse=True)
    rng = np.random.default_rng(seed)
    nodal = rng.random(uids.size)
    corner_values = nodal[inverse.reshape(corners.shape)]
    values = piecewise_harmonic(mesh, level, corner_values)
    return DiscreteFunction(mesh, values, f"random{level}[{seed}]")


def make_test_function(
    kind: str,
    mesh: LevelMesh,
    *,
    boundary: Optional[Sequence[float]] = None,
    spectral: Optional[SpectralData] = None,
    j: int = 1,
    simplex: Optional[Tuple[int, int]] = None,
    ids: Optional[np.ndarray] = None,
    seed: int = 0,
    level: Optional[int] = None,
    axis: int = 0,
) -> DiscreteFunction:
    """
    Args:
        kind: constant | harmonic | eigenfunction | indicator | random-cellwise | coordinate
        boundary: harmonic 的 V⁰ 取值，默认 (1, 0, …, 0)
        simplex: indicator 的 (m, 下标)；也可用 ids 给出任意顶点集合

    Raises:
        UsageError: 未知种类或缺少必要参数
    """
    if kind == "constant":
        return DiscreteFunction(mesh, np.ones(mesh.n_vertices), "constant")
    if kind == "harmonic":
        b = np.zeros(mesh.spec.n_boundary)
        b[0] = 1.0
        b = b if boundary is None else np.asarray(boundary, dtype=float)
        if b.size != mesh.spec.n_boundary:
            raise UsageError(f"harmonic 需要 {mesh.spec.n_boundary} 个边界值")
        values = harmonic_basis(mesh) @ b
        return DiscreteFunction(mesh, values, f"harmonic{tuple(b.tolist())}")
    if kind == "eigenfunction":
        if spectral is None or spectral.mesh is not mesh:
            raise UsageError("eigenfunction 需要同一网格上的谱数据")
        return spectral.eigenfunction(j)
    if kind == "indicator":
        if ids is None:
            if simplex is None:
                raise UsageError("indicator 需要 simplex=(m, 下标) 或 ids")
            m, index = simplex
            ids = mesh.simplex_vertex_ids(m, index)
            name = f"indicator{m}[{index}]"
        else:
            name = f"indicator[{len(ids)}]"
        values = np.zeros(mesh.n_vertices)
        values[np.asarray(ids, dtype=np.int64)] = 1.0
        return DiscreteFunction(mesh, values, name)
    if kind == "random-cellwise":
        return random_cellwise(mesh, seed, level)
    if kind == "coordinate":
        if not 0 <= axis < mesh.dim:
            raise UsageError(f"坐标轴 {axis} 超出 0..{mesh.dim - 1}")
        return DiscreteFunction(mesh, mesh.points[:, axis], f"coordinate{axis}")
    raise UsageError(f"未知的检验函数种类: {kind}（可用: {', '.join(KINDS)}）")
