"""
内置分形注册表与自定义 IFS 的校验装配。

build_spec 依次检查：公共压缩比与公共正交部分、本质不动点、V⁰ 对称性、
1 层连通性、抽样嵌套公理，最后做电导重整化求 ρ̂。
"""
import functools
import itertools
import logging
import math
import re
from typing import List, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, Field
from scipy.sparse.csgraph import connected_components

from src import ENV
from src.core.errors import SpecError, UsageError
from src.core.geometry.ifs import FractalSpec, Similitude
from src.core.geometry.mesh import deduplicate_points
from src.core.geometry.symmetry import symmetry_orbits
from src.core.spectral.renormalize import apply_renormalization

logger = logging.getLogger(__name__)

_VICSEK_PATTERN = re.compile(r"^vicsek-(\d+)$")


class IFSConfig(BaseModel):
    """自定义 IFS：ψ_i(x) = contraction · U x + translations[i]"""

    name: str = "custom"
    contraction: float = Field(gt=0.0, lt=1.0)
    unitary: List[List[float]]
    translations: List[List[float]]
    rho: Optional[float] = None

    def similitudes(self) -> List[Similitude]:
        return [Similitude(self.contraction, np.array(self.unitary), np.array(t)) for t in self.translations]


def registry_names() -> List[str]:
    return ["sg", "vicsek", "vicsek-N"]


def _contracting_to(points: Sequence[np.ndarray], length_factor: float) -> List[Similitude]:
    """ψ_i(z) = z/L + (1 − 1/L) q_i，不动点恰为 q_i"""
    d = len(points[0])
    r = 1.0 / length_factor
    return [Similitude(r, np.eye(d), (1.0 - r) * np.asarray(q, dtype=float)) for q in points]


def sierpinski_similitudes() -> List[Similitude]:
    corners = [np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([0.5, math.sqrt(3.0) / 2.0])]
    return _contracting_to(corners, 2.0)


def vicsek_similitudes(dim: int = 2) -> List[Similitude]:
    if dim < 2:
        raise UsageError(f"Vicsek 集维数必须 ≥ 2: {dim}")
    corners = [np.array(c, dtype=float) for c in itertools.product((0.0, 1.0), repeat=dim)]
    corners.append(np.full(dim, 0.5))
    return _contracting_to(corners, 3.0)


# ---- 公理校验 ----
def check_common_parts(similitudes: Sequence[Similitude], tol: float = 1e-12):
    if len(similitudes) < 2:
        raise SpecError(f"IFS 至少需要 2 个相似映射，实际 {len(similitudes)} 个")
    first = similitudes[0]
    for i, s in enumerate(similitudes):
        if s.dim != first.dim:
            raise SpecError(f"相似映射 {i} 的维数 {s.dim} 与映射 0 的 {first.dim} 不同")
        if not s.is_orthogonal():
            raise SpecError(f"相似映射 {i} 的线性部分不是正交矩阵")
        if abs(s.contraction - first.contraction) > tol:
            raise SpecError(f"相似映射 {i} 的压缩比 {s.contraction} 与映射 0 的 {first.contraction} 不同")
        if np.abs(s.unitary - first.unitary).max() > 1e-10:
            raise SpecError(f"相似映射 {i} 的正交部分与映射 0 不同（要求所有映射具有相同的酉部分）")


def essential_fixed_points(similitudes: Sequence[Similitude], tol: float) -> List[int]:
    """
    按定义计算本质不动点：q_a 是本质的当且仅当存在 i≠j、b≠a 使 ψ_i(q_a) = ψ_j(q_b)。
    """
    fixed = np.array([s.fixed_point() for s in similitudes])
    m = len(similitudes)
    images = np.stack([s(fixed) for s in similitudes])  # [i, a, :]
    flat = images.reshape(m * m, -1)
    which_map = np.repeat(np.arange(m), m)
    which_point = np.tile(np.arange(m), m)
    dist = np.linalg.norm(flat[:, None, :] - flat[None, :, :], axis=-1)
    hit = (dist <= tol) & (which_map[:, None] != which_map[None, :]) & (which_point[:, None] != which_point[None, :])
    rows, cols = np.nonzero(hit)
    return sorted(set(which_point[rows].tolist()) | set(which_point[cols].tolist()))


def check_connectivity(spec: FractalSpec):
    corners = spec.cell_points(1)
    _, inverse = deduplicate_points(corners.reshape(-1, spec.dim), ENV.dedup_rel_tol * spec.contraction)
    cells = inverse.reshape(spec.mass_factor, spec.n_boundary)
    rows = np.repeat(np.arange(spec.mass_factor), spec.n_boundary)
    incidence = sp.csr_matrix((np.ones(cells.size), (rows, cells.ravel())))
    n_parts, _ = connected_components(incidence @ incidence.T, directed=False)
    if n_parts != 1:
        raise SpecError(f"{spec.name}: 1 层单元图不连通（{n_parts} 个连通分支），违反连通公理")


def check_nesting(spec: FractalSpec, levels: Sequence[int] = (1, 2), sample_depth: Optional[int] = None):
    """
    抽样检查嵌套公理：不同 k 层单元的样本点若重合，必须同时是两个单元的角点。

    Raises:
        SpecError: 给出违反公理的单元对（单词）
    """
    sample_depth = ENV.nesting_sample_depth if sample_depth is None else sample_depth
    log_budget = int(math.floor(math.log(ENV.max_cells) / math.log(spec.mass_factor)))
    for k in levels:
        depth = max(0, min(sample_depth, log_budget - k))
        tol_s = ENV.dedup_rel_tol * spec.contraction ** depth
        sample, _ = deduplicate_points(spec.cell_points(depth).reshape(-1, spec.dim), tol_s)
        gap = np.linalg.norm(sample[:, None, :] - spec.boundary_points[None, :, :], axis=-1)
        is_corner = gap.min(axis=1) <= tol_s
        mapped = spec.cell_points(k, sample)
        n_cells, n_sample = mapped.shape[:2]
        tol_k = ENV.dedup_rel_tol * spec.contraction ** (k + depth)
        keys = np.round(mapped.reshape(-1, spec.dim) / tol_k).astype(np.int64)
        _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
        inverse = inverse.reshape(-1)
        corner_flat = np.tile(is_corner, n_cells)
        interior_hits = np.bincount(inverse, weights=(~corner_flat).astype(float), minlength=len(counts))
        bad = np.flatnonzero((counts > 1) & (interior_hits > 0))
        if bad.size:
            members = np.flatnonzero(inverse == bad[0])
            cells = sorted(set((members // n_sample).tolist()))
            first, second = spec.word(cells[0], k), spec.word(cells[1], k)
            raise SpecError(f"{spec.name}: 嵌套公理不成立，{k} 层单元 {first} 与 {second} 在非角点处相交")
        logger.debug("%s: 第 %d 层嵌套抽样检查通过（样本深度 %d）", spec.name, k, depth)


def assemble_spec(
    name: str,
    family: str,
    similitudes: Sequence[Similitude],
    declared_rho: Optional[float] = None,
) -> FractalSpec:
    check_common_parts(similitudes)
    fixed = np.array([s.fixed_point() for s in similitudes])
    scale = float(np.ptp(fixed, axis=0).max()) or 1.0
    boundary = essential_fixed_points(similitudes, ENV.dedup_rel_tol * scale)
    if len(boundary) < 2:
        raise SpecError(f"{name}: 本质不动点只有 {len(boundary)} 个，要求 #V⁰ ≥ 2")
    boundary_points = fixed[boundary]
    group, pairs, orbit = symmetry_orbits(boundary_points, ENV.dedup_rel_tol)
    spec = FractalSpec(
        name=name,
        family=family,
        similitudes=tuple(similitudes),
        boundary=tuple(boundary),
        boundary_points=boundary_points,
        pairs=pairs,
        pair_orbit=orbit,
        symmetries=group,
    )
    check_connectivity(spec)
    check_nesting(spec)
    spec = apply_renormalization(spec)
    if declared_rho is not None and abs(declared_rho - spec.resistance_factor) > 1e-8 * declared_rho:
        raise SpecError(f"{name}: 声明的 ρ={declared_rho} 与重整化得到的 ρ̂={spec.resistance_factor:.12g} 不一致")
    logger.info("%s: L=%g M=%d ρ̂=%.12g d_h=%.6f d_w=%.6f", name, spec.length_factor, spec.mass_factor,
                spec.resistance_factor, spec.d_h, spec.d_w)
    return spec


@functools.lru_cache(maxsize=None)
def _registry_spec(name: str) -> FractalSpec:
    if name == "sg":
        return assemble_spec("sg", "sg", sierpinski_similitudes())
    if name == "vicsek":
        return assemble_spec("vicsek", "vicsek", vicsek_similitudes(2))
    match = _VICSEK_PATTERN.match(name)
    if match:
        return assemble_spec(name, "vicsek", vicsek_similitudes(int(match.group(1))))
    raise UsageError(f"未知的分形名称: {name}（可用: {', '.join(registry_names())}）")


def build_spec(source: Union[str, IFSConfig]) -> FractalSpec:
    """
    Args:
        source: 注册名 "sg" / "vicsek" / "vicsek-N"（N ≥ 2），或 IFSConfig

    Raises:
        SpecError: IFS 不满足公理
        UsageError: 未知注册名
    """
    if isinstance(source, IFSConfig):
        return assemble_spec(source.name, "custom", source.similitudes(), source.rho)
    return _registry_spec(str(source).strip().lower())
