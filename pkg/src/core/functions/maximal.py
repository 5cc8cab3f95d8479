"""
分形极大函数

g(x) = max_k μ̂(B(x,r_k))^{-1/p} · Var_{B(x,r_k),p}(f)，
球上的变差用比 r_k 更细的尺度 r_j（j > k）估计；另加整个 K 作为一个“半径”，
使得 g ≡ 0 当且仅当 f 为常数。
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from src.core.errors import ResolutionError
from src.core.functions.discrete import DiscreteFunction
from src.core.functions.variation import (
    check_exponent,
    normalize_ks,
    scale_radius,
    variation,
)
from src.core.geometry.measure import ball_mass
from src.core.geometry.mesh import LevelMesh
from src.core.geometry.separation import cached_beta
from src.core.parallel import chunked, ordered_map

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MaximalField:
    function: DiscreteFunction
    p: float
    levels: tuple
    radii: tuple
    values: np.ndarray
    include_global: bool = True

    @property
    def mesh(self) -> LevelMesh:
        return self.function.mesh

    def weak_lp(self, p: Optional[float] = None) -> float:
        """sup_t t^p μ̂({g > t})"""
        p = self.p if p is None else p
        w = self.mesh.weights
        order = np.argsort(-self.values, kind="stable")
        g = self.values[order]
        mass = np.cumsum(w[order])
        # 相同取值取最后一个位置上的累积质量
        last = np.r_[g[1:] != g[:-1], True]
        return float(np.max(g[last] ** p * mass[last])) if g.size else 0.0

    def lp_norm(self, p: Optional[float] = None) -> float:
        p = self.p if p is None else p
        return float((self.values ** p @ self.mesh.weights) ** (1.0 / p))


def _pair_table(mesh: LevelMesh, f: np.ndarray, r: float, p: float, workers: Optional[int]) -> sp.csr_matrix:
    """CSR 邻居表，元素为 |f(y)−f(z)|^p w(y) w(z) [/ μ̂(B(y,r))]"""
    w = mesh.weights
    ids = np.arange(mesh.n_vertices)
    masses = ball_mass(mesh, ids, r, workers=workers) if p != 1.0 else None

    def task(block: np.ndarray):
        src, tgt, _ = mesh.neighbors(block, r)
        y = block[src]
        val = np.abs(f[y] - f[tgt]) ** p * w[y] * w[tgt]
        if masses is not None:
            val = val / masses[y]
        return y, tgt, val

    parts = ordered_map(task, chunked(ids), workers=workers)
    rows = np.concatenate([q[0] for q in parts])
    cols = np.concatenate([q[1] for q in parts])
    vals = np.concatenate([q[2] for q in parts])
    return sp.csr_matrix((vals, (rows, cols)), shape=(mesh.n_vertices, mesh.n_vertices))


def maximal_function(
    f: DiscreteFunction,
    p: float,
    levels: Optional[Sequence[int]] = None,
    beta: Optional[float] = None,
    include_global: bool = True,
    workers: Optional[int] = None,
) -> MaximalField:
    """
    Args:
        levels: 半径层级 k（r_k = β̂ L^{t-k}），每个 k 至少要有一个更细的可分辨尺度

    Raises:
        ResolutionError: 没有可用的半径层级
    """
    check_exponent(p)
    mesh = f.mesh
    beta = cached_beta(mesh.spec).beta if beta is None else beta
    top = mesh.level - 1
    levels = list(range(1, top)) if levels is None else sorted(set(int(k) for k in levels))
    levels = [k for k in levels if k < top]
    if not levels:
        raise ResolutionError(f"网格层级 n={mesh.level} 下没有可用于极大函数的半径层级")
    values = f.values
    fine = list(range(min(levels) + 1, top + 1))
    tables = {j: _pair_table(mesh, values, scale_radius(mesh, beta, j), p, workers) for j in fine}
    radii = [scale_radius(mesh, beta, k) for k in levels]
    ball_masses = {k: ball_mass(mesh, None, scale_radius(mesh, beta, k), workers=workers) for k in levels}

    def per_vertex(block: np.ndarray) -> np.ndarray:
        out = np.zeros(block.size)
        for pos, x in enumerate(block):
            best = 0.0
            for k, r in zip(levels, radii):
                ball = mesh.grid(r).query(mesh.points[x], r)
                inside = np.zeros(mesh.n_vertices, dtype=bool)
                inside[ball] = True
                estimates = []
                for j in range(k + 1, top + 1):
                    sub = tables[j][ball]
                    raw = float(sub.data[inside[sub.indices]].sum())
                    estimates.append(normalize_ks(raw, scale_radius(mesh, beta, j), p, mesh))
                var = min(estimates)
                best = max(best, ball_masses[k][x] ** (-1.0 / p) * var)
            out[pos] = best
        return out

    g = np.concatenate(ordered_map(per_vertex, chunked(np.arange(mesh.n_vertices), 256), workers=workers))
    if include_global:
        whole = variation(f, None, p, "ks", beta=beta, workers=workers).estimate
        g = np.maximum(g, mesh.total_mass ** (-1.0 / p) * whole)
    logger.debug("极大函数: p=%g，层级 %s，max g=%.6g", p, levels, g.max())
    return MaximalField(function=f, p=p, levels=tuple(levels), radii=tuple(radii), values=g, include_global=include_global)
