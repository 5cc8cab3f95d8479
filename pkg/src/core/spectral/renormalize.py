"""
电导重整化：在 V⁰ 点对的对称轨道上求电导模式 c 与电阻标度因子 ρ，
使 1 层网络在 V⁰ 上的迹（Schur 补）等于 ρ^{-1} 倍的 0 层网络。
"""
import logging
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from src import ENV
from src.core.errors import RenormalizationError
from src.core.geometry.ifs import FractalSpec
from src.core.geometry.mesh import deduplicate_points

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RenormalizationResult:
    conductance: np.ndarray
    rho: float
    iterations: int
    residual: float


def level_one_network(spec: FractalSpec) -> Tuple[np.ndarray, np.ndarray]:
    """1 层网络：(单元顶点表 (M, #V⁰), V⁰ 在网络中的编号)"""
    corners = spec.cell_points(1)
    tol = ENV.dedup_rel_tol * spec.contraction
    _, inverse = deduplicate_points(corners.reshape(-1, spec.dim), tol)
    cells = inverse.reshape(spec.mass_factor, spec.n_boundary)
    boundary = cells[list(spec.boundary), np.arange(spec.n_boundary)]
    return cells, boundary


def pattern_laplacian(n_vertices: int, cells: np.ndarray, spec: FractalSpec, conductance: np.ndarray) -> np.ndarray:
    lap = np.zeros((n_vertices, n_vertices))
    cond = conductance[spec.pair_orbit]
    u = cells[:, spec.pairs[:, 0]].ravel()
    v = cells[:, spec.pairs[:, 1]].ravel()
    c = np.tile(cond, len(cells))
    np.add.at(lap, (u, v), -c)
    np.add.at(lap, (v, u), -c)
    np.add.at(lap, (u, u), c)
    np.add.at(lap, (v, v), c)
    return lap


def boundary_trace(lap: np.ndarray, boundary: np.ndarray) -> np.ndarray:
    """Schur 补 L_BB − L_BI L_II^{-1} L_IB"""
    interior = np.setdiff1d(np.arange(len(lap)), boundary)
    lbb = lap[np.ix_(boundary, boundary)]
    if interior.size == 0:
        return lbb
    lbi = lap[np.ix_(boundary, interior)]
    lii = lap[np.ix_(interior, interior)]
    try:
        solved = np.linalg.solve(lii, lbi.T)
    except np.linalg.LinAlgError as e:
        raise RenormalizationError(f"1 层网络内部方程组奇异: {e}") from e
    return lbb - lbi @ solved


def _trace_conductance(trace: np.ndarray, spec: FractalSpec) -> np.ndarray:
    effective = -trace[spec.pairs[:, 0], spec.pairs[:, 1]]
    sums = np.bincount(spec.pair_orbit, weights=effective, minlength=spec.n_orbits)
    counts = np.bincount(spec.pair_orbit, minlength=spec.n_orbits)
    return sums / counts


def renormalize_conductances(
    spec: FractalSpec,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    initial: Optional[np.ndarray] = None,
) -> RenormalizationResult:
    """
    不动点迭代：c ← trace(c) 的轨道平均，最大值归一；ρ_k = (c·c)/(c·c')。

    Raises:
        RenormalizationError: 迭代不收敛、ρ̂ ≤ 1 或残差超限
    """
    tol = ENV.renorm_tol if tol is None else tol
    max_iter = ENV.renorm_max_iter if max_iter is None else max_iter
    cells, boundary = level_one_network(spec)
    n_vertices = int(cells.max()) + 1
    c = np.ones(spec.n_orbits) if initial is None else np.asarray(initial, dtype=float).copy()
    rho = np.nan
    for it in range(1, max_iter + 1):
        trace = boundary_trace(pattern_laplacian(n_vertices, cells, spec, c), boundary)
        image = _trace_conductance(trace, spec)
        if not np.all(np.isfinite(image)) or image.max() <= 0:
            raise RenormalizationError(f"{spec.name}: 第 {it} 步得到非正的有效电导 {image}")
        rho = float(c @ c) / float(c @ image)
        nxt = np.clip(image / image.max(), 0.0, None)
        delta = float(np.abs(nxt - c).max())
        c = nxt
        if delta <= tol:
            break
    else:
        raise RenormalizationError(f"{spec.name}: {max_iter} 次迭代后未收敛（最后一步变化 {delta:.3e}）")

    lap0 = pattern_laplacian(spec.n_boundary, np.arange(spec.n_boundary)[None, :], spec, c)
    trace = boundary_trace(pattern_laplacian(n_vertices, cells, spec, c), boundary)
    rho = float(np.sum(lap0 * lap0) / np.sum(lap0 * trace))
    residual = float(np.abs(trace - lap0 / rho).max() / np.abs(lap0 / rho).max())
    if residual > ENV.renorm_residual_tol:
        raise RenormalizationError(f"{spec.name}: 重整化残差 {residual:.3e} 超过 {ENV.renorm_residual_tol:.1e}")
    if not rho > 1.0:
        raise RenormalizationError(f"{spec.name}: 电阻标度因子 ρ̂={rho} 不大于 1")
    logger.debug("%s: 重整化 %d 步收敛，ρ̂=%.15g，残差 %.3e", spec.name, it, rho, residual)
    return RenormalizationResult(conductance=c, rho=rho, iterations=it, residual=residual)


def apply_renormalization(spec: FractalSpec, **kwargs) -> FractalSpec:
    result = renormalize_conductances(spec, **kwargs)
    return replace(
        spec,
        conductance=result.conductance,
        resistance_factor=result.rho,
        renormalization_iterations=result.iterations,
    )
