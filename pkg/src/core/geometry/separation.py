"""
分离常数 β 的数值估计：相邻 n 层单形中互不相交的 (n+1) 层子单形之间的最小距离，
乘以 L^n 后对探测层取最小。
"""
import functools
import logging
import math
from typing import Dict, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel
from scipy.spatial.distance import cdist

from src import ENV
from src.core.errors import SpecError
from src.core.geometry.ifs import FractalSpec
from src.core.geometry.mesh import deduplicate_points

logger = logging.getLogger(__name__)


class BetaEstimate(BaseModel):
    beta: float
    per_level: Dict[int, float]
    sample_depth: int
    enlargement: float  # A = 3L/β̂


def _corner_labels(spec: FractalSpec, level: int) -> np.ndarray:
    corners = spec.cell_points(level)
    tol = ENV.dedup_rel_tol * spec.contraction ** level
    _, inverse = deduplicate_points(corners.reshape(-1, spec.dim), tol)
    return inverse.reshape(len(corners), spec.n_boundary)


def adjacent_pairs(spec: FractalSpec, level: int) -> np.ndarray:
    """共享角点的 level 层单形对 (A < B)"""
    labels = _corner_labels(spec, level)
    rows = np.repeat(np.arange(len(labels)), spec.n_boundary)
    incidence = sp.csr_matrix((np.ones(labels.size), (rows, labels.ravel())))
    shared = sp.triu(incidence @ incidence.T, k=1).tocoo()
    order = np.lexsort((shared.col, shared.row))
    return np.stack([shared.row[order], shared.col[order]], axis=1)


def level_separation(spec: FractalSpec, level: int, sample_depth: int) -> float:
    """L^n · min d(子单形 a ⊂ A, 子单形 b ⊂ B)，A、B 相邻且 a、b 不相交"""
    m = spec.mass_factor
    child_labels = _corner_labels(spec, level + 1)
    clouds = spec.cell_points(level + 1 + sample_depth).reshape(m ** (level + 1), -1, spec.dim)
    best = np.inf
    for a, b in adjacent_pairs(spec, level):
        kids_a = a * m + np.arange(m)
        kids_b = b * m + np.arange(m)
        for ka in kids_a:
            for kb in kids_b:
                if np.intersect1d(child_labels[ka], child_labels[kb]).size:
                    continue
                best = min(best, float(cdist(clouds[ka], clouds[kb]).min()))
    return best * spec.length_factor ** level


def separation_beta(
    spec: FractalSpec,
    probe_levels: Optional[Sequence[int]] = None,
    sample_depth: Optional[int] = None,
    max_cells: Optional[int] = None,
) -> BetaEstimate:
    """
    Raises:
        SpecError: β̂ 不在 (0,1) 内（几何退化）
    """
    probe_levels = tuple(ENV.separation_probe_levels if probe_levels is None else probe_levels)
    sample_depth = ENV.separation_sample_depth if sample_depth is None else sample_depth
    max_cells = ENV.max_cells if max_cells is None else max_cells
    log_budget = int(math.floor(math.log(max_cells) / math.log(spec.mass_factor) + 1e-12))
    levels = [n for n in probe_levels if n >= 1 and n + 1 <= log_budget]
    if not levels:
        raise SpecError(f"{spec.name}: 探测层 {probe_levels} 全部超出预算 {max_cells}")
    depth = max(0, min(sample_depth, min(log_budget - (n + 1) for n in levels)))
    per_level = {n: level_separation(spec, n, depth) for n in levels}
    beta = min(per_level.values())
    if not (np.isfinite(beta) and 1e-9 < beta < 1.0):
        raise SpecError(f"{spec.name}: 分离常数估计 β̂={beta} 不在 (0,1) 内，几何退化")
    logger.debug("%s: β̂=%.12g（各层 %s，样本深度 %d）", spec.name, beta, per_level, depth)
    return BetaEstimate(
        beta=beta,
        per_level=per_level,
        sample_depth=depth,
        enlargement=3.0 * spec.length_factor / beta,
    )


@functools.lru_cache(maxsize=32)
def cached_beta(spec: FractalSpec) -> BetaEstimate:
    return separation_beta(spec)
