"""经验球质量 μ̂(B(x,r)) 与 Ahlfors 正则性剖面。"""
import logging
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from src.core.errors import DomainError
from src.core.geometry.mesh import LevelMesh
from src.core.parallel import chunked, ordered_map

logger = logging.getLogger(__name__)

PAIR_BUDGET_PER_CHUNK = 2_000_000


class AhlforsRow(BaseModel):
    radius: float
    min_ratio: float
    max_ratio: float
    spread: float  # C/c


def estimate_degree(mesh: LevelMesh, r: float, probes: int = 16) -> float:
    """少量均匀选取顶点上的球内顶点数平均值，用于确定分块大小"""
    ids = np.unique(np.linspace(0, mesh.n_vertices - 1, min(probes, mesh.n_vertices)).astype(np.int64))
    counts = [mesh.index.query(mesh.points[i], r).size for i in ids]
    return float(np.mean(counts))


def chunk_size(mesh: LevelMesh, r: float) -> int:
    degree = max(1.0, estimate_degree(mesh, r))
    return int(min(4096, max(1, PAIR_BUDGET_PER_CHUNK // degree)))


def ball_mass(
    mesh: LevelMesh,
    ids: Optional[np.ndarray],
    r: float,
    weights: Optional[np.ndarray] = None,
    workers: Optional[int] = None,
) -> np.ndarray:
    """μ̂(B(x,r)) = Σ_{y: d(x,y) ≤ r} w(y)，对 ids 中每个顶点"""
    if not r > 0:
        raise DomainError(f"半径必须为正: {r}")
    ids = np.arange(mesh.n_vertices) if ids is None else np.asarray(ids, dtype=np.int64)
    w = mesh.weights if weights is None else np.asarray(weights, dtype=float)

    def task(block: np.ndarray) -> np.ndarray:
        src, tgt, _ = mesh.neighbors(block, r)
        return np.bincount(src, weights=w[tgt], minlength=len(block))

    parts = ordered_map(task, chunked(ids, chunk_size(mesh, r)), workers=workers)
    return np.concatenate(parts) if parts else np.zeros(0)


def default_centers(mesh: LevelMesh, count: int = 64) -> np.ndarray:
    return np.unique(np.linspace(0, mesh.n_vertices - 1, min(count, mesh.n_vertices)).astype(np.int64))


def ahlfors_profile(
    mesh: LevelMesh,
    radii: Sequence[float],
    centers: Optional[np.ndarray] = None,
) -> List[AhlforsRow]:
    """每个半径上 μ̂(B(x,r))/r^{d_h} 在中心点上的最小、最大值"""
    centers = default_centers(mesh) if centers is None else np.asarray(centers, dtype=np.int64)
    d_h = mesh.spec.d_h
    rows = []
    for r in radii:
        ratio = ball_mass(mesh, centers, r) / r ** d_h
        lo, hi = float(ratio.min()), float(ratio.max())
        rows.append(AhlforsRow(radius=float(r), min_ratio=lo, max_ratio=hi, spread=hi / lo if lo > 0 else np.inf))
    return rows
