"""
球 B(x₀,R) 的贪心 s/2-分离网及其放大覆盖常数。
"""
import logging
from dataclasses import dataclass

import numpy as np

from src.core.errors import DomainError
from src.core.geometry.mesh import LevelMesh

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Covering:
    """
    Attributes:
        centers: 网点（顶点编号，升序），两两距离 > s/2，且覆盖 B(x₀,R) 的每个顶点到 s/2 以内
        c2: max_i (d(x₀,x_i) + 2As) / R
        overlap: 含有同一顶点的放大球 B(x_i, 2As) 的最大个数
    """

    x0: int
    radius: float
    s: float
    enlargement: float
    centers: np.ndarray
    c2: float
    overlap: int


def covering(mesh: LevelMesh, x0: int, R: float, s: float, A: float) -> Covering:
    """
    Raises:
        DomainError: 不满足 0 < s < R 或 A ≤ 1
    """
    if not 0 < s < R:
        raise DomainError(f"网格半径需满足 0 < s < R: s={s}, R={R}")
    if not A > 1:
        raise DomainError(f"放大因子 A 必须大于 1: {A}")
    origin = mesh.points[x0]
    ball = mesh.ball_query(origin, R)
    covered = np.zeros(mesh.n_vertices, dtype=bool)
    inside = np.zeros(mesh.n_vertices, dtype=bool)
    inside[ball] = True
    centers = []
    for v in ball:
        if covered[v]:
            continue
        centers.append(v)
        near = mesh.grid(0.5 * s).query(mesh.points[v], 0.5 * s)
        covered[near[inside[near]]] = True
    centers = np.asarray(centers, dtype=np.int64)
    dist = np.linalg.norm(mesh.points[centers] - origin, axis=1)
    c2 = float((dist.max() + 2.0 * A * s) / R)
    _, tgt, _ = mesh.neighbors(centers, 2.0 * A * s)
    overlap = int(np.bincount(tgt, minlength=mesh.n_vertices).max())
    logger.debug("覆盖 B(%d, %.4g)，s=%.4g：%d 个网点，C₂=%.4g，重叠 %d", x0, R, s, centers.size, c2, overlap)
    return Covering(x0=int(x0), radius=float(R), s=float(s), enlargement=float(A), centers=centers, c2=c2, overlap=overlap)
