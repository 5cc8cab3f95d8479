"""
点定位：在 IFS 单词树上分支定界，找出包含 x 的 m 层单形及其星形、双星形。
"""
import functools
import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.core.errors import DomainError
from src.core.geometry.ifs import FractalSpec
from src.core.geometry.mesh import LevelMesh

logger = logging.getLogger(__name__)

EXTRA_DEPTH = 6


@dataclass(frozen=True)
class Location:
    """
    Attributes:
        simplex: 包含 x 的 m 层单形中下标最小者 K_m(x)
        meeting: 在 x 处相遇的全部 m 层单形（x 不是连接点时只有 simplex 本身）
        star / double_star: K_m(x) 的星形与双星形
        meeting_star: meeting 并集的星形
    """

    level: int
    simplex: int
    meeting: Tuple[int, ...]
    star: Tuple[int, ...]
    double_star: Tuple[int, ...]
    meeting_star: Tuple[int, ...]
    distance: float

    @property
    def is_junction(self) -> bool:
        return len(self.meeting) > 1


class AddressSearch:
    """用单元外接球 B(ψ_w(c), R·L^{-k}) 做下界、到单元角点的距离做上界"""

    def __init__(self, spec: FractalSpec):
        self.spec = spec
        self.center = spec.centroid
        self.radius = float(np.linalg.norm(spec.boundary_points - self.center, axis=1).max())
        self.translations = np.array([s.translation for s in spec.similitudes])

    def max_depth(self) -> int:
        return int(math.floor(62 * math.log(2) / math.log(self.spec.mass_factor)))

    def search(self, x: np.ndarray, depth: int, slack: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
        """
        Returns:
            depth 层候选单元下标及其角点到 x 的最小距离
        """
        spec = self.spec
        m = spec.mass_factor
        cand = np.zeros(1, dtype=np.int64)
        offsets = np.zeros((1, spec.dim))
        power = np.eye(spec.dim)
        upper = np.array([np.linalg.norm(spec.boundary_points - x, axis=1).min()])
        for k in range(depth):
            moved = self.translations @ power.T
            offsets = (offsets[:, None, :] + moved[None, :, :]).reshape(-1, spec.dim)
            cand = (cand[:, None] * m + np.arange(m)[None, :]).ravel()
            power = spec.linear @ power
            centers = self.center @ power.T + offsets
            radius = self.radius * spec.contraction ** (k + 1)
            corners = offsets[:, None, :] + (spec.boundary_points @ power.T)[None, :, :]
            upper = np.linalg.norm(corners - x, axis=-1).min(axis=1)
            lower = np.maximum(np.linalg.norm(centers - x, axis=1) - radius, 0.0)
            keep = lower <= upper.min() + slack
            cand, offsets, upper = cand[keep], offsets[keep], upper[keep]
        return cand, upper


@functools.lru_cache(maxsize=32)
def address_search(spec: FractalSpec) -> AddressSearch:
    return AddressSearch(spec)


def locate(mesh: LevelMesh, x, m: int) -> Location:
    """
    Raises:
        DomainError: m 超出网格层级，或 x 到吸引子的距离超过网格分辨率
    """
    if not 0 <= m <= mesh.level:
        raise DomainError(f"层级 m={m} 超出 0..{mesh.level}")
    spec = mesh.spec
    y = np.asarray(x, dtype=float).ravel() / mesh.scale
    if y.size != spec.dim:
        raise DomainError(f"点的维数 {y.size} 与分形维数 {spec.dim} 不符")
    search = address_search(spec)
    depth = min(max(m, mesh.level) + EXTRA_DEPTH, search.max_depth())
    tol = 1e-9 * spec.diameter * spec.contraction ** m
    cand, upper = search.search(y, depth, slack=tol)
    best = float(upper.min())
    if best > spec.diameter * spec.contraction ** mesh.level:
        raise DomainError(f"点 {np.asarray(x).tolist()} 不在吸引子上（距离 {best * mesh.scale:.3e} 超过网格分辨率）")
    close = cand[upper <= best + tol]
    meeting = np.unique(close // spec.mass_factor ** (depth - m))
    simplex = int(meeting[0])
    star = mesh.neighbors_of(m, simplex)
    double_star = mesh.neighbors_of(m, star)
    meeting_star = mesh.neighbors_of(m, meeting)
    return Location(
        level=m,
        simplex=simplex,
        meeting=tuple(int(i) for i in meeting),
        star=tuple(int(i) for i in star),
        double_star=tuple(int(i) for i in double_star),
        meeting_star=tuple(int(i) for i in meeting_star),
        distance=best * mesh.scale,
    )
