"""V⁰ 的等距对称群与点对轨道。"""
import itertools
import logging
from typing import List, Tuple

import numpy as np

from src.core.errors import SpecError

logger = logging.getLogger(__name__)

MAX_GROUP_ORDER = 50_000


def isometry_group(points: np.ndarray, tol: float) -> np.ndarray:
    """
    保持两两距离的全部置换，即 V⁰ 的等距群；行按字典序排列。

    有限点集上保距的双射总能延拓为仿射包上的等距变换，所以这里只需回溯搜索距离矩阵的自同构。
    perm[i] 是第 i 个点的像。

    Raises:
        SpecError: 群阶数超限，或群在 V⁰ 上不可迁
    """
    n = len(points)
    dist = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=-1)
    group: List[Tuple[int, ...]] = []

    def extend(partial: List[int], used: set):
        k = len(partial)
        if k == n:
            group.append(tuple(partial))
            if len(group) > MAX_GROUP_ORDER:
                raise SpecError(f"对称群阶数超过 {MAX_GROUP_ORDER}")
            return
        for j in range(n):
            if j in used:
                continue
            if all(abs(dist[k, i] - dist[j, partial[i]]) <= tol for i in range(k)):
                used.add(j)
                partial.append(j)
                extend(partial, used)
                partial.pop()
                used.discard(j)

    extend([], set())
    reached = {g[0] for g in group}
    if len(reached) != n:
        missing = sorted(set(range(n)) - reached)
        raise SpecError(f"V⁰ 不满足对称公理: 等距群不可迁，点 0 无法映到 {missing}")
    logger.debug("V⁰ 等距群阶数 %d", len(group))
    return np.array(sorted(group), dtype=np.int64)


def pair_orbits(n: int, permutations: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    V⁰ 无序点对在置换群作用下的轨道。

    Returns:
        pairs: (P, 2)，字典序
        orbit: (P,)，按首次出现顺序编号
    """
    pairs = list(itertools.combinations(range(n), 2))
    position = {p: k for k, p in enumerate(pairs)}
    orbit = np.full(len(pairs), -1, dtype=np.int64)
    label = 0
    for k, (a, b) in enumerate(pairs):
        if orbit[k] >= 0:
            continue
        for perm in permutations:
            x, y = int(perm[a]), int(perm[b])
            orbit[position[(min(x, y), max(x, y))]] = label
        label += 1
    return np.array(pairs, dtype=np.int64).reshape(-1, 2), orbit


def symmetry_orbits(points: np.ndarray, tol: float = 1e-9) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """返回 (置换群, 点对, 轨道编号)。"""
    points = np.asarray(points, dtype=float)
    scale = float(np.ptp(points, axis=0).max()) or 1.0
    group = isometry_group(points, tol * scale)
    pairs, orbit = pair_orbits(len(points), group)
    return group, pairs, orbit


def orbit_sizes(orbit: np.ndarray) -> List[int]:
    return np.bincount(orbit).tolist()
