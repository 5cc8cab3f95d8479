"""
均匀网格桶索引，用于固定半径近邻查询。

点按所在网格单元的线性编号排序后连续存放，每个非空单元只记录起点与个数，
因此查询只需对非空单元做 searchsorted，不需要稠密网格数组。
"""
import itertools
import logging
from typing import Tuple

import numpy as np

logger = logging.getLogger(__name__)

_MAX_LINEAR = 2 ** 62


def ragged_ranges(starts: np.ndarray, counts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """把若干 [start, start+count) 区间展开成 (所属区间下标, 位置)。"""
    counts = np.asarray(counts, dtype=np.int64)
    total = int(counts.sum())
    owner = np.repeat(np.arange(len(counts), dtype=np.int64), counts)
    base = np.repeat(np.cumsum(counts) - counts, counts)
    slots = np.repeat(np.asarray(starts, dtype=np.int64), counts) + (np.arange(total, dtype=np.int64) - base)
    return owner, slots


class UniformGridIndex:
    def __init__(self, points: np.ndarray, cell_size: float):
        if not cell_size > 0:
            raise ValueError(f"网格边长必须为正: {cell_size}")
        points = np.array(points, dtype=float, copy=True).reshape(len(points), -1)
        points.setflags(write=False)
        self.points = points
        self.cell_size = float(cell_size)
        self.origin = points.min(axis=0) if len(points) else np.zeros(points.shape[1])
        keys = self._keys(points)
        self.shape = keys.max(axis=0) + 1 if len(points) else np.ones(points.shape[1], dtype=np.int64)
        if float(np.prod(self.shape.astype(float))) >= _MAX_LINEAR:
            raise ValueError(f"网格单元数溢出: shape={self.shape.tolist()}，请增大网格边长")
        linear = self._linear(keys)
        self.order = np.argsort(linear, kind="stable")
        sorted_linear = linear[self.order]
        self.cell_ids, self.starts, self.counts = np.unique(sorted_linear, return_index=True, return_counts=True)
        self.cell_coords = self._unlinear(self.cell_ids)
        logger.debug("网格索引: %d 个点，%d 个非空单元，边长 %.3e", len(points), len(self.cell_ids), self.cell_size)

    def __len__(self):
        return len(self.points)

    def _keys(self, x: np.ndarray) -> np.ndarray:
        return np.floor((x - self.origin) / self.cell_size).astype(np.int64)

    def _linear(self, keys: np.ndarray) -> np.ndarray:
        linear = np.zeros(len(keys), dtype=np.int64)
        for axis in range(keys.shape[1]):
            linear = linear * int(self.shape[axis]) + keys[:, axis]
        return linear

    def _unlinear(self, linear: np.ndarray) -> np.ndarray:
        coords = np.zeros((len(linear), len(self.shape)), dtype=np.int64)
        rest = linear.copy()
        for axis in reversed(range(len(self.shape))):
            coords[:, axis] = rest % int(self.shape[axis])
            rest //= int(self.shape[axis])
        return coords

    def _lookup(self, keys: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """网格坐标 -> (有效行下标, 非空单元序号)"""
        inside = np.all((keys >= 0) & (keys < self.shape), axis=1)
        rows = np.flatnonzero(inside)
        if rows.size == 0 or self.cell_ids.size == 0:
            return rows[:0], rows[:0]
        linear = self._linear(keys[rows])
        pos = np.clip(np.searchsorted(self.cell_ids, linear), 0, len(self.cell_ids) - 1)
        hit = self.cell_ids[pos] == linear
        return rows[hit], pos[hit]

    def query(self, x, r: float) -> np.ndarray:
        """欧氏距离 ≤ r 的全部点编号，升序。"""
        x = np.asarray(x, dtype=float).ravel()
        if r < 0:
            raise ValueError(f"半径必须非负: {r}")
        lo = np.floor((x - r - self.origin) / self.cell_size)
        hi = np.floor((x + r - self.origin) / self.cell_size)
        mask = np.all((self.cell_coords >= lo) & (self.cell_coords <= hi), axis=1)
        cells = np.flatnonzero(mask)
        _, slots = ragged_ranges(self.starts[cells], self.counts[cells])
        ids = self.order[slots]
        dist = np.linalg.norm(self.points[ids] - x, axis=1)
        return np.sort(ids[dist <= r])

    def neighbors(self, queries: np.ndarray, r: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        批量固定半径查询。

        Returns:
            (查询行号, 点编号, 距离)，按 (查询行号, 点编号) 升序
        """
        queries = np.asarray(queries, dtype=float).reshape(-1, self.points.shape[1])
        reach = int(np.ceil(r / self.cell_size))
        base = self._keys(queries)
        q_parts, i_parts = [], []
        for offset in itertools.product(range(-reach, reach + 1), repeat=self.points.shape[1]):
            rows, cells = self._lookup(base + np.asarray(offset, dtype=np.int64))
            if rows.size == 0:
                continue
            owner, slots = ragged_ranges(self.starts[cells], self.counts[cells])
            q_parts.append(rows[owner])
            i_parts.append(self.order[slots])
        if not q_parts:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty, np.zeros(0)
        q = np.concatenate(q_parts)
        ids = np.concatenate(i_parts)
        dist = np.linalg.norm(queries[q] - self.points[ids], axis=1)
        keep = dist <= r
        q, ids, dist = q[keep], ids[keep], dist[keep]
        order = np.lexsort((ids, q))
        return q[order], ids[order], dist[order]

    def linear_scan(self, x, r: float) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        return np.flatnonzero(np.linalg.norm(self.points - x, axis=1) <= r)
