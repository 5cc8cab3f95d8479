"""
n 层网格：去重后的顶点、求积权重、单元关联、边表与空间索引。

截断 K^⟨t⟩ = L^t K 的网格坐标整体放大 L^t，单元测度为 M^{t-n}，
能量标度为 ρ^{n-t}，总质量 M^t。
"""
import logging
import threading
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from src import ENV
from src.core.errors import BudgetError, DedupCollisionError, DomainError, SpecError
from src.core.geometry.ifs import FractalSpec
from src.core.geometry.spatial_index import UniformGridIndex

logger = logging.getLogger(__name__)

Indices = Union[int, Iterable[int], np.ndarray]


@dataclass(frozen=True)
class Simplex:
    level: int
    index: int
    word: Tuple[int, ...]
    vertex_ids: Tuple[int, ...]
    measure: float
    diameter: float


def deduplicate_points(points: np.ndarray, tol: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    按 tol 网格取整合并重合点。

    取整把同一点劈到相邻格子时再按距离 ≤ tol 合并；合并后两个不同顶点距离若小于
    collision_factor·tol，说明 IFS 数值病态，抛出 DedupCollisionError。

    Returns:
        unique_points: (V, d)，按取整键的字典序
        inverse: (N,)，原始点 -> 顶点编号
    """
    points = np.asarray(points, dtype=float)
    keys = np.round(points / tol).astype(np.int64)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    reps = points[first]

    radius = ENV.collision_factor * tol
    extent = float(np.ptp(reps, axis=0).max()) if len(reps) > 1 else 1.0
    grid = UniformGridIndex(reps, max(radius, extent / 4096.0))
    q, ids, dist = grid.neighbors(reps, radius)
    upper = q < ids
    q, ids, dist = q[upper], ids[upper], dist[upper]
    clash = dist > tol
    if np.any(clash):
        k = int(np.flatnonzero(clash)[0])
        raise DedupCollisionError(int(q[k]), int(ids[k]), float(dist[k]), radius)
    if q.size:
        graph = sp.coo_matrix((np.ones(q.size), (q, ids)), shape=(len(reps), len(reps)))
        _, labels = connected_components(graph, directed=False)
        # 每个连通块取最小的代表下标，保持字典序
        lead = np.full(labels.max() + 1, len(reps), dtype=np.int64)
        np.minimum.at(lead, labels, np.arange(len(reps)))
        order = np.argsort(lead, kind="stable")
        relabel = np.empty_like(order)
        relabel[order] = np.arange(len(order))
        inverse = relabel[labels[inverse]]
        reps = reps[lead[order]]
        logger.debug("去重时合并了 %d 对被取整劈开的点", q.size)
    return reps, inverse


class LevelMesh:
    def __init__(self, spec: FractalSpec, level: int, truncation: int, points: np.ndarray, cells: np.ndarray):
        self.spec = spec
        self.level = int(level)
        self.truncation = int(truncation)
        points = np.array(points, dtype=float, copy=True)
        cells = np.array(cells, dtype=np.int64, copy=True)
        points.setflags(write=False)
        cells.setflags(write=False)
        self.points = points
        self.cells = cells
        m = spec.mass_factor
        self.cell_measure = float(m) ** (self.truncation - self.level)
        weights = np.bincount(cells.ravel(), minlength=len(points)) * (self.cell_measure / spec.n_boundary)
        weights.setflags(write=False)
        self.weights = weights
        pairs = spec.pairs
        edges = np.stack([cells[:, pairs[:, 0]].ravel(), cells[:, pairs[:, 1]].ravel()], axis=1)
        edges.setflags(write=False)
        self.edges = edges
        self.edge_orbit = np.tile(spec.pair_orbit, len(cells))
        self.edge_orbit.setflags(write=False)
        self.index = UniformGridIndex(points, self.resolution)
        self._lock = threading.RLock()
        self._cache = {}
        self.boundary_ids = self.corner_ids(0)[0]

    def __repr__(self):
        return (f"LevelMesh({self.spec.name}, n={self.level}, t={self.truncation}, "
                f"V={self.n_vertices}, cells={self.n_cells})")

    # ---- 基本量 ----
    @property
    def n_vertices(self) -> int:
        return len(self.points)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def scale(self) -> float:
        return self.spec.length_factor ** self.truncation

    @property
    def resolution(self) -> float:
        """n 层单元直径 diam K · L^{t-n}"""
        return self.spec.diameter * self.spec.length_factor ** (self.truncation - self.level)

    @property
    def diameter(self) -> float:
        return self.spec.diameter * self.scale

    @property
    def total_mass(self) -> float:
        return float(self.spec.mass_factor) ** self.truncation

    @property
    def energy_scale(self) -> float:
        return self.spec.resistance_factor ** (self.level - self.truncation)

    @property
    def edge_conductance(self) -> np.ndarray:
        return self.spec.conductance[self.edge_orbit] * self.energy_scale

    def level_cell_measure(self, m: int) -> float:
        return float(self.spec.mass_factor) ** (self.truncation - m)

    def level_diameter(self, m: int) -> float:
        return self.spec.diameter * self.spec.length_factor ** (self.truncation - m)

    def _cached(self, key, build):
        with self._lock:
            if key not in self._cache:
                self._cache[key] = build()
            return self._cache[key]

    def _check_level(self, m: int):
        if not 0 <= m <= self.level:
            raise DomainError(f"层级 m={m} 超出 0..{self.level}")

    # ---- m 层单形表 ----
    def corner_ids(self, m: int) -> np.ndarray:
        """m 层单形 ψ_w(V⁰) 的顶点编号，形状 (M^m, #V⁰)"""
        self._check_level(m)

        def build():
            depth = self.level - m
            block = self.spec.mass_factor ** depth
            suffix = np.array([self.spec.corner_suffix_index(b, depth) for b in range(self.spec.n_boundary)])
            rows = np.arange(self.spec.mass_factor ** m, dtype=np.int64)[:, None] * block + suffix[None, :]
            ids = self.cells[rows, np.arange(self.spec.n_boundary)[None, :]]
            ids.setflags(write=False)
            return ids

        return self._cached(("corners", m), build)

    def adjacency(self, m: int) -> sp.csr_matrix:
        """m 层单形的邻接矩阵（共享顶点即相邻，不含自身）"""

        def build():
            corners = self.corner_ids(m)
            rows = np.repeat(np.arange(len(corners)), corners.shape[1])
            incidence = sp.csr_matrix(
                (np.ones(corners.size), (rows, corners.ravel())), shape=(len(corners), self.n_vertices)
            )
            adj = (incidence @ incidence.T).tocsr()
            adj.setdiag(0)
            adj.eliminate_zeros()
            return (adj > 0).astype(np.int8).tocsr()

        self._check_level(m)
        return self._cached(("adjacency", m), build)

    def neighbors_of(self, m: int, indices: Indices) -> np.ndarray:
        """单形集合与其所有相邻 m 层单形的并（星形），升序"""
        indices = np.atleast_1d(np.asarray(indices, dtype=np.int64))
        adj = self.adjacency(m)
        touched = adj[indices].indices
        return np.unique(np.concatenate([indices, touched]))

    def _cell_rows(self, m: int, indices: Indices) -> np.ndarray:
        self._check_level(m)
        indices = np.atleast_1d(np.asarray(indices, dtype=np.int64))
        block = self.spec.mass_factor ** (self.level - m)
        return (indices[:, None] * block + np.arange(block)[None, :]).ravel()

    def simplex_vertex_ids(self, m: int, indices: Indices) -> np.ndarray:
        return np.unique(self.cells[self._cell_rows(m, indices)].ravel())

    def simplex_weights(self, m: int, indices: Indices) -> np.ndarray:
        """限制在 ∪K_w 内 n 层单元上的测度，使网格上 μ(K_w) 恰为 M^{t-m}"""
        rows = self._cell_rows(m, indices)
        counts = np.bincount(self.cells[rows].ravel(), minlength=self.n_vertices)
        return counts * (self.cell_measure / self.spec.n_boundary)

    def simplex(self, m: int, index: int) -> Simplex:
        corners = self.corner_ids(m)
        return Simplex(
            level=m,
            index=int(index),
            word=self.spec.word(int(index), m),
            vertex_ids=tuple(int(v) for v in corners[index]),
            measure=self.level_cell_measure(m),
            diameter=self.level_diameter(m),
        )

    def simplices(self, m: Optional[int] = None) -> List[Simplex]:
        m = self.level if m is None else m
        return [self.simplex(m, i) for i in range(self.spec.mass_factor ** m)]

    # ---- 近邻 ----
    def grid(self, radius: float) -> UniformGridIndex:
        """边长取 resolution·L^j，j 为使边长不小于 radius 的最小整数（至多 n，即整体直径），按 j 缓存"""
        base = self.resolution
        scale = self.spec.length_factor
        ratio = max(float(radius), base) / base
        j = min(self.level, max(0, int(np.ceil(np.log(ratio) / np.log(scale) - 1e-9))))
        return self._cached(("grid", j), lambda: UniformGridIndex(self.points, base * scale ** j))

    def neighbors(self, sources: np.ndarray, r: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """sources 中每个顶点半径 r 闭球内的全部顶点：(源位置, 顶点编号, 距离)"""
        sources = np.asarray(sources, dtype=np.int64)
        return self.grid(r).neighbors(self.points[sources], r)

    def ball_query(self, x, r: float) -> np.ndarray:
        return ball_query(self, x, r)

    def contains_ids(self, ids: np.ndarray) -> bool:
        ids = np.asarray(ids)
        return bool(ids.size == 0 or (ids.min() >= 0 and ids.max() < self.n_vertices))


def check_cell_budget(spec: FractalSpec, n: int, max_cells: Optional[int], stage: str):
    if n < 0:
        raise DomainError(f"{stage}: 层级必须非负: {n}")
    limit = ENV.max_cells if max_cells is None else max_cells
    requested = spec.mass_factor ** n
    if requested > limit:
        raise BudgetError(stage, limit, requested)


def enumerate_simplices(spec: FractalSpec, n: int, max_cells: Optional[int] = None) -> List[Simplex]:
    check_cell_budget(spec, n, max_cells, "enumerate_simplices")
    mesh = build_mesh(spec, n, max_cells=max_cells)
    return mesh.simplices(n)


def build_mesh(spec: FractalSpec, n: int, truncation: int = 0, max_cells: Optional[int] = None) -> LevelMesh:
    """
    构造 K^⟨t⟩ 的 n 层网格。

    Args:
        n: 网格层级，单元个数 M^n
        truncation: 截断层级 t，0 ≤ t ≤ n；t ≥ 1 要求 ψ_1(x) = x/L

    Raises:
        BudgetError: M^n 超过 max_cells
        DedupCollisionError: 顶点去重冲突
    """
    check_cell_budget(spec, n, max_cells, "build_mesh")
    if not 0 <= truncation <= n:
        raise DomainError(f"截断层级 t={truncation} 必须在 0..{n} 内")
    if truncation > 0:
        first = spec.similitudes[0]
        if np.abs(first.translation).max() > 1e-12 or np.abs(first.unitary - np.eye(spec.dim)).max() > 1e-12:
            raise SpecError(f"{spec.name}: 截断 K^⟨t⟩ 要求第一个相似映射为 x ↦ x/L")
    scale = spec.length_factor ** truncation
    corners = spec.cell_points(n) * scale
    tol = ENV.dedup_rel_tol * spec.length_factor ** (truncation - n)
    points, inverse = deduplicate_points(corners.reshape(-1, spec.dim), tol)
    cells = inverse.reshape(len(corners), spec.n_boundary)
    mesh = LevelMesh(spec, n, truncation, points, cells)
    logger.info("构造网格 %s n=%d t=%d：%d 个顶点，%d 个单元", spec.name, n, truncation, mesh.n_vertices, mesh.n_cells)
    return mesh


def ball_query(mesh: LevelMesh, x, r: float) -> np.ndarray:
    """闭球 B(x, r) 内的顶点编号，升序"""
    if not r > 0:
        raise DomainError(f"半径必须为正: {r}")
    return mesh.index.query(x, r)


def export_mesh(mesh: LevelMesh) -> Tuple[pd.DataFrame, pd.DataFrame]:
    vertices = pd.DataFrame(mesh.points, columns=[f"x{k}" for k in range(mesh.dim)])
    vertices.insert(0, "vertex_id", np.arange(mesh.n_vertices))
    vertices["weight"] = mesh.weights
    edges = pd.DataFrame({"u": mesh.edges[:, 0], "v": mesh.edges[:, 1], "orbit": mesh.edge_orbit})
    return vertices, edges
