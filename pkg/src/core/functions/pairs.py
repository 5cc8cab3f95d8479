"""
双重求和引擎。所有 ∬ 型量都按源顶点分块、块内向量化、按块顺序归约，
结果与线程数无关。
"""
import logging
from typing import Callable, List, Optional

import numpy as np

from src import ENV
from src.core.errors import BudgetError, DomainError
from src.core.geometry.measure import ball_mass, chunk_size, estimate_degree
from src.core.geometry.mesh import LevelMesh
from src.core.parallel import chunked, ordered_map

logger = logging.getLogger(__name__)


def _source_ids(mesh: LevelMesh, ids: Optional[np.ndarray]) -> np.ndarray:
    if ids is None:
        return np.arange(mesh.n_vertices)
    ids = np.unique(np.asarray(ids, dtype=np.int64))
    if ids.size == 0:
        raise DomainError("限制集合 F 不能为空")
    if not mesh.contains_ids(ids):
        raise DomainError("限制集合 F 含有网格外的顶点编号")
    return ids


def _check_pairs(mesh: LevelMesh, n_sources: int, r: float, stage: str):
    estimate = int(n_sources * estimate_degree(mesh, r))
    if estimate > ENV.max_pairs:
        raise BudgetError(stage, ENV.max_pairs, estimate)


def _as_stack(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return values[:, None] if values.ndim == 1 else values


PairReducer = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def map_pairs(
    mesh: LevelMesh,
    ids: Optional[np.ndarray],
    r: float,
    reducer: PairReducer,
    weights: Optional[np.ndarray] = None,
    divide: bool = True,
    workers: Optional[int] = None,
    stage: str = "double_sum",
) -> List[np.ndarray]:
    """
    遍历 F 内全部距离 ≤ r 的有序点对 (x, y)，对每块调用
    reducer(源位置, x, y, coef)，coef = w(x) w(y) [/ μ̂(B(x,r))]。
    返回各块结果，顺序固定。
    """
    if not r > 0:
        raise DomainError(f"半径必须为正: {r}")
    ids = _source_ids(mesh, ids)
    member = np.zeros(mesh.n_vertices, dtype=bool)
    member[ids] = True
    w = mesh.weights if weights is None else np.asarray(weights, dtype=float)
    _check_pairs(mesh, ids.size, r, stage)
    masses = ball_mass(mesh, ids, r, workers=workers) if divide else None
    size = chunk_size(mesh, r)

    def task(start: int) -> np.ndarray:
        block = ids[start:start + size]
        src, tgt, _ = mesh.neighbors(block, r)
        keep = member[tgt]
        src, tgt = src[keep], tgt[keep]
        x = block[src]
        coef = w[x] * w[tgt]
        if divide:
            coef = coef / masses[start + src]
        return reducer(start + src, x, tgt, coef)

    return ordered_map(task, range(0, ids.size, size), workers=workers)


def ks_double_sum_many(
    mesh: LevelMesh,
    values: np.ndarray,
    ids: Optional[np.ndarray],
    r: float,
    p: float,
    weights: Optional[np.ndarray] = None,
    divide: bool = True,
    workers: Optional[int] = None,
) -> np.ndarray:
    """
    W_{F,r,p}(f) = Σ_{x∈F} Σ_{y∈B(x,r)∩F} |f(x)−f(y)|^p w(x) w(y) [/ μ̂(B(x,r))]

    values 为 (V,) 或 (V, k)，一次配对遍历同时处理 k 个函数。
    μ̂(B(x,r)) 始终用整个网格的顶点权重。
    """
    stack = _as_stack(values)

    def reduce(_, x, y, coef):
        return coef @ (np.abs(stack[x] - stack[y]) ** p)

    parts = map_pairs(mesh, ids, r, reduce, weights, divide, workers, "ks_double_sum")
    total = np.zeros(stack.shape[1])
    for part in parts:
        total = total + part
    return total


def ks_double_sum(mesh, values, ids, r, p, weights=None, divide=True, workers=None) -> float:
    return float(ks_double_sum_many(mesh, values, ids, r, p, weights, divide, workers)[0])


def subgaussian_cutoff(t: float, d_w: float, floor: Optional[float] = None) -> float:
    """核 exp(−(d^{d_w}/t)^{1/(d_w−1)}) 低于 floor 的截断半径"""
    floor = ENV.kernel_floor if floor is None else floor
    return (t * np.log(1.0 / floor) ** (d_w - 1.0)) ** (1.0 / d_w)


def subgaussian_double_sum_many(
    mesh: LevelMesh,
    values: np.ndarray,
    ids: Optional[np.ndarray],
    t: float,
    p: float,
    weights: Optional[np.ndarray] = None,
    workers: Optional[int] = None,
) -> np.ndarray:
    """Σ_{x,y∈F} exp(−(d^{d_w}/t)^{1/(d_w−1)}) |f(x)−f(y)|^p w(x) w(y)，核在截断半径外舍去"""
    if not t > 0:
        raise DomainError(f"时间必须为正: {t}")
    d_w = mesh.spec.d_w
    stack = _as_stack(values)
    ids = _source_ids(mesh, ids)
    member = np.zeros(mesh.n_vertices, dtype=bool)
    member[ids] = True
    w = mesh.weights if weights is None else np.asarray(weights, dtype=float)
    r_cut = subgaussian_cutoff(t, d_w)
    _check_pairs(mesh, ids.size, r_cut, "subgaussian_double_sum")

    def task(block: np.ndarray) -> np.ndarray:
        src, tgt, dist = mesh.neighbors(block, r_cut)
        keep = member[tgt]
        src, tgt, dist = src[keep], tgt[keep], dist[keep]
        x = block[src]
        kernel = np.exp(-((dist ** d_w) / t) ** (1.0 / (d_w - 1.0)))
        diff = np.abs(stack[x] - stack[tgt]) ** p
        return (kernel * w[x] * w[tgt]) @ diff

    parts = ordered_map(task, chunked(ids, chunk_size(mesh, r_cut)), workers=workers)
    total = np.zeros(stack.shape[1])
    for part in parts:
        total = total + part
    return total


def subgaussian_double_sum(mesh, values, ids, t, p, weights=None, workers=None) -> float:
    return float(subgaussian_double_sum_many(mesh, values, ids, t, p, weights, workers)[0])


def l1_pair_integral(values: np.ndarray, weights: np.ndarray) -> float:
    """∬|f(x)−f(y)| w(x) w(y)，排序后 O(V log V)"""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    order = np.argsort(values, kind="stable")
    v, w = values[order], weights[order]
    before_w = np.cumsum(w) - w
    before_wv = np.cumsum(w * v) - w * v
    return float(2.0 * np.sum(w * (v * before_w - before_wv)))


def lp_pair_integral(values: np.ndarray, weights: np.ndarray, p: float) -> float:
    """∬|f(x)−f(y)|^p w(x) w(y)，直接求和，用于小集合"""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if p == 1:
        return l1_pair_integral(values, weights)
    diff = np.abs(values[:, None] - values[None, :]) ** p
    return float(weights @ diff @ weights)
