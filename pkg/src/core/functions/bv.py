"""
BV 机制：二进截断、水平集族（层饼分解）、滑动平均。
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from src.core.errors import DomainError
from src.core.functions.discrete import DiscreteFunction
from src.core.functions.pairs import map_pairs
from src.core.geometry.measure import chunk_size
from src.core.geometry.mesh import LevelMesh
from src.core.parallel import ordered_map

logger = logging.getLogger(__name__)

TAIL_FRACTION = 1e-15


def truncations(f: DiscreteFunction) -> Dict[int, DiscreteFunction]:
    """
    f_k = min(max(f − 2^k, 0), 2^k)，只返回非零的 k（升序）。

    下端截到 2^k < 1e-15·max f，因此 Σ_k f_k 与 f 的差不超过 2·1e-15·max f。

    Raises:
        DomainError: f 有负值（请先把 f 平移为非负）
    """
    values = f.values
    if values.size and values.min() < 0:
        raise DomainError(f"截断要求 f ≥ 0，最小值为 {values.min():.6g}，请先平移 f")
    top = float(values.max()) if values.size else 0.0
    if top == 0.0:
        return {}
    k_max = math.ceil(math.log2(top)) - 1
    k_min = math.floor(math.log2(TAIL_FRACTION * top))
    out = {}
    for k in range(k_min, k_max + 1):
        level = 2.0 ** k
        piece = np.minimum(np.maximum(values - level, 0.0), level)
        if np.any(piece > 0):
            out[k] = f.with_values(piece, f"{f.name}_k{k}")
    return out


@dataclass(frozen=True, eq=False)
class LevelSetFamily:
    """
    超水平集 E_i = {f > t_i} 及其求积宽度 gaps_i，
    对任意 x, y 有 Σ_i gaps_i |1_{E_i}(x) − 1_{E_i}(y)| = |f(x) − f(y)|（默认网格下精确成立）。
    """

    function: DiscreteFunction
    thresholds: np.ndarray
    gaps: np.ndarray

    def __len__(self):
        return self.thresholds.size

    def indicator(self, i: int) -> DiscreteFunction:
        values = (self.function.values > self.thresholds[i]).astype(float)
        return self.function.with_values(values, f"1{{{self.function.name}>{self.thresholds[i]:.6g}}}")

    def indicators(self) -> List[DiscreteFunction]:
        return [self.indicator(i) for i in range(len(self))]

    def layer_cake(self, x: int, y: int) -> float:
        fx, fy = self.function.values[x], self.function.values[y]
        between = (self.thresholds >= min(fx, fy)) & (self.thresholds < max(fx, fy))
        return float(self.gaps[between].sum())

    def straddle_masses(
        self,
        F: Optional[np.ndarray],
        r: float,
        weights: Optional[np.ndarray] = None,
        divide: bool = False,
        workers: Optional[int] = None,
    ) -> np.ndarray:
        """
        一次配对遍历得到每个阈值的 W_{F,r,1}(1_{E_i})：
        点对 (x,y) 对满足 min ≤ t_i < max 的阈值贡献 coef，用差分数组累加。
        """
        values = self.function.values
        mesh = self.function.mesh
        n = self.thresholds.size

        def reduce(_, x, y, coef):
            lo = np.searchsorted(self.thresholds, np.minimum(values[x], values[y]), side="left")
            hi = np.searchsorted(self.thresholds, np.maximum(values[x], values[y]), side="left")
            delta = np.bincount(lo, weights=coef, minlength=n + 1) - np.bincount(hi, weights=coef, minlength=n + 1)
            return np.cumsum(delta)[:n]

        parts = map_pairs(mesh, F, r, reduce, weights, divide, workers, "straddle_masses")
        total = np.zeros(n)
        for part in parts:
            total = total + part
        return total


def level_sets(f: DiscreteFunction, thresholds: Optional[Sequence[float]] = None) -> LevelSetFamily:
    """
    默认阈值取相邻不同取值的中点，宽度为相邻取值之差。
    自定义阈值需升序，宽度取到下一个阈值的距离（最后一个沿用前一个）。
    """
    if thresholds is None:
        distinct = np.unique(f.values)
        cuts = 0.5 * (distinct[1:] + distinct[:-1])
        gaps = np.diff(distinct)
    else:
        cuts = np.asarray(thresholds, dtype=float)
        if np.any(np.diff(cuts) < 0):
            raise DomainError("阈值必须升序")
        gaps = np.diff(cuts)
        gaps = np.append(gaps, gaps[-1] if gaps.size else 0.0)
    cuts.setflags(write=False)
    gaps.setflags(write=False)
    return LevelSetFamily(function=f, thresholds=cuts, gaps=gaps)


def moving_average_at(
    f: DiscreteFunction,
    s: float,
    ids: Optional[np.ndarray] = None,
    workers: Optional[int] = None,
) -> np.ndarray:
    """f_s(x) = Σ_{y∈B(x,s)} f(y) w(y) / μ̂(B(x,s))，对 ids 中的顶点"""
    if not s > 0:
        raise DomainError(f"滑动平均半径必须为正: {s}")
    mesh: LevelMesh = f.mesh
    ids = np.arange(mesh.n_vertices) if ids is None else np.asarray(ids, dtype=np.int64)
    w = mesh.weights
    if s >= mesh.diameter:
        return np.full(ids.size, f.mean())
    weighted = f.values * w
    size = chunk_size(mesh, s)

    def task(start: int) -> np.ndarray:
        block = ids[start:start + size]
        src, tgt, _ = mesh.neighbors(block, s)
        num = np.bincount(src, weights=weighted[tgt], minlength=block.size)
        den = np.bincount(src, weights=w[tgt], minlength=block.size)
        return num / den

    parts = ordered_map(task, range(0, ids.size, size), workers=workers)
    return np.concatenate(parts) if parts else np.zeros(0)


def moving_average(f: DiscreteFunction, s: float, workers: Optional[int] = None) -> DiscreteFunction:
    return f.with_values(moving_average_at(f, s, workers=workers), f"{f.name}_s{s:.3g}")
