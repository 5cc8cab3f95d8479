import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from src.core.errors import DomainError
from src.core.geometry.mesh import LevelMesh

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DiscreteFunction:
    """网格顶点上的实值函数，L^p 范数按顶点权重计算。"""

    mesh: LevelMesh
    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True).ravel()
        if values.size != self.mesh.n_vertices:
            raise DomainError(f"函数 {self.name or '<匿名>'} 有 {values.size} 个值，网格有 {self.mesh.n_vertices} 个顶点")
        if not np.all(np.isfinite(values)):
            raise DomainError(f"函数 {self.name or '<匿名>'} 含有非有限值")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size

    def with_values(self, values, name: Optional[str] = None) -> "DiscreteFunction":
        return DiscreteFunction(self.mesh, values, self.name if name is None else name)

    def _other(self, other) -> np.ndarray:
        if isinstance(other, DiscreteFunction):
            if other.mesh is not self.mesh:
                raise DomainError("两个函数不在同一网格上")
            return other.values
        return np.asarray(other, dtype=float)

    def __add__(self, other):
        return self.with_values(self.values + self._other(other))

    def __sub__(self, other):
        return self.with_values(self.values - self._other(other))

    def __mul__(self, scalar: float):
        return self.with_values(self.values * float(scalar))

    __rmul__ = __mul__

    def shift(self, c: float) -> "DiscreteFunction":
        return self.with_values(self.values + c, f"{self.name}+{c:g}")

    def mean(self, weights: Optional[np.ndarray] = None) -> float:
        w = self.mesh.weights if weights is None else weights
        return float(self.values @ w / w.sum())

    def lp_norm(self, p: float, weights: Optional[np.ndarray] = None, ids: Optional[np.ndarray] = None) -> float:
        w = self.mesh.weights if weights is None else np.asarray(weights, dtype=float)
        values = self.values
        if ids is not None:
            values, w = values[ids], w[ids]
        if np.isinf(p):
            return float(np.abs(values[w > 0]).max()) if np.any(w > 0) else 0.0
        return float((np.abs(values) ** p @ w) ** (1.0 / p))

    def sup_norm(self, ids: Optional[np.ndarray] = None) -> float:
        values = self.values if ids is None else self.values[ids]
        return float(np.abs(values).max()) if values.size else 0.0

    def oscillation(self, ids: Optional[np.ndarray] = None) -> float:
        values = self.values if ids is None else self.values[ids]
        return float(values.max() - values.min()) if values.size else 0.0

    def is_constant(self, tol: float = 0.0) -> bool:
        return self.oscillation() <= tol


def as_values(f: Union[DiscreteFunction, np.ndarray], mesh: LevelMesh) -> np.ndarray:
    if isinstance(f, DiscreteFunction):
        if f.mesh is not mesh:
            raise DomainError("函数与网格不匹配")
        return f.values
    values = np.asarray(f, dtype=float).ravel()
    if values.size != mesh.n_vertices:
        raise DomainError(f"数组长度 {values.size} 与网格顶点数 {mesh.n_vertices} 不符")
    return values


def deviation_norm(values: np.ndarray, weights: np.ndarray, p: float) -> float:
    """‖f − f_w‖_{L^p(w)}，f_w 为 w-加权均值"""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    total = weights.sum()
    if total <= 0:
        raise DomainError("权重总和必须为正")
    mean = values @ weights / total
    return float((np.abs(values - mean) ** p @ weights) ** (1.0 / p))
