"""
Korevaar-Schoen 与亚高斯 p-变差剖面。

尺度 r_k = β̂ L^{t-k}（t 为截断层级），k 取可分辨范围 [k_min, n-1]；
亚高斯型用 t_k = r_k^{d_w}。liminf 用各尺度归一化值的最小值代替，
最细尺度上的值也一并给出。
"""
import logging
from typing import List, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from src.core.errors import DomainError, ResolutionError, UsageError
from src.core.functions.discrete import DiscreteFunction, as_values
from src.core.functions.pairs import ks_double_sum_many, subgaussian_double_sum_many
from src.core.geometry.mesh import LevelMesh
from src.core.geometry.separation import cached_beta
from src.core.spectral.dirichlet import SpectralData
from src.core.spectral.heat import check_window, default_time_grid, heat_kernel

logger = logging.getLogger(__name__)

Kind = Literal["ks", "subgaussian"]


class VariationEntry(BaseModel):
    level: int
    scale: float
    raw: float
    normalized: float


class VariationProfile(BaseModel):
    kind: Kind
    p: float
    entries: List[VariationEntry]
    estimate: float
    finest: float
    support_size: int

    def rows(self) -> List[dict]:
        return [{"kind": self.kind, "p": self.p, "level": e.level, "r_or_t": e.scale,
                 "raw": e.raw, "normalized": e.normalized} for e in self.entries]


def check_exponent(p: float):
    if not 1.0 <= p <= 2.0:
        raise UsageError(f"指数 p 必须在 [1, 2] 内: {p}")


def normalize_kind(kind: str) -> Kind:
    kind = kind.lower().replace("-", "").replace("_", "")
    if kind in ("ks", "korevaarschoen"):
        return "ks"
    if kind in ("subgaussian", "sg", "heat"):
        return "subgaussian"
    raise UsageError(f"未知的变差类型: {kind}")


def resolvable_levels(mesh: LevelMesh, k_min: int = 1, k_max: Optional[int] = None) -> List[int]:
    k_max = mesh.level - 1 if k_max is None else min(k_max, mesh.level - 1)
    levels = list(range(k_min, k_max + 1))
    if not levels:
        raise ResolutionError(f"网格层级 n={mesh.level} 下没有可分辨尺度（k ∈ [{k_min}, {k_max}]）")
    return levels


def scale_radius(mesh: LevelMesh, beta: float, k: int) -> float:
    return beta * mesh.spec.length_factor ** (mesh.truncation - k)


def normalize_ks(raw: float, r: float, p: float, mesh: LevelMesh) -> float:
    spec = mesh.spec
    if p == 1.0:
        return r ** (-2.0 * spec.d_h) * raw
    return r ** (-spec.alpha(p) * spec.d_w) * raw ** (1.0 / p)


def normalize_subgaussian(raw: float, t: float, p: float, mesh: LevelMesh) -> float:
    spec = mesh.spec
    # p = 1 时 α_1 + d_h/d_w = 2 d_h/d_w，与 1-变差的归一化一致
    return t ** (-(spec.alpha(p) + spec.d_h / spec.d_w)) * raw ** (1.0 / p)


def variation_many(
    mesh: LevelMesh,
    values: np.ndarray,
    ids: Optional[np.ndarray],
    p: float,
    kind: str = "ks",
    beta: Optional[float] = None,
    levels: Optional[Sequence[int]] = None,
    weights: Optional[np.ndarray] = None,
    workers: Optional[int] = None,
) -> List[VariationProfile]:
    """
    对 (V, k) 的一组函数在同一集合 F 上计算变差剖面，每个尺度只做一次配对遍历。

    Args:
        beta: 分离常数估计；缺省时现场估计
        levels: 尺度层级；缺省为全部可分辨层级
        weights: 测度覆盖（例如限制在单形上的测度）
    """
    check_exponent(p)
    kind = normalize_kind(kind)
    stack = np.asarray(values, dtype=float)
    stack = stack[:, None] if stack.ndim == 1 else stack
    if stack.shape[0] != mesh.n_vertices:
        raise DomainError("函数值个数与网格顶点数不符")
    if beta is None:
        beta = cached_beta(mesh.spec).beta
    levels = resolvable_levels(mesh) if levels is None else list(levels)
    if not levels or max(levels) > mesh.level - 1:
        raise ResolutionError(f"尺度层级 {levels} 在 n={mesh.level} 的网格上不可分辨")
    support = mesh.n_vertices if ids is None else int(np.unique(ids).size)
    entries = [[] for _ in range(stack.shape[1])]
    for k in levels:
        r = scale_radius(mesh, beta, k)
        if kind == "ks":
            raw = ks_double_sum_many(mesh, stack, ids, r, p, weights=weights, divide=(p != 1.0), workers=workers)
            norm = [normalize_ks(v, r, p, mesh) for v in raw]
            scale = r
        else:
            t = r ** mesh.spec.d_w
            raw = subgaussian_double_sum_many(mesh, stack, ids, t, p, weights=weights, workers=workers)
            norm = [normalize_subgaussian(v, t, p, mesh) for v in raw]
            scale = t
        for col in range(stack.shape[1]):
            entries[col].append(VariationEntry(level=k, scale=scale, raw=float(raw[col]), normalized=float(norm[col])))
    profiles = []
    for col_entries in entries:
        normalized = [e.normalized for e in col_entries]
        profiles.append(VariationProfile(
            kind=kind,
            p=p,
            entries=col_entries,
            estimate=float(min(normalized)),
            finest=float(col_entries[-1].normalized),
            support_size=support,
        ))
    return profiles


def variation(
    f: DiscreteFunction,
    F: Optional[np.ndarray] = None,
    p: float = 2.0,
    kind: str = "ks",
    beta: Optional[float] = None,
    levels: Optional[Sequence[int]] = None,
    weights: Optional[np.ndarray] = None,
    workers: Optional[int] = None,
) -> VariationProfile:
    """
    Raises:
        ResolutionError: 没有可分辨尺度
        UsageError: p 不在 [1,2] 或类型未知
    """
    values = as_values(f, f.mesh)
    return variation_many(f.mesh, values, F, p, kind, beta, levels, weights, workers)[0]


class BesovRow(BaseModel):
    t: float
    double_sum: float
    value: float


def besov_profile(
    f: DiscreteFunction,
    p: float,
    alpha: float,
    data: SpectralData,
    times: Optional[Sequence[float]] = None,
) -> List[BesovRow]:
    """逐个 t 计算 t^{-α} (∬ p_t(x,y) |f(x)−f(y)|^p w w)^{1/p}"""
    if data.mesh is not f.mesh:
        raise DomainError("函数与谱数据不在同一网格上")
    times = default_time_grid(data) if times is None else np.asarray(times, dtype=float)
    check_window(data, times)
    w = f.mesh.weights
    diff = np.abs(f.values[:, None] - f.values[None, :]) ** p
    rows = []
    for t in times:
        kernel = heat_kernel(data, float(t)).values
        total = float(w @ (np.clip(kernel, 0.0, None) * diff) @ w)
        rows.append(BesovRow(t=float(t), double_sum=total, value=float(t) ** (-alpha) * total ** (1.0 / p)))
    return rows


def besov_seminorm(
    f: DiscreteFunction,
    p: float,
    alpha: float,
    data: SpectralData,
    times: Optional[Sequence[float]] = None,
) -> float:
    """
    Raises:
        WindowError: 时间网格不在可分辨窗口内
    """
    return max(row.value for row in besov_profile(f, p, alpha, data, times))
