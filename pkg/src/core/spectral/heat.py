"""
谱表示下的 Neumann 热核与热半群。

p_t(x,y) = Σ_j e^{-λ_j t} φ_j(x) φ_j(y)，P_t f = Σ_j e^{-λ_j t} ⟨f, φ_j⟩_w φ_j。
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel
from scipy.spatial.distance import cdist

from src import ENV
from src.core.errors import BudgetError, DomainError, FitError, WindowError
from src.core.functions.discrete import DiscreteFunction, as_values
from src.core.lab.fitting import ExponentFit, fit_exponent
from src.core.parallel import chunked, ordered_map
from src.core.spectral.dirichlet import SpectralData

logger = logging.getLogger(__name__)

WINDOW_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class HeatKernelSlice:
    t: float
    values: np.ndarray

    def row(self, x: int) -> np.ndarray:
        return self.values[x]


class WeakBERow(BaseModel):
    t: float
    numerator: float
    ratio: float


class HeatAsymptotics(BaseModel):
    diagonal: ExponentFit
    target: float
    passed: bool
    point: Optional[int] = None
    weak_be: List[WeakBERow] = []
    off_diagonal: Optional[ExponentFit] = None


def _check_time(t: float):
    if not t > 0:
        raise DomainError(f"时间必须为正: {t}")


def heat_kernel(data: SpectralData, t: float) -> HeatKernelSlice:
    """
    Raises:
        DomainError: t ≤ 0
        BudgetError: 顶点数超出稠密预算
    """
    _check_time(t)
    n = data.mesh.n_vertices
    if n > ENV.dense_limit:
        raise BudgetError("heat_kernel", ENV.dense_limit, n)
    decay = np.exp(-data.eigenvalues * t)
    phi = data.eigenvectors
    values = (phi * decay[None, :]) @ phi.T
    values = 0.5 * (values + values.T)
    values.setflags(write=False)
    return HeatKernelSlice(t=float(t), values=values)


def semigroup_values(data: SpectralData, values: np.ndarray, t: float) -> np.ndarray:
    """对 (V,) 或 (V, k) 的值数组作用 P_t"""
    _check_time(t)
    w = data.mesh.weights
    phi = data.eigenvectors
    weighted = values * (w if values.ndim == 1 else w[:, None])
    coeff = phi.T @ weighted
    decay = np.exp(-data.eigenvalues * t)
    coeff = coeff * (decay if values.ndim == 1 else decay[:, None])
    return phi @ coeff


def semigroup_apply(data: SpectralData, f, t: float) -> DiscreteFunction:
    values = as_values(f, data.mesh)
    name = f.name if isinstance(f, DiscreteFunction) else ""
    return DiscreteFunction(data.mesh, semigroup_values(data, values, t), f"P_{t:g}({name})")


def heat_trace(data: SpectralData, t: float) -> float:
    _check_time(t)
    return float(np.exp(-data.eigenvalues * t).sum())


def heat_diagonal(data: SpectralData, x: int, t: float) -> float:
    _check_time(t)
    phi_x = data.eigenvectors[x]
    return float(np.exp(-data.eigenvalues * t) @ (phi_x * phi_x))


def resolvable_window(data: SpectralData) -> Tuple[float, float]:
    return 10.0 / data.lambda_max, 0.1


def check_window(data: SpectralData, times: Sequence[float]):
    lo, hi = resolvable_window(data)
    if lo >= hi:
        raise WindowError(f"可分辨时间窗 [{lo:.3e}, {hi}] 为空，网格层级不足")
    for t in times:
        if t < lo * (1 - WINDOW_SLACK) or t > hi * (1 + WINDOW_SLACK):
            raise WindowError(f"时间 {t:.6g} 不在可分辨窗口 [{lo:.6g}, {hi:g}] 内")


def default_time_grid(data: SpectralData, count: int = 12) -> np.ndarray:
    lo, hi = resolvable_window(data)
    hi = min(hi, 1.0 / data.lambda_1)
    if lo >= hi:
        raise WindowError(f"可分辨时间窗 [{lo:.3e}, {hi:.3e}] 为空，网格层级不足")
    return np.geomspace(lo, hi, count)


def weak_be_ratio(
    data: SpectralData,
    g: np.ndarray,
    t: float,
    decay_rate: float = 0.0,
    workers: Optional[int] = None,
) -> Tuple[float, float]:
    """
    sup_{x≠y} |P_t g(x) − P_t g(y)| / (d^{d_w−d_h} t^{-(1−d_h/d_w)} e^{-decay_rate·t} ‖g‖_∞)

    Returns:
        (最大差值, 最大比值)
    """
    mesh = data.mesh
    spec = mesh.spec
    n = mesh.n_vertices
    if n * n > ENV.max_pairs:
        raise BudgetError("weak_be_ratio", ENV.max_pairs, n * n)
    g = np.asarray(g, dtype=float)
    u = semigroup_values(data, g, t)
    gap = spec.d_w - spec.d_h
    norm = float(np.abs(g).max())
    scale = t ** (-(1.0 - spec.d_h / spec.d_w)) * np.exp(-decay_rate * t) * norm

    def task(block: np.ndarray) -> Tuple[float, float]:
        dist = cdist(mesh.points[block], mesh.points)
        diff = np.abs(u[block, None] - u[None, :])
        mask = dist > 0
        num = float(diff.max()) if diff.size else 0.0
        if scale == 0 or not np.any(mask):
            return num, 0.0
        return num, float((diff[mask] / dist[mask] ** gap).max() / scale)

    parts = ordered_map(task, chunked(np.arange(n), max(1, 2_000_000 // max(n, 1))), workers=workers)
    return max(p[0] for p in parts), max(p[1] for p in parts)


def off_diagonal_fit(data: SpectralData, t: float, x: int = 0) -> ExponentFit:
    """
    log(p_t(x,x)/p_t(x,y)) 对 log(d^{d_w}/t) 的斜率，目标 1/(d_w − 1)。
    只用核值高于截断阈值且对数比 > 1 的远端点。
    """
    spec = data.mesh.spec
    phi = data.eigenvectors
    decay = np.exp(-data.eigenvalues * t)
    row = (phi[x] * decay) @ phi.T
    diag = row[x]
    dist = np.linalg.norm(data.mesh.points - data.mesh.points[x], axis=1)
    ratio = np.log(diag / np.where(row > ENV.kernel_floor, row, np.nan))
    keep = (dist > 0) & np.isfinite(ratio) & (ratio > 1.0)
    return fit_exponent(dist[keep] ** spec.d_w / t, ratio[keep], target=1.0 / (spec.d_w - 1.0))


def heat_asymptotics(
    data: SpectralData,
    times: Optional[Sequence[float]] = None,
    x: Optional[int] = None,
    g: Optional[np.ndarray] = None,
    off_diagonal: bool = False,
    tol: Optional[float] = None,
) -> HeatAsymptotics:
    """
    (a) log p_t(x,x)（未给 x 时用热迹均值 Σ e^{-λt}/μ(K)）对 log t 的斜率，目标 −d_h/d_w；
    (b) 给定 g 时逐个 t 计算弱 Bakry-Émery 比值；
    (c) 可选的非对角伸展指数拟合。

    Raises:
        WindowError: 时间网格不在 [10/λ_max, 0.1] 内
    """
    tol = ENV.heat_slope_tol if tol is None else tol
    spec = data.mesh.spec
    times = default_time_grid(data) if times is None else np.asarray(times, dtype=float)
    check_window(data, times)
    if x is None:
        samples = [heat_trace(data, t) / data.mesh.total_mass for t in times]
    else:
        samples = [heat_diagonal(data, x, t) for t in times]
    target = -spec.d_h / spec.d_w
    fit = fit_exponent(times, samples, target=target, tol=tol)
    rows = []
    if g is not None:
        for t in times:
            num, ratio = weak_be_ratio(data, g, float(t))
            rows.append(WeakBERow(t=float(t), numerator=num, ratio=ratio))
    off = None
    if off_diagonal:
        try:
            off = off_diagonal_fit(data, float(times[len(times) // 2]), 0 if x is None else x)
        except FitError as e:
            logger.warning("非对角拟合样本不足: %s", e)
    logger.info("热核对角斜率 %.4f（目标 %.4f）", fit.slope, target)
    return HeatAsymptotics(diagonal=fit, target=target, passed=bool(fit.passed), point=x, weak_be=rows, off_diagonal=off)
