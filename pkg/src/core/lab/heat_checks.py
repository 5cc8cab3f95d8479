"""
热半群检验：正则性、游走维数指数、Besov 半范数与能量的比较。
"""
import logging
from typing import Optional

import numpy as np

from src.core.errors import BudgetError
from src.core.functions.variation import besov_seminorm
from src.core.lab.context import LabContext
from src.core.lab.registry import register_check
from src.core.lab.report import CheckReport, ReportBuilder
from src.core.spectral.dirichlet import energy
from src.core.spectral.heat import (
    default_time_grid,
    heat_asymptotics,
    heat_kernel,
    semigroup_values,
    weak_be_ratio,
)

logger = logging.getLogger(__name__)

REGULARITY_EXPONENTS = (2.0, 3.0, 4.0)


@register_check("heat_regularity")
def check_heat_regularity(ctx: LabContext, probes: int = 3, grid: int = 4) -> CheckReport:
    """
    (a) 弱 Bakry-Émery 比值带 e^{-(λ_1/4)t} 衰减；
    (b) sup_s s^{-α_q}(∬ p_s |P_t f(x)−P_t f(y)|^q)^{1/q} 与 t^{-α_q} e^{-λ_1 t/4} ‖f‖_q 之比，q ∈ {2,3,4}；
    (c) ‖P_t f − f̄‖_p 随 t 单调不增（硬断言）。

    Args:
        probes: (a)(b) 使用的非常数检验函数个数
        grid: (b) 中 s、t 网格的点数
    """
    data = ctx.spectral
    mesh, spec = ctx.mesh, ctx.spec
    w = mesh.weights
    p = ctx.config.p
    times = default_time_grid(data)
    decay = data.lambda_1 / 4.0
    builder = ReportBuilder("heat_regularity", zero_tol=1e-12)

    # (c)
    for f in ctx.suite:
        mean = f.mean()
        norms = [float((np.abs(semigroup_values(data, f.values, float(t)) - mean) ** p @ w) ** (1.0 / p)) for t in times]
        slack = 1e-10 * max(1.0, norms[0])
        worst = max((b - a for a, b in zip(norms[:-1], norms[1:])), default=0.0)
        builder.assert_that(f"monotone_decay[{f.name}]", worst, 0.0, slack=slack, hard=True)

    probe_set = ctx.nonconstant_suite[:probes]
    # (a)
    for f in probe_set:
        for i, t in enumerate(times):
            try:
                _, ratio = weak_be_ratio(data, f.values, float(t), decay_rate=decay, workers=ctx.workers)
            except BudgetError as e:
                builder.skip(f"weak_be[{f.name}]: {e}")
                break
            builder.add(f.name, "weak_be", ratio, 1.0, group=f"a{i}", scale=float(t))

    # (b)
    coarse_t = times[np.linspace(0, times.size - 1, grid).astype(int)]
    kernels = [heat_kernel(data, float(s)) for s in coarse_t]
    for q in REGULARITY_EXPONENTS:
        alpha = spec.alpha(q)
        for f in probe_set:
            norm = float((np.abs(f.values) ** q @ w) ** (1.0 / q))
            for t in coarse_t:
                u = semigroup_values(data, f.values, float(t))
                diff = np.abs(u[:, None] - u[None, :]) ** q
                sup = max(float(s) ** (-alpha) * float(w @ (np.clip(k.values, 0.0, None) * diff) @ w) ** (1.0 / q)
                          for s, k in zip(coarse_t, kernels))
                bound = float(t) ** (-alpha) * np.exp(-decay * float(t)) * norm
                builder.add(f.name, f"q={q:g}", sup, bound, group=f"b{q:g}", scale=float(t))

    # φ_1 的特征关系 ‖P_t φ_1‖_2 = e^{-λ_1 t}
    phi = data.eigenfunction(1)
    t = float(times[0])
    got = float(np.sqrt(semigroup_values(data, phi.values, t) ** 2 @ w))
    builder.assert_that("eigen_decay", abs(got - np.exp(-data.lambda_1 * t)), 0.0, slack=1e-8)
    return builder.finish()


@register_check("walk_dimension")
def check_walk_dimension(ctx: LabContext, point: Optional[int] = None, off_diagonal: bool = True) -> CheckReport:
    """热核对角（或热迹）log-log 斜率对比 −d_h/d_w，容差 heat_slope_tol"""
    data = ctx.spectral
    result = heat_asymptotics(data, x=point, off_diagonal=off_diagonal, tol=ctx.config.heat_slope_tol)
    builder = ReportBuilder("walk_dimension")
    for log_t, log_q in zip(result.diagonal.log_scale, result.diagonal.log_quantity):
        builder.add("heat_diagonal" if point is not None else "heat_trace", "K", float(np.exp(log_q)), 1.0,
                    group="diagonal", scale=float(np.exp(log_t)))
    builder.measure("slope", result.diagonal.slope)
    builder.measure("target", result.target)
    if result.off_diagonal is not None:
        builder.measure("off_diagonal_slope", result.off_diagonal.slope)
        builder.measure("off_diagonal_target", result.off_diagonal.target)
    return builder.finish(fit=result.diagonal)


@register_check("besov")
def check_besov(ctx: LabContext, grid: int = 12) -> CheckReport:
    """besov_seminorm(f, 2, 1/2) / √E(f)，并报告时间网格加密前后的变化因子"""
    data = ctx.spectral
    builder = ReportBuilder("besov", zero_tol=1e-12)
    fine = default_time_grid(data, grid)
    coarse = fine[::2]
    refinement = 1.0
    for f in ctx.suite:
        value = besov_seminorm(f, 2.0, 0.5, data, fine)
        rough = besov_seminorm(f, 2.0, 0.5, data, coarse)
        builder.add(f.name, "K", value, np.sqrt(energy(ctx.form, f)), group=f.name)
        if rough > 0:
            refinement = max(refinement, value / rough)
    builder.measure("grid_refinement", refinement)
    return builder.finish(limit=ctx.config.stability_factor)
