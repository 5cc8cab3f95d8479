"""
应用：球上的 Sobolev 不等式、极大函数、Lusin-Hölder 与 Hajłasz 常数。
"""
import logging
from typing import Optional, Tuple

import numpy as np

from src.core.functions.discrete import DiscreteFunction
from src.core.functions.maximal import MaximalField
from src.core.lab.context import LabContext
from src.core.lab.covering import covering
from src.core.lab.registry import register_check
from src.core.lab.report import CheckReport, ReportBuilder

logger = logging.getLogger(__name__)


@register_check("sobolev")
def check_sobolev(ctx: LabContext, p: Optional[float] = None) -> CheckReport:
    """‖f‖_{L^∞(B)} ≤ C (R^{-d_h/p} ‖f‖_{L^p(B)} + R^{(1−1/p)(d_w−d_h)} Var_{B(x₀,C₂R),p}(f))"""
    p = ctx.config.p if p is None else p
    ctx.require_bv_case(p, "sobolev")
    mesh, spec = ctx.mesh, ctx.spec
    A = ctx.enlargement
    w = mesh.weights
    builder = ReportBuilder("sobolev")
    for k in ctx.ball_levels():
        R = ctx.ball_radius(k)
        for x0 in ctx.ball_centers:
            cover = covering(mesh, int(x0), R, R / spec.length_factor, A)
            name = f"ball{k}[{x0}]"
            if not ctx.ball_inside(x0, cover.c2 * R):
                builder.skip(f"{name}: B(x₀, C₂R) 越出截断区域")
                continue
            ids = mesh.ball_query(mesh.points[x0], R)
            big = mesh.ball_query(mesh.points[x0], cover.c2 * R)
            for f in ctx.suite:
                lhs = f.sup_norm(ids)
                mass_term = R ** (-spec.d_h / p) * f.lp_norm(p, w, ids)
                var = ctx.variation(f, f"{name}*C2", big, p, "ks", min_level=ctx.first_level_below(R / spec.length_factor))
                var_term = R ** ((1.0 - 1.0 / p) * (spec.d_w - spec.d_h)) * var
                builder.add(f.name, name, lhs, mass_term + var_term, group=k, scale=R)
            builder.measure(f"c2[{name}]", cover.c2)
    return builder.finish(limit=ctx.config.stability_factor)


def sample_pairs(ctx: LabContext, count: int) -> Tuple[np.ndarray, np.ndarray]:
    """固定种子抽取 count 个 x ≠ y 的顶点对"""
    n = ctx.mesh.n_vertices
    rng = np.random.default_rng(ctx.config.seed)
    x = rng.integers(0, n, size=count)
    y = (x + rng.integers(1, n, size=count)) % n
    return x, y


def holder_ratios(field: MaximalField, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    |f(x)−f(y)| / (d(x,y)^{α_p d_w} (g(x)+g(y)))

    Returns:
        (比值，g(x)+g(y) = 0 的点对掩码；这些点对上比值记为 0)
    """
    mesh = field.mesh
    spec = mesh.spec
    f = field.function.values
    g = field.values
    dist = np.linalg.norm(mesh.points[x] - mesh.points[y], axis=1)
    num = np.abs(f[x] - f[y])
    den = dist ** (spec.alpha(field.p) * spec.d_w) * (g[x] + g[y])
    zero = den == 0
    ratio = np.zeros_like(num)
    np.divide(num, den, out=ratio, where=~zero)
    return ratio, zero


def _zero_pairs(builder: ReportBuilder, f: DiscreteFunction, x, y, zero):
    gap = float(np.abs(f.values[x[zero]] - f.values[y[zero]]).max()) if zero.any() else 0.0
    builder.assert_that(f"zero_g_pairs[{f.name}]", gap, 0.0, holds=gap == 0.0, hard=True)


@register_check("lusin_holder")
def check_lusin_holder(ctx: LabContext, p: Optional[float] = None) -> CheckReport:
    """|f(x)−f(y)| ≤ C d(x,y)^{α_p d_w} (g(x)+g(y))，抽样点对加倍后最大比值的变化因子即稳定性"""
    p = ctx.config.p if p is None else p
    ctx.require_bv_case(p, "lusin_holder")
    half = ctx.config.pair_samples
    x, y = sample_pairs(ctx, 2 * half)
    builder = ReportBuilder("lusin_holder")
    doubling = 1.0
    for f in ctx.suite:
        field = ctx.maximal(f, p)
        ratio, zero = holder_ratios(field, x, y)
        _zero_pairs(builder, f, x, y, zero)
        first, full = float(ratio[:half].max()), float(ratio.max())
        if first > 0:
            doubling = max(doubling, full / first)
        builder.add(f.name, f"pairs[{2 * half}]", full, 1.0, group=f.name)
        builder.measure(f"max_ratio_half[{f.name}]", first)
    return builder.finish(limit=ctx.config.doubling_factor, stability=doubling)


@register_check("maximal")
def check_maximal(ctx: LabContext, p: Optional[float] = None) -> CheckReport:
    """弱 L^p 量 sup_t t^p μ̂({g>t}) 与 Var_{K,p}(f)^p 之比，在函数之间应稳定"""
    p = ctx.config.p if p is None else p
    ctx.require_bv_case(p, "maximal")
    builder = ReportBuilder("maximal", zero_tol=1e-12)
    for f in ctx.suite:
        field = ctx.maximal(f, p)
        var = ctx.variation(f, "K", None, p, "ks")
        builder.add(f.name, "K", field.weak_lp(p), var ** p, group=f.name)
        if var > 0:
            builder.measure(f"strong_lp_ratio[{f.name}]", field.lp_norm(p) / var)
    return builder.finish(limit=ctx.config.stability_factor)


@register_check("hajlasz")
def check_hajlasz(ctx: LabContext, p: Optional[float] = None) -> CheckReport:
    """‖g‖_{L^p} / Var_{K,p}(f) 以及抽样点对上的 Hajłasz 常数，只测量"""
    p = ctx.config.p if p is None else p
    ctx.require_bv_case(p, "hajlasz")
    x, y = sample_pairs(ctx, ctx.config.pair_samples)
    builder = ReportBuilder("hajlasz", zero_tol=1e-12)
    for f in ctx.suite:
        field = ctx.maximal(f, p)
        var = ctx.variation(f, "K", None, p, "ks")
        builder.add(f.name, "K", field.lp_norm(p), var, group=f.name)
        ratio, zero = holder_ratios(field, x, y)
        _zero_pairs(builder, f, x, y, zero)
        builder.measure(f"hajlasz_constant[{f.name}]", float(ratio.max()))
    return builder.finish()
