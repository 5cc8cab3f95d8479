"""
Poincaré 与伪 Poincaré 不等式检验。
"""
import logging
from typing import Literal, Optional

import numpy as np

from src.core.functions.bv import moving_average_at
from src.core.functions.discrete import deviation_norm
from src.core.lab.context import LabContext
from src.core.lab.covering import covering
from src.core.lab.fitting import fit_or_none
from src.core.lab.registry import register_check
from src.core.lab.report import CheckReport, ReportBuilder
from src.core.spectral.heat import default_time_grid, semigroup_values

logger = logging.getLogger(__name__)

ZERO_TOL = 1e-10


def _lp(values: np.ndarray, weights: np.ndarray, p: float) -> float:
    return float((np.abs(values) ** p @ weights) ** (1.0 / p))


@register_check("poincare")
def check_poincare(
    ctx: LabContext,
    locus: Literal["simplex", "ball"] = "simplex",
    kind: Literal["ks", "subgaussian"] = "ks",
    p: Optional[float] = None,
) -> CheckReport:
    """
    ‖f − f_locus‖_{L^p(locus)} ≤ C r^{α_p d_w} Var(f; 放大位置)。
    单形位置用单形本身，球位置用 B(x₀, A·R)。
    """
    p = ctx.config.p if p is None else p
    ctx.require_bv_case(p, "poincare")
    mesh, spec = ctx.mesh, ctx.spec
    exponent = spec.alpha(p) * spec.d_w
    builder = ReportBuilder(f"poincare[{locus},{kind}]", zero_tol=ZERO_TOL)
    harmonic = next((f for f in ctx.suite if f.name.startswith("harmonic")), None)
    fit_scales, fit_lhs = [], []

    if locus == "simplex":
        for m in ctx.simplex_levels():
            r = mesh.level_diameter(m)
            worst = 0.0
            for idx in ctx.sample_simplices(m):
                ids = mesh.simplex_vertex_ids(m, idx)
                w = mesh.simplex_weights(m, idx)
                name = f"simplex{m}[{idx}]"
                for f in ctx.suite:
                    lhs = deviation_norm(f.values[ids], w[ids], p)
                    var = ctx.variation(f, name, ids, p, kind, weights=w, min_level=m + 1)
                    builder.add(f.name, name, lhs, r ** exponent * var, group=m, scale=r)
                    if f is harmonic:
                        worst = max(worst, lhs)
            fit_scales.append(r)
            fit_lhs.append(worst)
    else:
        A = ctx.enlargement
        w = mesh.weights
        for k in ctx.ball_levels():
            R = ctx.ball_radius(k)
            worst = 0.0
            for x0 in ctx.ball_centers:
                name = f"ball{k}[{x0}]"
                if not ctx.ball_inside(x0, A * R):
                    builder.skip(f"{name}: B(x₀, A·R) 越出截断区域")
                    continue
                ids = mesh.ball_query(mesh.points[x0], R)
                big = mesh.ball_query(mesh.points[x0], A * R)
                for f in ctx.suite:
                    lhs = deviation_norm(f.values[ids], w[ids], p)
                    var = ctx.variation(f, f"{name}*A", big, p, kind, min_level=ctx.first_level_below(R))
                    builder.add(f.name, name, lhs, R ** exponent * var, group=k, scale=R)
                    if f is harmonic:
                        worst = max(worst, lhs)
            fit_scales.append(R)
            fit_lhs.append(worst)

    fit = None
    if harmonic is not None:
        fit = fit_or_none(fit_scales, fit_lhs, exponent + spec.d_h / p, ctx.config.exponent_tol)
    builder.measure("alpha_p_d_w", exponent)
    return builder.finish(limit=ctx.config.stability_factor, fit=fit)


@register_check("pseudo_poincare")
def check_pseudo_poincare(
    ctx: LabContext,
    mechanism: Literal["heat", "average"] = "heat",
    p: Optional[float] = None,
) -> CheckReport:
    """
    heat: ‖f − P_t f‖_p ≤ C t^{α_p} Var*(f)，t ≤ 1；
    average: ‖f − f_s‖_{L^p(B(x₀,R))} ≤ C s^{α_p d_w} Var_{B(x₀,C₂R),p}(f)，0 < s < R。
    """
    p = ctx.config.p if p is None else p
    ctx.require_bv_case(p, "pseudo_poincare")
    mesh, spec = ctx.mesh, ctx.spec
    w = mesh.weights
    builder = ReportBuilder(f"pseudo_poincare[{mechanism}]", zero_tol=ZERO_TOL)

    if mechanism == "heat":
        data = ctx.spectral
        if not data.complete:
            logger.warning("谱不完整，P_t f 只在前 %d 个特征对上展开", data.count)
        times = default_time_grid(data)
        uniform = 0.0
        for f in ctx.suite:
            var_star = ctx.variation(f, "K", None, p, "subgaussian")
            for i, t in enumerate(times):
                lhs = _lp(f.values - semigroup_values(data, f.values, float(t)), w, p)
                builder.add(f.name, "K", lhs, t ** spec.alpha(p) * var_star, group=i, scale=float(t))
                if var_star > 0:
                    uniform = max(uniform, lhs / var_star)
        builder.measure("uniform_constant", uniform)
        return builder.finish(limit=ctx.config.stability_factor)

    A = ctx.enlargement
    L = spec.length_factor
    trend = []
    for k in ctx.ball_levels():
        R = ctx.ball_radius(k)
        for x0 in ctx.ball_centers:
            ids = mesh.ball_query(mesh.points[x0], R)
            for j in (1, 2):
                s = R / L ** j
                cover = covering(mesh, int(x0), R, s, A)
                name = f"ball{k}[{x0}]s{j}"
                if not ctx.ball_inside(x0, cover.c2 * R):
                    builder.skip(f"{name}: B(x₀, C₂R) 越出截断区域")
                    continue
                big = mesh.ball_query(mesh.points[x0], cover.c2 * R)
                for f in ctx.suite:
                    local = moving_average_at(f, s, ids, workers=ctx.workers)
                    lhs = _lp(f.values[ids] - local, w[ids], p)
                    var = ctx.variation(f, f"{name}*C2", big, p, "ks", min_level=ctx.first_level_below(s))
                    builder.add(f.name, name, lhs, s ** (spec.alpha(p) * spec.d_w) * var, group=k + j, scale=s)
                builder.measure(f"c2[{name}]", cover.c2)
                builder.measure(f"overlap[{name}]", cover.overlap)
    # s → 0 时 ‖f − f_s‖ 的走势，只报告
    probe = next(iter(ctx.nonconstant_suite), None)
    if probe is not None and ctx.ball_levels():
        R = ctx.ball_radius(ctx.ball_levels()[0])
        x0 = int(ctx.ball_centers[0])
        ids = mesh.ball_query(mesh.points[x0], R)
        for j in range(1, mesh.level - ctx.ball_levels()[0] + 2):
            s = R / L ** j
            trend.append(_lp(probe.values[ids] - moving_average_at(probe, s, ids), w[ids], p))
            builder.measure(f"s_limit[{j}]", trend[-1])
    return builder.finish(limit=ctx.config.stability_factor)
