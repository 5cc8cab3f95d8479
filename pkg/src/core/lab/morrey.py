"""
Morrey 型振幅估计：单形、星形、双星形与球。
"""
import logging
from typing import Literal, Optional

from src.core.errors import UnsupportedCaseError
from src.core.lab.context import LabContext
from src.core.lab.fitting import fit_or_none
from src.core.lab.registry import register_check
from src.core.lab.report import CheckReport, ReportBuilder

logger = logging.getLogger(__name__)


@register_check("morrey")
def check_morrey(
    ctx: LabContext,
    locus: Literal["simplex", "star", "double-star", "ball"] = "simplex",
    p: Optional[float] = None,
) -> CheckReport:
    """
    单形族：osc_locus f ≤ C L^{-m(d_w−d_h)(1−1/p)} Var*(f; locus)；
    球：osc_B f ≤ C R^{(d_w−d_h)(1−1/p)} Var_{B(x₀,AR),p}(f)。
    """
    p = ctx.config.p if p is None else p
    if not 1.0 < p <= 2.0:
        raise UnsupportedCaseError(f"morrey: 需要 p ∈ (1, 2]，得到 {p}")
    mesh, spec = ctx.mesh, ctx.spec
    exponent = (spec.d_w - spec.d_h) * (1.0 - 1.0 / p)
    builder = ReportBuilder(f"morrey[{locus}]", zero_tol=1e-12)
    harmonic = next((f for f in ctx.suite if f.name.startswith("harmonic")), None)
    scales, worst_osc = [], []

    if locus == "ball":
        A = ctx.enlargement
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
                    osc = f.oscillation(ids)
                    var = ctx.variation(f, f"{name}*A", big, p, "ks", min_level=ctx.first_level_below(R))
                    builder.add(f.name, name, osc, R ** exponent * var, group=k, scale=R)
                    if f is harmonic:
                        worst = max(worst, osc)
            scales.append(R)
            worst_osc.append(worst)
    else:
        for m in ctx.simplex_levels():
            scale = spec.length_factor ** (mesh.truncation - m)
            worst = 0.0
            for idx in ctx.sample_simplices(m):
                if locus == "simplex":
                    members = [int(idx)]
                else:
                    members = mesh.neighbors_of(m, idx)
                    if locus == "double-star":
                        members = mesh.neighbors_of(m, members)
                ids = mesh.simplex_vertex_ids(m, members)
                w = mesh.simplex_weights(m, members)
                name = f"{locus}{m}[{idx}]"
                for f in ctx.suite:
                    osc = f.oscillation(ids)
                    var = ctx.variation(f, name, ids, p, "subgaussian", weights=w, min_level=m + 1)
                    builder.add(f.name, name, osc, scale ** exponent * var, group=m, scale=scale)
                    if f is harmonic:
                        worst = max(worst, osc)
            scales.append(scale)
            worst_osc.append(worst)

    fit = None
    if harmonic is not None:
        fit = fit_or_none(scales, worst_osc, exponent, ctx.config.exponent_tol)
    builder.measure("holder_exponent", exponent)
    return builder.finish(limit=ctx.config.stability_factor, fit=fit)
