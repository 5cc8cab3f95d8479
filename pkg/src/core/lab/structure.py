"""
结构性检验：两种变差的比较、调和能量的层级不变性、Ahlfors 正则性。
"""
import logging
from typing import Optional

import numpy as np

from src.core.functions.variation import scale_radius
from src.core.geometry.measure import ahlfors_profile
from src.core.geometry.mesh import build_mesh
from src.core.lab.context import LabContext
from src.core.lab.registry import register_check
from src.core.lab.report import CheckReport, ReportBuilder
from src.core.spectral.dirichlet import EnergyForm, energy, harmonic_basis

logger = logging.getLogger(__name__)


@register_check("variation_comparison")
def check_variation_comparison(ctx: LabContext, p: Optional[float] = None) -> CheckReport:
    """Var*(f;F) / Var(f;F)，F 取整个 K 与一层、二层的首个单形；反向常数一并报告"""
    p = ctx.config.p if p is None else p
    ctx.require_bv_case(p, "variation_comparison")
    mesh = ctx.mesh
    loci = [("K", None, None, 1)]
    for m in (1, 2):
        if m <= mesh.level - 2:
            loci.append((f"simplex{m}[0]", mesh.simplex_vertex_ids(m, 0), mesh.simplex_weights(m, 0), m + 1))
    builder = ReportBuilder("variation_comparison", zero_tol=1e-12)
    reverse = 0.0
    for name, ids, weights, min_level in loci:
        for f in ctx.suite:
            star = ctx.variation(f, name, ids, p, "subgaussian", weights=weights, min_level=min_level)
            ks = ctx.variation(f, name, ids, p, "ks", weights=weights, min_level=min_level)
            builder.add(f.name, name, star, ks, group=f.name)
            if star > 0:
                reverse = max(reverse, ks / star)
    builder.measure("reverse_constant", reverse)
    return builder.finish(limit=ctx.config.comparison_factor)


@register_check("harmonic_energy")
def check_harmonic_energy(ctx: LabContext, seeds: int = 2) -> CheckReport:
    """调和延拓的能量 E_k 对 k = 1..n 不变，相对漂移 ≤ 1e-8（硬断言）"""
    spec = ctx.spec
    rng = np.random.default_rng(ctx.config.seed)
    boundaries = [np.eye(spec.n_boundary)[0]] + [rng.random(spec.n_boundary) for _ in range(seeds)]
    builder = ReportBuilder("harmonic_energy")
    energies = {i: [] for i in range(len(boundaries))}
    for k in range(1, ctx.config.level + 1):
        mesh = build_mesh(spec, k)
        form = EnergyForm(mesh)
        basis = harmonic_basis(mesh, form)
        for i, b in enumerate(boundaries):
            energies[i].append(energy(form, basis @ b))
    for i, values in energies.items():
        values = np.asarray(values)
        drift = float(np.abs(values - values[0]).max() / max(abs(values[0]), 1e-300))
        builder.assert_that(f"energy_invariance[b{i}]", drift, 1e-8, hard=True)
        for k, e in enumerate(values, start=1):
            builder.add(f"harmonic[b{i}]", f"level{k}", float(e), float(values[0]), group=k)
    return builder.finish()


@register_check("ahlfors")
def check_ahlfors(ctx: LabContext) -> CheckReport:
    """μ̂(B(x,r))/r^{d_h} 在各半径上的 C/c，跨半径变化不超过 ahlfors_factor"""
    mesh = ctx.mesh
    radii = [scale_radius(mesh, ctx.beta, k) for k in range(1, mesh.level)]
    rows = ahlfors_profile(mesh, radii, ctx.ball_centers)
    builder = ReportBuilder("ahlfors")
    for row in rows:
        builder.add("measure", f"r={row.radius:.6g}", row.max_ratio, row.min_ratio, group=f"{row.radius:.6g}", scale=row.radius)
    spreads = [row.spread for row in rows if np.isfinite(row.spread)]
    stability = max(spreads) / min(spreads) if spreads else None
    return builder.finish(limit=ctx.config.ahlfors_factor, stability=stability)
