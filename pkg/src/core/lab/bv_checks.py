"""
BV 检验：余面积公式、相邻单形链上的 L¹ 估计、二进截断界。
"""
import logging
from typing import List, Optional

import numpy as np

from src.core.errors import UnsupportedCaseError
from src.core.functions.bv import level_sets, truncations
from src.core.functions.discrete import DiscreteFunction
from src.core.functions.pairs import ks_double_sum, ks_double_sum_many, l1_pair_integral
from src.core.functions.variation import resolvable_levels, scale_radius, variation_many
from src.core.lab.context import LabContext
from src.core.lab.registry import register_check
from src.core.lab.report import CheckReport, ReportBuilder

logger = logging.getLogger(__name__)


def _nonnegative(f: DiscreteFunction) -> DiscreteFunction:
    low = float(f.values.min())
    return f if low >= 0 else f.shift(-low)


def _pair_level(ctx: LabContext, level: Optional[int]) -> int:
    return max(1, ctx.mesh.level - 2) if level is None else level


@register_check("coarea")
def check_coarea(ctx: LabContext, level: Optional[int] = None, thresholds: int = 32) -> CheckReport:
    """
    (a) Σ_i gap_i W_{K,r,1}(1_{E_i}) = W_{K,r,1}(f)，值网格上的层饼分解是精确的（硬断言）；
    (b) ∫ Var(1_{E_t}) dt ≤ C Var(f)，C 为测量值（只在 Vicsek 族上）。
    """
    mesh = ctx.mesh
    k = _pair_level(ctx, level)
    r = scale_radius(mesh, ctx.beta, k)
    builder = ReportBuilder("coarea", zero_tol=1e-12)
    for f in ctx.suite:
        g = _nonnegative(f)
        family = level_sets(g)
        lhs = float(family.gaps @ family.straddle_masses(None, r, workers=ctx.workers))
        rhs = ks_double_sum(mesh, g.values, None, r, 1.0, divide=False, workers=ctx.workers)
        builder.assert_that(f"layer_cake[{f.name}]", abs(lhs - rhs), 0.0,
                            slack=ctx.config.identity_tol * max(1.0, rhs), hard=True)

        if not ctx.is_vicsek:
            continue
        distinct = np.unique(g.values)
        if distinct.size <= thresholds + 1:
            coarse = family
        else:
            cuts = np.linspace(distinct[0], distinct[-1], thresholds + 2)[1:-1]
            coarse = level_sets(g, cuts)
        if len(coarse) == 0:
            builder.add(f.name, "K", 0.0, 0.0, group="estimate")
            continue
        stack = np.column_stack([(g.values > c).astype(float) for c in coarse.thresholds])
        profiles = variation_many(mesh, stack, None, 1.0, "ks", beta=ctx.beta,
                                  levels=resolvable_levels(mesh), workers=ctx.workers)
        integral = float(coarse.gaps @ np.array([prof.estimate for prof in profiles]))
        builder.add(f.name, "K", integral, ctx.variation(g, "K", None, 1.0, "ks"), group="estimate")
    if not ctx.is_vicsek:
        builder.skip("估计层面的余面积不等式只在 Vicsek 族上检验")
    return builder.finish()


def adjacent_chains(ctx: LabContext, m: int, length: int) -> List[List[int]]:
    """从抽样单形出发，每步走到下标最小的未访问相邻单形"""
    adjacency = ctx.mesh.adjacency(m)
    chains = []
    for start in ctx.sample_simplices(m):
        chain = [int(start)]
        while len(chain) < length:
            options = [int(j) for j in np.sort(adjacency[chain[-1]].indices) if int(j) not in chain]
            if not options:
                break
            chain.append(options[0])
        if len(chain) == length:
            chains.append(chain)
    return chains


@register_check("adjacent_simplices_l1")
def check_adjacent_simplices_l1(ctx: LabContext, chain_length: Optional[int] = None) -> CheckReport:
    """
    ∬_{U×U} |f(x)−f(y)| dμ dμ ≤ C L^{-2m d_h} Var(f; U)，U 为 ℓ 个相邻 m 层单形之并。
    """
    if not ctx.is_vicsek:
        raise UnsupportedCaseError(f"adjacent_simplices_l1: 只对 Vicsek 族成立，{ctx.spec.name} 不适用")
    mesh, spec = ctx.mesh, ctx.spec
    length = chain_length or ctx.config.chain_length
    builder = ReportBuilder("adjacent_simplices_l1", zero_tol=1e-12)
    for m in [m for m in (1, 2) if m <= mesh.level - 2]:
        scale = spec.length_factor ** (2.0 * (mesh.truncation - m) * spec.d_h)
        for chain in adjacent_chains(ctx, m, length):
            ids = mesh.simplex_vertex_ids(m, chain)
            w = mesh.simplex_weights(m, chain)
            name = f"chain{m}{chain}"
            inner = mesh.simplex_vertex_ids(m, chain[0])
            indicator = DiscreteFunction(mesh, np.isin(np.arange(mesh.n_vertices), inner).astype(float), f"1_G{m}[{chain[0]}]")
            for f in [*ctx.suite, indicator]:
                lhs = l1_pair_integral(f.values[ids], w[ids])
                var = ctx.variation(f, name, ids, 1.0, "ks", weights=w, min_level=m + 1)
                builder.add(f.name, name, lhs, scale * var, group=m, scale=scale)
            mass_g = float(w[inner].sum())
            mass_u = float(w[ids].sum())
            lhs = l1_pair_integral(indicator.values[ids], w[ids])
            builder.assert_that(f"indicator_identity[{name}]", abs(lhs - 2.0 * mass_g * (mass_u - mass_g)), 0.0,
                                slack=1e-12 * max(1.0, lhs))
    return builder.finish(limit=ctx.config.stability_factor)


@register_check("truncation_bound")
def check_truncation_bound(ctx: LabContext, level: Optional[int] = None) -> CheckReport:
    """Σ_k W_{F,r,p}(f_k) ≤ 2(p+1) W_{F,r,p}(f)，有限网格上的精确不等式（硬断言）"""
    mesh = ctx.mesh
    r = scale_radius(mesh, ctx.beta, _pair_level(ctx, level))
    loci = {"K": None, "simplex1[0]": mesh.simplex_vertex_ids(1, 0)}
    builder = ReportBuilder("truncation_bound", zero_tol=1e-12)
    for p in ctx.config.p_grid:
        for f in ctx.suite:
            g = _nonnegative(f)
            pieces = list(truncations(g).values())
            stack = np.column_stack([g.values] + [piece.values for piece in pieces])
            for name, F in loci.items():
                sums = ks_double_sum_many(mesh, stack, F, r, p, divide=False, workers=ctx.workers)
                lhs = float(sums[1:].sum())
                rhs = 2.0 * (p + 1.0) * float(sums[0])
                builder.assert_that(f"truncation[{f.name}@{name},p={p:g}]", lhs, rhs,
                                    slack=ctx.config.truncation_slack, hard=True)
                builder.add(f.name, name, lhs, rhs, group=f"p={p:g}", scale=r)
    return builder.finish()
