"""
在小网格上运行已注册的检验：精确不等式必须成立，其余只检查报告结构
"""
import pytest

from src.core.errors import UnsupportedCaseError
from ..config import CheckConfig
from ..context import LabContext
from ..registry import run_all, run_check

SMALL = dict(n_random=2, workers=1, max_loci=2, n_centers=2, pair_samples=100)


@pytest.fixture(scope="module")
def vicsek_ctx(vicsek_mesh):
    return LabContext(CheckConfig(spec_name="vicsek", level=3, **SMALL), mesh=vicsek_mesh)


@pytest.fixture(scope="module")
def sg_ctx(sg_mesh, sg_spectral):
    return LabContext(CheckConfig(spec_name="sg", level=4, **SMALL), mesh=sg_mesh, spectral=sg_spectral)


class TestExactInequalities:
    def test_truncation_bound(self, vicsek_ctx):
        report = run_check("truncation_bound", vicsek_ctx)
        expected = len(vicsek_ctx.config.p_grid) * len(vicsek_ctx.suite) * 2
        assert len(report.assertions) == expected
        assert not report.hard_failures
        assert report.passed

    def test_coarea_on_vicsek(self, vicsek_ctx):
        report = run_check("coarea", vicsek_ctx)
        assert not report.hard_failures
        assert len(report.records) == len(vicsek_ctx.suite)
        assert not report.skipped

    def test_coarea_on_sg_skips_estimate(self, sg_ctx):
        report = run_check("coarea", sg_ctx)
        assert not report.hard_failures
        assert not report.records
        assert report.skipped

    def test_harmonic_energy(self, sg_ctx):
        report = run_check("harmonic_energy", sg_ctx)
        assert len(report.records) == 3 * 4
        assert report.passed

    def test_lusin_zero_pairs(self, vicsek_ctx):
        report = run_check("lusin_holder", vicsek_ctx)
        assert not report.hard_failures
        assert report.stability >= 1.0

    def test_adjacent_indicator_identity(self, vicsek_ctx):
        report = run_check("adjacent_simplices_l1", vicsek_ctx)
        assert report.records
        assert report.assertions
        assert all(a.holds for a in report.assertions)


class TestMeasuredChecks:
    def test_poincare_simplex(self, vicsek_ctx):
        report = run_check("poincare", vicsek_ctx, locus="simplex", kind="ks")
        assert report.check == "poincare[simplex,ks]"
        assert report.max_ratio is not None and report.max_ratio > 0
        # 常数函数落在退化计数里
        assert report.degenerate >= 1
        assert not report.hard_failures
        assert report.measured["alpha_p_d_w"] == pytest.approx(vicsek_ctx.spec.alpha(2.0) * vicsek_ctx.spec.d_w)

    def test_variation_comparison(self, vicsek_ctx):
        report = run_check("variation_comparison", vicsek_ctx)
        assert {r.locus for r in report.records} == {"K", "simplex1[0]"}
        assert "reverse_constant" in report.measured

    def test_walk_dimension(self, sg_ctx):
        report = run_check("walk_dimension", sg_ctx)
        spec = sg_ctx.spec
        assert report.fit is not None
        assert report.measured["target"] == pytest.approx(-spec.d_h / spec.d_w)
        assert len(report.records) == len(report.fit.log_scale)

    def test_heat_regularity(self, sg_ctx):
        report = run_check("heat_regularity", sg_ctx, probes=2, grid=3)
        assert not report.hard_failures
        assert any(r.locus == "weak_be" for r in report.records)

    def test_besov(self, sg_ctx):
        report = run_check("besov", sg_ctx)
        assert len(report.records) == len(sg_ctx.suite)
        assert report.measured["grid_refinement"] >= 1.0

    def test_pseudo_poincare_heat(self, sg_ctx):
        report = run_check("pseudo_poincare", sg_ctx, mechanism="heat")
        assert report.records
        assert report.measured["uniform_constant"] > 0


class TestUnsupportedCases:
    def test_morrey_needs_p_above_one(self, vicsek_ctx):
        with pytest.raises(UnsupportedCaseError):
            run_check("morrey", vicsek_ctx, p=1.0)

    def test_bv_results_only_on_vicsek(self, sg_ctx):
        with pytest.raises(UnsupportedCaseError):
            run_check("poincare", sg_ctx, p=1.0)
        with pytest.raises(UnsupportedCaseError):
            run_check("adjacent_simplices_l1", sg_ctx)

    def test_run_all_records_skip(self, sg_ctx):
        reports = run_all(sg_ctx, ["adjacent_simplices_l1", "harmonic_energy"])
        assert reports["adjacent_simplices_l1"].is_skipped
        assert not reports["adjacent_simplices_l1"].passed
        assert not reports["adjacent_simplices_l1"].records
        assert reports["harmonic_energy"].passed


@pytest.mark.parametrize(
    "name, options",
    [
        ("sobolev", {}),
        ("maximal", {}),
        ("hajlasz", {}),
        ("ahlfors", {}),
        ("morrey", {"locus": "double-star"}),
        ("morrey", {"locus": "ball"}),
        ("poincare", {"locus": "ball", "kind": "subgaussian"}),
        ("pseudo_poincare", {"mechanism": "average"}),
    ],
)
def test_remaining_checks_produce_records(vicsek_ctx, name, options):
    report = run_check(name, vicsek_ctx, **options)
    assert report.check.startswith(name)
    assert report.records or report.skipped
    assert not report.hard_failures
