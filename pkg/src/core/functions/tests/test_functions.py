"""
离散函数、检验函数族、双重求和、变差与 BV 工具的测试
"""
import numpy as np
import pytest

from src.core.errors import DomainError, ResolutionError, UsageError
from src.core.geometry.mesh import build_mesh
from ..bv import level_sets, moving_average, moving_average_at, truncations
from ..discrete import DiscreteFunction, deviation_norm
from ..maximal import maximal_function
from ..pairs import (
    ks_double_sum,
    ks_double_sum_many,
    l1_pair_integral,
    lp_pair_integral,
    subgaussian_double_sum,
)
from ..testfuncs import KINDS, make_test_function, random_cellwise
from ..variation import resolvable_levels, scale_radius, variation, variation_many


def test_function_size_checked(sg_mesh):
    with pytest.raises(DomainError):
        DiscreteFunction(sg_mesh, np.zeros(3))
    with pytest.raises(DomainError):
        DiscreteFunction(sg_mesh, np.full(sg_mesh.n_vertices, np.nan))


def test_values_are_read_only(sg_mesh):
    f = DiscreteFunction(sg_mesh, np.zeros(sg_mesh.n_vertices))
    with pytest.raises(ValueError):
        f.values[0] = 1.0


def test_norms(sg_mesh):
    f = make_test_function("constant", sg_mesh) * 2.0
    assert f.lp_norm(2) == pytest.approx(2.0)
    assert f.sup_norm() == 2.0
    assert f.is_constant()
    assert deviation_norm(f.values, sg_mesh.weights, 1.5) == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(DomainError):
        deviation_norm(f.values, np.zeros(sg_mesh.n_vertices), 2.0)


class TestTestFunctions:
    def test_kinds(self, vicsek_mesh, vicsek_spectral):
        assert KINDS[0] == "constant"
        h = make_test_function("harmonic", vicsek_mesh)
        assert h.values[vicsek_mesh.boundary_ids[0]] == pytest.approx(1.0)
        assert 0.0 <= h.values.min() and h.values.max() <= 1.0 + 1e-12
        e = make_test_function("eigenfunction", vicsek_mesh, spectral=vicsek_spectral, j=1)
        assert e.lp_norm(2) == pytest.approx(1.0, rel=1e-8)
        x = make_test_function("coordinate", vicsek_mesh, axis=1)
        assert np.array_equal(x.values, vicsek_mesh.points[:, 1])

    def test_indicator_support(self, vicsek_mesh):
        f = make_test_function("indicator", vicsek_mesh, simplex=(1, 2))
        support = np.flatnonzero(f.values)
        assert np.array_equal(support, vicsek_mesh.simplex_vertex_ids(1, 2))

    def test_random_cellwise_is_seeded(self, vicsek_mesh):
        a = random_cellwise(vicsek_mesh, seed=4)
        b = random_cellwise(vicsek_mesh, seed=4)
        c = random_cellwise(vicsek_mesh, seed=5)
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)
        assert 0.0 <= a.values.min() and a.values.max() <= 1.0

    def test_errors(self, vicsek_mesh):
        with pytest.raises(UsageError):
            make_test_function("wavelet", vicsek_mesh)
        with pytest.raises(UsageError):
            make_test_function("indicator", vicsek_mesh)
        with pytest.raises(UsageError):
            make_test_function("eigenfunction", vicsek_mesh)


class TestDoubleSums:
    def test_constant_vanishes(self, vicsek_mesh):
        f = np.full(vicsek_mesh.n_vertices, 7.0)
        assert ks_double_sum(vicsek_mesh, f, None, 0.2, 2.0) == 0.0
        assert subgaussian_double_sum(vicsek_mesh, f, None, 0.01, 1.5) == 0.0

    def test_homogeneity(self, vicsek_mesh):
        f = random_cellwise(vicsek_mesh, seed=1).values
        one = ks_double_sum(vicsek_mesh, f, None, 0.2, 1.5)
        two = ks_double_sum(vicsek_mesh, 3.0 * f, None, 0.2, 1.5)
        assert two == pytest.approx(3.0 ** 1.5 * one, rel=1e-12)

    def test_stack_matches_single(self, vicsek_mesh):
        f = random_cellwise(vicsek_mesh, seed=1).values
        g = make_test_function("harmonic", vicsek_mesh).values
        stack = ks_double_sum_many(vicsek_mesh, np.stack([f, g], axis=1), None, 0.15, 2.0, divide=False)
        assert stack[0] == pytest.approx(ks_double_sum(vicsek_mesh, f, None, 0.15, 2.0, divide=False), rel=1e-12)
        assert stack[1] == pytest.approx(ks_double_sum(vicsek_mesh, g, None, 0.15, 2.0, divide=False), rel=1e-12)

    def test_restricted_set(self, vicsek_mesh):
        f = random_cellwise(vicsek_mesh, seed=2).values
        ids = vicsek_mesh.simplex_vertex_ids(1, 0)
        inside = ks_double_sum(vicsek_mesh, f, ids, 0.1, 2.0)
        whole = ks_double_sum(vicsek_mesh, f, None, 0.1, 2.0)
        assert 0.0 < inside < whole
        with pytest.raises(DomainError):
            ks_double_sum(vicsek_mesh, f, np.array([], dtype=int), 0.1, 2.0)

    def test_l1_pair_integral_by_sorting(self):
        rng = np.random.default_rng(5)
        values, weights = rng.random(50), rng.random(50)
        direct = float(weights @ np.abs(values[:, None] - values[None, :]) @ weights)
        assert l1_pair_integral(values, weights) == pytest.approx(direct, rel=1e-12)
        assert lp_pair_integral(values, weights, 2.0) > 0


class TestVariation:
    def test_constant_has_zero_variation(self, vicsek_mesh):
        f = make_test_function("constant", vicsek_mesh)
        for kind in ("ks", "subgaussian"):
            assert variation(f, None, 2.0, kind).estimate == 0.0

    def test_shift_and_scale(self, vicsek_mesh):
        f = random_cellwise(vicsek_mesh, seed=3)
        base = variation(f, None, 1.5, "ks").estimate
        assert variation(f.shift(4.0), None, 1.5, "ks").estimate == pytest.approx(base, rel=1e-10)
        assert variation(f * 2.0, None, 1.5, "ks").estimate == pytest.approx(2.0 * base, rel=1e-10)
        assert variation(f * 2.0, None, 1.0, "ks").estimate == pytest.approx(
            2.0 * variation(f, None, 1.0, "ks").estimate, rel=1e-10)

    def test_profile_rows(self, vicsek_mesh):
        f = make_test_function("harmonic", vicsek_mesh)
        profile = variation(f, None, 2.0, "subgaussian")
        assert [e.level for e in profile.entries] == resolvable_levels(vicsek_mesh)
        assert profile.estimate == min(e.normalized for e in profile.entries)
        assert profile.finest == profile.entries[-1].normalized
        assert {row["kind"] for row in profile.rows()} == {"subgaussian"}

    @pytest.mark.parametrize("p", [1.0, 1.5, 2.0])
    def test_subgaussian_time_weight(self, vicsek_mesh, p):
        spec = vicsek_mesh.spec
        f = make_test_function("harmonic", vicsek_mesh)
        profile = variation(f, None, p, "subgaussian")
        for entry in profile.entries:
            raw = subgaussian_double_sum(vicsek_mesh, f.values, None, entry.scale, p)
            assert entry.raw == pytest.approx(raw, rel=1e-12)
            expected = entry.scale ** (-(spec.alpha(p) + spec.d_h / spec.d_w)) * raw ** (1.0 / p)
            assert entry.normalized == pytest.approx(expected, rel=1e-12)
        if p == 1.0:
            entry = profile.entries[0]
            assert entry.normalized == pytest.approx(entry.scale ** (-2.0 * spec.d_h / spec.d_w) * entry.raw, rel=1e-12)

    def test_stacked_profiles(self, vicsek_mesh):
        f = random_cellwise(vicsek_mesh, seed=6).values
        g = make_test_function("harmonic", vicsek_mesh).values
        many = variation_many(vicsek_mesh, np.stack([f, g], axis=1), None, 2.0)
        single = variation(make_test_function("harmonic", vicsek_mesh), None, 2.0)
        assert many[1].estimate == pytest.approx(single.estimate, rel=1e-12)

    def test_errors(self, vicsek_mesh, sg_spec):
        f = make_test_function("harmonic", vicsek_mesh)
        with pytest.raises(UsageError):
            variation(f, None, 3.0)
        with pytest.raises(UsageError):
            variation(f, None, 2.0, "wavelet")
        coarse = build_mesh(sg_spec, 1)
        with pytest.raises(ResolutionError):
            variation(make_test_function("harmonic", coarse), None, 2.0)

    def test_scale_radius(self, vicsek_mesh):
        assert scale_radius(vicsek_mesh, 0.5, 2) == pytest.approx(0.5 / 9.0)


class TestBV:
    def test_truncations_of_constant(self, vicsek_mesh):
        f = make_test_function("constant", vicsek_mesh) * 3.0
        pieces = truncations(f)
        assert max(pieces) == 1
        total = sum(piece.values for piece in pieces.values())
        assert np.allclose(total, 3.0, atol=1e-12)
        for piece in pieces.values():
            assert piece.is_constant()

    def test_truncations_reject_negative(self, vicsek_mesh):
        with pytest.raises(DomainError):
            truncations(make_test_function("constant", vicsek_mesh) * -1.0)

    def test_layer_cake(self, vicsek_mesh):
        f = random_cellwise(vicsek_mesh, seed=7)
        family = level_sets(f)
        rng = np.random.default_rng(0)
        for x, y in rng.integers(0, vicsek_mesh.n_vertices, size=(30, 2)):
            assert family.layer_cake(x, y) == pytest.approx(abs(f.values[x] - f.values[y]), abs=1e-12)

    def test_straddle_masses_match_indicators(self, sg_mesh):
        f = random_cellwise(sg_mesh, seed=8, level=1)
        family = level_sets(f)
        r = 0.3
        masses = family.straddle_masses(None, r)
        stack = np.stack([ind.values for ind in family.indicators()], axis=1)
        direct = ks_double_sum_many(sg_mesh, stack, None, r, 1.0, divide=False)
        assert np.allclose(masses, direct, rtol=1e-10, atol=1e-14)

    def test_moving_average(self, vicsek_mesh):
        const = make_test_function("constant", vicsek_mesh)
        assert np.allclose(moving_average(const, 0.1).values, 1.0)
        f = random_cellwise(vicsek_mesh, seed=9)
        assert np.allclose(moving_average_at(f, 10.0, np.arange(5)), f.mean())
        with pytest.raises(DomainError):
            moving_average_at(f, 0.0)


class TestMaximal:
    def test_constant_gives_zero(self, vicsek_mesh):
        field = maximal_function(make_test_function("constant", vicsek_mesh), 2.0, workers=1)
        assert np.all(field.values == 0.0)
        assert field.weak_lp() == 0.0

    def test_weak_bound_by_strong(self, vicsek_mesh):
        field = maximal_function(random_cellwise(vicsek_mesh, seed=1), 1.5, workers=1)
        assert field.levels == (1,)
        assert np.all(field.values > 0)
        assert field.weak_lp() <= field.lp_norm() ** 1.5 * (1 + 1e-12)

    def test_needs_levels(self, sg_spec):
        mesh = build_mesh(sg_spec, 2)
        with pytest.raises(ResolutionError):
            maximal_function(make_test_function("harmonic", mesh), 2.0)
