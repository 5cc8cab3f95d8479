"""
分形规格、网格、点定位与空间索引的测试
"""
import itertools
import math

import numpy as np
import pytest

from src.core.errors import BudgetError, DomainError, SpecError, UsageError
from src.core.spectral.renormalize import renormalize_conductances
from ..ifs import Similitude
from ..locate import locate
from ..measure import ahlfors_profile, ball_mass
from ..mesh import build_mesh, export_mesh
from ..registry import IFSConfig, build_spec
from ..separation import cached_beta
from ..spatial_index import UniformGridIndex
from ..symmetry import orbit_sizes, symmetry_orbits

SG_TRANSLATIONS = [[0.0, 0.0], [0.5, 0.0], [0.25, math.sqrt(3.0) / 4.0]]


def test_registry_constants(sg_spec, vicsek_spec):
    assert (sg_spec.length_factor, sg_spec.mass_factor) == (2.0, 3)
    assert sg_spec.resistance_factor == pytest.approx(5.0 / 3.0, abs=1e-10)
    assert sg_spec.d_h == pytest.approx(math.log(3) / math.log(2))
    assert sg_spec.d_w == pytest.approx(math.log(5) / math.log(2))
    assert (vicsek_spec.length_factor, vicsek_spec.mass_factor) == (3.0, 5)
    assert vicsek_spec.resistance_factor == pytest.approx(3.0, abs=1e-10)
    assert vicsek_spec.d_w == pytest.approx(math.log(15) / math.log(3))
    assert vicsek_spec.n_boundary == 4


def test_unknown_registry_name():
    with pytest.raises(UsageError):
        build_spec("koch")


def test_similitude_contracts_distances(sg_spec):
    rng = np.random.default_rng(0)
    for _ in range(100):
        s = sg_spec.similitudes[rng.integers(sg_spec.mass_factor)]
        x, y = rng.random(2), rng.random(2)
        assert np.linalg.norm(s(x) - s(y)) == pytest.approx(np.linalg.norm(x - y) / 2.0, rel=1e-12)


def test_similitude_rejects_bad_shapes():
    with pytest.raises(ValueError):
        Similitude(0.5, np.eye(2), np.zeros(3))


def test_word_index_is_big_endian(vicsek_spec):
    assert vicsek_spec.word_index((1, 2)) == 7
    assert vicsek_spec.word(7, 2) == (1, 2)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_vertex_counts(sg_spec, vicsek_spec, n):
    assert build_mesh(sg_spec, n).n_vertices == 3 * (3 ** n + 1) // 2
    expected = 4
    for _ in range(n):
        expected = 5 * expected - 4
    assert build_mesh(vicsek_spec, n).n_vertices == expected


def test_level_one_weights(sg_spec, vicsek_spec):
    mesh = build_mesh(sg_spec, 1)
    assert mesh.n_vertices == 6
    assert sorted(np.round(mesh.weights * 9).astype(int).tolist()) == [1, 1, 1, 2, 2, 2]
    assert build_mesh(vicsek_spec, 1).n_vertices == 16


def test_weights_sum_to_total_mass(vicsek_spec):
    mesh = build_mesh(vicsek_spec, 2, truncation=1)
    assert mesh.weights.sum() == pytest.approx(5.0, abs=1e-12)
    assert mesh.diameter == pytest.approx(3.0 * math.sqrt(2.0))


def test_simplex_measure_is_exact(vicsek_mesh):
    for m in (1, 2):
        w = vicsek_mesh.simplex_weights(m, 3)
        assert w.sum() == pytest.approx(5.0 ** -m, abs=1e-12)


def test_corner_tables(vicsek_mesh, sg_mesh):
    assert np.array_equal(np.sort(vicsek_mesh.corner_ids(0)[0]), np.sort(vicsek_mesh.boundary_ids))
    corners = sg_mesh.corner_ids(1)
    assert corners.shape == (3, 3)
    # SG 的三个 1 层单形两两相邻
    assert sg_mesh.adjacency(1).sum() == 6
    assert sg_mesh.neighbors_of(1, 0).tolist() == [0, 1, 2]


def test_mesh_over_budget(sg_spec):
    with pytest.raises(BudgetError) as info:
        build_mesh(sg_spec, 9)
    assert info.value.stage == "build_mesh"


def test_truncation_level_checked(sg_spec):
    with pytest.raises(DomainError):
        build_mesh(sg_spec, 2, truncation=3)


def test_export_mesh_columns(sg_mesh):
    vertices, edges = export_mesh(sg_mesh)
    assert list(vertices.columns) == ["vertex_id", "x0", "x1", "weight"]
    assert list(edges.columns) == ["u", "v", "orbit"]
    assert len(edges) == 3 * sg_mesh.n_cells


class TestSymmetry:
    def test_sg_single_orbit(self, sg_spec):
        assert orbit_sizes(sg_spec.pair_orbit) == [3]
        assert len(sg_spec.symmetries) == 6

    def test_square_sides_and_diagonals(self, vicsek_spec):
        assert sorted(orbit_sizes(vicsek_spec.pair_orbit)) == [2, 4]

    def test_asymmetric_points_rejected(self):
        with pytest.raises(SpecError):
            symmetry_orbits(np.array([[0.0, 0.0], [1.0, 0.0], [0.2, 0.7]]))

    def test_isosceles_not_transitive(self):
        # 等腰三角形有一条对称轴，但顶点不能映到底边端点
        with pytest.raises(SpecError, match="不可迁"):
            symmetry_orbits(np.array([[0.0, 0.0], [2.0, 0.0], [1.0, 3.0]]))

    def test_cube_keeps_isometries_without_diagonal_bisector(self):
        cube = np.array(list(itertools.product((0.0, 1.0), repeat=3)))
        group, pairs, orbit = symmetry_orbits(cube)
        assert len(group) == 48
        assert len(pairs) == 28
        assert sorted(orbit_sizes(orbit)) == [4, 12, 12]


class TestVicsekCube:
    def test_constants(self):
        spec = build_spec("vicsek-3")
        assert (spec.length_factor, spec.mass_factor) == (3.0, 9)
        assert spec.n_boundary == 8
        assert spec.d_h == pytest.approx(2.0)
        assert spec.d_w == pytest.approx(3.0)

    def test_renormalization(self):
        result = renormalize_conductances(build_spec("vicsek-3"))
        assert result.rho == pytest.approx(3.0, abs=1e-10)
        assert np.allclose(result.conductance, 1.0)

    def test_dimension_below_two(self):
        with pytest.raises(UsageError):
            build_spec("vicsek-1")


class TestCustomIFS:
    def test_matches_registry(self, sg_spec):
        config = IFSConfig(contraction=0.5, unitary=[[1.0, 0.0], [0.0, 1.0]], translations=SG_TRANSLATIONS, rho=5.0 / 3.0)
        spec = build_spec(config)
        assert spec.family == "custom"
        assert spec.resistance_factor == pytest.approx(sg_spec.resistance_factor, rel=1e-10)

    def test_declared_rho_mismatch(self):
        config = IFSConfig(contraction=0.5, unitary=[[1.0, 0.0], [0.0, 1.0]], translations=SG_TRANSLATIONS, rho=2.0)
        with pytest.raises(SpecError):
            build_spec(config)

    def test_disconnected_cells_rejected(self):
        config = IFSConfig(contraction=0.25, unitary=[[1.0]], translations=[[0.0], [0.75]])
        with pytest.raises(SpecError):
            build_spec(config)


class TestLocate:
    def test_junction_returns_all_meeting(self, sg_spec):
        mesh = build_mesh(sg_spec, 3)
        loc = locate(mesh, [0.5, 0.0], 1)
        assert loc.meeting == (0, 1)
        assert loc.simplex == 0
        assert loc.is_junction

    def test_interior_point(self, sg_spec):
        mesh = build_mesh(sg_spec, 3)
        loc = locate(mesh, [0.25, 0.0], 1)
        assert loc.meeting == (0,)
        assert set(loc.star) == {0, 1, 2}

    def test_point_off_attractor(self, sg_spec):
        mesh = build_mesh(sg_spec, 3)
        with pytest.raises(DomainError):
            locate(mesh, [0.5, math.sqrt(3.0) / 6.0], 1)


class TestSpatialIndex:
    def test_query_matches_linear_scan(self, vicsek_mesh):
        rng = np.random.default_rng(1)
        index = vicsek_mesh.index
        for _ in range(20):
            x = rng.random(2)
            r = float(rng.uniform(0.01, 0.5))
            assert np.array_equal(index.query(x, r), index.linear_scan(x, r))

    def test_neighbors_are_sorted(self):
        points = np.random.default_rng(2).random((200, 2))
        index = UniformGridIndex(points, 0.1)
        q, ids, dist = index.neighbors(points[:5], 0.2)
        assert np.all(np.diff(q) >= 0)
        for row in range(5):
            assert np.array_equal(ids[q == row], index.linear_scan(points[row], 0.2))
        assert np.all(dist <= 0.2)

    def test_grid_cache_bounded_by_level(self, vicsek_mesh):
        mesh = vicsek_mesh
        for r in np.geomspace(mesh.resolution / 10, mesh.diameter * 10, 200):
            assert mesh.grid(r).cell_size >= min(r, mesh.diameter) * (1 - 1e-9)
        keys = [k for k in mesh._cache if isinstance(k, tuple) and k[0] == "grid"]
        assert len(keys) <= mesh.level + 1
        r = 0.37 * mesh.diameter
        q, ids, _ = mesh.neighbors(np.arange(5), r)
        for row in range(5):
            assert np.array_equal(ids[q == row], mesh.index.linear_scan(mesh.points[row], r))

    def test_ball_query_rejects_bad_radius(self, sg_mesh):
        with pytest.raises(DomainError):
            sg_mesh.ball_query([0.0, 0.0], 0.0)


def test_separation_constant(sg_spec, vicsek_spec):
    for spec in (sg_spec, vicsek_spec):
        estimate = cached_beta(spec)
        assert 0.0 < estimate.beta < 1.0
        assert estimate.enlargement == pytest.approx(3.0 * spec.length_factor / estimate.beta)


def test_ball_mass_and_ahlfors(vicsek_mesh):
    masses = ball_mass(vicsek_mesh, None, 10.0)
    assert np.allclose(masses, vicsek_mesh.total_mass)
    rows = ahlfors_profile(vicsek_mesh, [1.0 / 3.0, 1.0 / 9.0])
    for row in rows:
        assert 0 < row.min_ratio <= row.max_ratio
        assert row.spread >= 1.0
