"""
电导重整化、能量型与热核的测试
"""
import numpy as np
import pytest

from src import ENV
from src.core.errors import BudgetError, DomainError, WindowError
from src.core.geometry.mesh import build_mesh
from ..dirichlet import EnergyForm, energy, harmonic_basis, harmonic_extension, residual_norms, spectral_decompose
from ..heat import (
    check_window,
    default_time_grid,
    heat_kernel,
    heat_trace,
    resolvable_window,
    semigroup_values,
    weak_be_ratio,
)
from ..renormalize import renormalize_conductances


def _vertex_at(mesh, x):
    return int(np.argmin(np.linalg.norm(mesh.points - np.asarray(x), axis=1)))


class TestRenormalization:
    def test_sg_fixed_point(self, sg_spec):
        result = renormalize_conductances(sg_spec)
        assert result.rho == pytest.approx(5.0 / 3.0, abs=1e-10)
        assert np.allclose(result.conductance, 1.0)

    def test_vicsek_fixed_point(self, vicsek_spec):
        result = renormalize_conductances(vicsek_spec)
        assert result.rho == pytest.approx(3.0, abs=1e-10)
        assert result.conductance.max() == pytest.approx(1.0)


class TestHarmonic:
    def test_sg_midpoint_values(self, sg_spec):
        f = harmonic_extension(sg_spec, [1.0, 0.0, 0.0], 1)
        mesh = f.mesh
        assert f.values[_vertex_at(mesh, [0.5, 0.0])] == pytest.approx(0.4, abs=1e-12)
        assert f.values[_vertex_at(mesh, [0.25, np.sqrt(3.0) / 4.0])] == pytest.approx(0.4, abs=1e-12)
        assert f.values[_vertex_at(mesh, [0.75, np.sqrt(3.0) / 4.0])] == pytest.approx(0.2, abs=1e-12)

    def test_energy_invariant_across_levels(self, sg_spec, vicsek_spec):
        for spec, b in ((sg_spec, [1.0, 0.0, 0.0]), (vicsek_spec, [0.3, 1.0, -0.5, 2.0])):
            energies = []
            for n in range(1, 4):
                mesh = build_mesh(spec, n)
                energies.append(energy(EnergyForm(mesh), harmonic_extension(spec, b, n, mesh=mesh)))
            assert np.allclose(energies, energies[0], rtol=1e-8, atol=0.0)
        assert energies[0] > 0

    def test_sg_level_zero_energy(self, sg_spec):
        mesh = build_mesh(sg_spec, 2)
        f = harmonic_extension(sg_spec, [1.0, 0.0, 0.0], 2, mesh=mesh)
        assert energy(EnergyForm(mesh), f) == pytest.approx(2.0, rel=1e-10)

    def test_constants_are_harmonic(self, vicsek_mesh):
        basis = harmonic_basis(vicsek_mesh)
        assert np.allclose(basis.sum(axis=1), 1.0, atol=1e-10)

    def test_bad_boundary_values(self, sg_spec):
        with pytest.raises(DomainError):
            harmonic_extension(sg_spec, [1.0, 0.0], 1)

    def test_energy_matches_generator(self, sg_mesh):
        form = EnergyForm(sg_mesh)
        f = np.random.default_rng(3).random(sg_mesh.n_vertices)
        rhs = float(form.generator_apply(f) @ (f * sg_mesh.weights))
        assert form.energy(f) == pytest.approx(rhs, rel=1e-10)


class TestSpectrum:
    def test_full_spectrum(self, sg_spectral, sg_mesh):
        lam = sg_spectral.eigenvalues
        assert sg_spectral.complete
        assert sg_spectral.count == sg_mesh.n_vertices
        assert lam[0] == 0.0
        assert np.all(np.diff(lam) >= -1e-9)
        phi = sg_spectral.eigenvectors
        gram = phi.T @ (phi * sg_mesh.weights[:, None])
        assert np.allclose(gram, np.eye(sg_spectral.count), atol=1e-8)
        assert sg_spectral.residual <= ENV.eig_residual_tol

    def test_reported_residual_is_absolute(self, sg_spectral, sg_mesh):
        norms = residual_norms(EnergyForm(sg_mesh), sg_spectral.eigenvalues, sg_spectral.eigenvectors)
        assert sg_spectral.residual == pytest.approx(float(norms.max()), rel=1e-6, abs=1e-15)
        # 首个特征对是精确化后的常数函数
        assert norms[0] <= 1e-10

    def test_partial_spectrum_agrees(self, sg_spectral, sg_mesh):
        partial = spectral_decompose(EnergyForm(sg_mesh), 10)
        assert partial.count == 10
        assert not partial.complete
        assert np.allclose(partial.eigenvalues, sg_spectral.eigenvalues[:10], rtol=1e-8, atol=1e-8)

    def test_dense_budget(self, sg_mesh, monkeypatch):
        monkeypatch.setattr(ENV, "dense_limit", 10)
        with pytest.raises(BudgetError) as info:
            spectral_decompose(EnergyForm(sg_mesh))
        assert info.value.stage == "spectral_decompose"


class TestHeatKernel:
    def test_structure(self, sg_spectral, sg_mesh):
        w = sg_mesh.weights
        t, s = 0.01, 0.02
        kt = heat_kernel(sg_spectral, t).values
        ks = heat_kernel(sg_spectral, s).values
        kts = heat_kernel(sg_spectral, t + s).values
        assert np.allclose(kt, kt.T, atol=1e-8)
        assert np.allclose(kt @ w, 1.0, atol=1e-8)
        assert np.allclose((kt * w[None, :]) @ ks, kts, atol=1e-8)
        assert kt.min() >= -1e-10

    def test_semigroup_keeps_constants(self, sg_spectral, sg_mesh):
        u = semigroup_values(sg_spectral, np.full(sg_mesh.n_vertices, 2.5), 0.05)
        assert np.allclose(u, 2.5, atol=1e-10)

    def test_trace_decreases(self, sg_spectral):
        assert heat_trace(sg_spectral, 0.01) > heat_trace(sg_spectral, 0.02) > 1.0

    def test_time_must_be_positive(self, sg_spectral):
        with pytest.raises(DomainError):
            heat_kernel(sg_spectral, 0.0)

    def test_window(self, sg_spectral):
        lo, hi = resolvable_window(sg_spectral)
        grid = default_time_grid(sg_spectral, 8)
        assert grid.size == 8
        assert lo <= grid[0] < grid[-1] <= hi
        check_window(sg_spectral, grid)
        with pytest.raises(WindowError):
            check_window(sg_spectral, [1.0])

    def test_kernel_budget(self, sg_spectral, monkeypatch):
        monkeypatch.setattr(ENV, "dense_limit", 10)
        with pytest.raises(BudgetError):
            heat_kernel(sg_spectral, 0.01)

    def test_weak_be_ratio_finite(self, sg_spectral, sg_mesh):
        g = harmonic_basis(sg_mesh)[:, 0]
        num, ratio = weak_be_ratio(sg_spectral, g, 0.02, workers=1)
        assert 0.0 < num <= 1.0
        assert np.isfinite(ratio) and ratio > 0
