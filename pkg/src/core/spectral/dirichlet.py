"""
能量型 E_n、生成元与谱分解。

E_n(f) = Σ_边 c_orbit ρ^{n-t} (f(u) − f(v))²，生成元 L = W^{-1} Lap 满足
E(f, g) = ⟨Lf, g⟩_w；谱分解在对称化矩阵 S = W^{-1/2} Lap W^{-1/2} 上进行。
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from src import ENV
from src.core.errors import BudgetError, DomainError, EigenError, SingularSystemError
from src.core.functions.discrete import DiscreteFunction, as_values
from src.core.geometry.ifs import FractalSpec
from src.core.geometry.mesh import LevelMesh, build_mesh

logger = logging.getLogger(__name__)


class EnergyForm:
    def __init__(self, mesh: LevelMesh):
        self.mesh = mesh
        self.conductance = mesh.edge_conductance
        u, v = mesh.edges[:, 0], mesh.edges[:, 1]
        n = mesh.n_vertices
        c = self.conductance
        off = sp.coo_matrix((np.concatenate([-c, -c]), (np.concatenate([u, v]), np.concatenate([v, u]))), shape=(n, n))
        degree = np.bincount(u, weights=c, minlength=n) + np.bincount(v, weights=c, minlength=n)
        self.laplacian = (off + sp.diags(degree)).tocsr()

    @property
    def level(self) -> int:
        return self.mesh.level

    def energy(self, f) -> float:
        values = as_values(f, self.mesh)
        diff = values[self.mesh.edges[:, 0]] - values[self.mesh.edges[:, 1]]
        return float(self.conductance @ (diff * diff))

    def generator_apply(self, f) -> np.ndarray:
        return (self.laplacian @ as_values(f, self.mesh)) / self.mesh.weights


def energy(form: EnergyForm, f: Union[DiscreteFunction, np.ndarray]) -> float:
    """
    Raises:
        DomainError: f 不在 form 的网格上
    """
    return form.energy(f)


def _interior_factor(form: EnergyForm):
    mesh = form.mesh
    boundary = mesh.boundary_ids
    interior = np.setdiff1d(np.arange(mesh.n_vertices), boundary)
    lap = form.laplacian
    lii = lap[interior][:, interior].tocsc()
    lib = lap[interior][:, boundary]
    try:
        solver = spla.splu(lii)
    except RuntimeError as e:
        raise SingularSystemError(f"调和延拓的内部方程组奇异（网格可能不连通）: {e}") from e
    return interior, boundary, lib, solver


def harmonic_basis(mesh: LevelMesh, form: Optional[EnergyForm] = None) -> np.ndarray:
    """(V, #V⁰) 矩阵，第 b 列是边界单位向量 e_b 的调和延拓"""
    form = form or EnergyForm(mesh)
    basis = np.zeros((mesh.n_vertices, mesh.spec.n_boundary))
    basis[mesh.boundary_ids, np.arange(mesh.spec.n_boundary)] = 1.0
    if mesh.n_vertices == mesh.spec.n_boundary:
        return basis
    interior, boundary, lib, solver = _interior_factor(form)
    rhs = -(lib @ np.eye(len(boundary)))
    basis[interior] = solver.solve(np.asarray(rhs))
    if not np.all(np.isfinite(basis)):
        raise SingularSystemError("调和延拓得到非有限值，内部方程组奇异")
    return basis


def harmonic_extension(
    spec: FractalSpec,
    boundary_values: Sequence[float],
    n: int,
    mesh: Optional[LevelMesh] = None,
    form: Optional[EnergyForm] = None,
) -> DiscreteFunction:
    """E_n 在给定 V⁰ 取值下的唯一极小元"""
    boundary_values = np.asarray(boundary_values, dtype=float).ravel()
    if boundary_values.size != spec.n_boundary or not np.all(np.isfinite(boundary_values)):
        raise DomainError(f"边界值必须是 {spec.n_boundary} 个有限实数: {boundary_values.tolist()}")
    mesh = mesh or build_mesh(spec, n)
    values = harmonic_basis(mesh, form) @ boundary_values
    return DiscreteFunction(mesh, values, f"harmonic{tuple(np.round(boundary_values, 6).tolist())}")


@dataclass(frozen=True, eq=False)
class SpectralData:
    """
    Attributes:
        eigenvalues: 升序，λ_0 = 0
        eigenvectors: (V, k)，列在 w-内积下正交归一（φ_j 而非对称化向量）
        complete: 是否为全谱
        residual: max_j ‖Lφ_j − λ_j φ_j‖_w / max(1, λ_j)
    """

    mesh: LevelMesh
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    complete: bool
    residual: float

    def __post_init__(self):
        self.eigenvalues.setflags(write=False)
        self.eigenvectors.setflags(write=False)

    @property
    def count(self) -> int:
        return self.eigenvalues.size

    @property
    def lambda_1(self) -> float:
        return float(self.eigenvalues[1])

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])

    def eigenfunction(self, j: int) -> DiscreteFunction:
        if not 0 <= j < self.count:
            raise DomainError(f"特征函数下标 {j} 超出 0..{self.count - 1}")
        return DiscreteFunction(self.mesh, self.eigenvectors[:, j], f"eigen{j}")

    def coefficients(self, f) -> np.ndarray:
        return self.eigenvectors.T @ (as_values(f, self.mesh) * self.mesh.weights)


def residual_norms(form: EnergyForm, lam: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """逐对的绝对残差 ‖Lφ_j − λ_j φ_j‖_w"""
    w = form.mesh.weights
    r = (form.laplacian @ phi) / w[:, None] - phi * lam[None, :]
    return np.sqrt((r * r * w[:, None]).sum(axis=0))


def spectral_decompose(form: EnergyForm, count: Optional[int] = None) -> SpectralData:
    """
    Args:
        count: None 求全谱（要求 V ≤ dense_limit），否则求最小的 count 个特征对

    Raises:
        BudgetError: 全谱超出稠密预算
        EigenError: 残差超限或 Lanczos 不收敛
    """
    mesh = form.mesh
    n = mesh.n_vertices
    w = mesh.weights
    scale = 1.0 / np.sqrt(w)
    if count is None and n > ENV.dense_limit:
        raise BudgetError("spectral_decompose", ENV.dense_limit, n)
    k = n if count is None else min(int(count), n)
    if k < 2:
        raise DomainError(f"至少需要 2 个特征对: {k}")
    sym = sp.diags(scale) @ form.laplacian @ sp.diags(scale)
    if n <= ENV.dense_limit:
        lam, psi = scipy.linalg.eigh(sym.toarray(), subset_by_index=[0, k - 1])
        method = "dense"
    else:
        v0 = np.random.default_rng(0).standard_normal(n)
        try:
            lam, psi = spla.eigsh(sym.tocsc(), k=k, sigma=-1.0, which="LM", v0=v0)
        except spla.ArpackNoConvergence as e:
            raise EigenError("Lanczos 迭代未收敛", float("nan")) from e
        order = np.argsort(lam)
        lam, psi = lam[order], psi[:, order]
        method = "lanczos"
    phi = psi * scale[:, None]
    # 常数特征函数精确化
    if abs(lam[0]) > ENV.eig_residual_tol * max(1.0, abs(lam[-1])):
        raise EigenError(f"最小特征值 {lam[0]:.3e} 不为零，网格可能不连通", abs(float(lam[0])))
    lam = lam.copy()
    lam[0] = 0.0
    phi[:, 0] = 1.0 / np.sqrt(w.sum())
    norms = residual_norms(form, lam, phi)
    residual = float(norms.max())
    # 接受准则：每对 ‖Lφ_j − λ_j φ_j‖_w ≤ tol · max(1, |λ_j|)；报告的是绝对残差
    relative = float((norms / np.maximum(1.0, np.abs(lam))).max())
    if relative > ENV.eig_residual_tol:
        raise EigenError(f"{method} 特征分解残差超限（相对残差 {relative:.3e}）", residual)
    logger.info("%s 谱分解: %d/%d 个特征对，λ_1=%.6g，λ_max=%.6g，绝对残差 %.2e，相对残差 %.2e",
                method, k, n, lam[1], lam[-1], residual, relative)
    return SpectralData(mesh=mesh, eigenvalues=lam, eigenvectors=np.ascontiguousarray(phi), complete=(k == n), residual=residual)
