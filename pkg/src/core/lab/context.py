"""
检验共享的惰性上下文：分形、网格、能量型、谱数据、检验函数族与变差备忘。
"""
import functools
import logging
import threading
from typing import Callable, Dict, List, Optional

import numpy as np

from src.core.errors import UnsupportedCaseError
from src.core.functions.discrete import DiscreteFunction
from src.core.functions.maximal import MaximalField, maximal_function
from src.core.functions.testfuncs import make_test_function
from src.core.functions.variation import VariationProfile, resolvable_levels, variation
from src.core.geometry.ifs import FractalSpec
from src.core.geometry.mesh import LevelMesh, build_mesh
from src.core.geometry.registry import build_spec
from src.core.geometry.separation import cached_beta
from src.core.lab.config import CheckConfig
from src.core.spectral.dirichlet import EnergyForm, SpectralData, spectral_decompose

logger = logging.getLogger(__name__)


class LabContext:
    def __init__(
        self,
        config: CheckConfig,
        spec: Optional[FractalSpec] = None,
        mesh: Optional[LevelMesh] = None,
        spectral: Optional[SpectralData] = None,
        spectral_loader: Optional[Callable[[], SpectralData]] = None,
    ):
        self.config = config
        self._spec = spec
        self._mesh = mesh
        self._spectral = spectral
        self._spectral_loader = spectral_loader
        self._memo: Dict[tuple, VariationProfile] = {}
        self._fields: Dict[tuple, MaximalField] = {}
        self._lock = threading.Lock()

    # ---- 惰性构造 ----
    @functools.cached_property
    def spec(self) -> FractalSpec:
        if self._spec is not None:
            return self._spec
        if self._mesh is not None:
            return self._mesh.spec
        return build_spec(self.config.source)

    @functools.cached_property
    def mesh(self) -> LevelMesh:
        if self._mesh is not None:
            return self._mesh
        return build_mesh(self.spec, self.config.level, self.config.truncation)

    @functools.cached_property
    def form(self) -> EnergyForm:
        return EnergyForm(self.mesh)

    @functools.cached_property
    def spectral(self) -> SpectralData:
        if self._spectral is not None:
            return self._spectral
        if self._spectral_loader is not None:
            return self._spectral_loader()
        return spectral_decompose(self.form)

    @functools.cached_property
    def beta(self) -> float:
        return cached_beta(self.spec).beta

    @property
    def enlargement(self) -> float:
        return self.config.enlargement or 3.0 * self.spec.length_factor / self.beta

    @property
    def workers(self) -> Optional[int]:
        return self.config.workers

    @property
    def is_vicsek(self) -> bool:
        return self.spec.family == "vicsek"

    def require_bv_case(self, p: float, what: str):
        """p = 1 的 BV 结果只对 Vicsek 族成立"""
        if p == 1.0 and not self.is_vicsek:
            raise UnsupportedCaseError(f"{what}: p=1 的结论只在 Vicsek 族上给出，{self.spec.name} 不适用")

    # ---- 检验函数族 ----
    @functools.cached_property
    def suite(self) -> List[DiscreteFunction]:
        mesh = self.mesh
        out = []
        for kind in self.config.kinds:
            if kind == "random-cellwise":
                out.extend(make_test_function(kind, mesh, seed=self.config.seed + i) for i in range(self.config.n_random))
            elif kind == "indicator":
                m = max(1, min(2, mesh.level - 2))
                out.append(make_test_function(kind, mesh, simplex=(m, 0)))
            elif kind == "harmonic":
                out.append(make_test_function(kind, mesh))
                b = np.arange(1, self.spec.n_boundary + 1, dtype=float)
                out.append(make_test_function(kind, mesh, boundary=b))
            elif kind == "eigenfunction":
                out.append(make_test_function(kind, mesh, spectral=self.spectral, j=1))
            else:
                out.append(make_test_function(kind, mesh, seed=self.config.seed))
        return out

    @property
    def nonconstant_suite(self) -> List[DiscreteFunction]:
        return [f for f in self.suite if not f.is_constant()]

    # ---- 位置族 ----
    def simplex_levels(self) -> List[int]:
        if self.config.simplex_levels is not None:
            return list(self.config.simplex_levels)
        return list(range(1, min(4, self.mesh.level - 2) + 1))

    def ball_levels(self) -> List[int]:
        if self.config.ball_levels is not None:
            return list(self.config.ball_levels)
        return list(range(1, min(4, self.mesh.level - 2) + 1))

    def sample_simplices(self, m: int) -> np.ndarray:
        count = self.spec.mass_factor ** m
        return np.unique(np.linspace(0, count - 1, min(count, self.config.max_loci)).astype(np.int64))

    def ball_radius(self, k: int) -> float:
        return self.mesh.level_diameter(k)

    @functools.cached_property
    def ball_centers(self) -> np.ndarray:
        """一半取 1 层连接点，其余为随机顶点（单元内部点）"""
        mesh = self.mesh
        corners = mesh.corner_ids(1).ravel()
        ids, counts = np.unique(corners, return_counts=True)
        junctions = ids[counts > 1]
        half = max(1, self.config.n_centers // 2)
        chosen = list(junctions[:half])
        rng = np.random.default_rng(self.config.seed)
        interior = np.setdiff1d(np.arange(mesh.n_vertices), corners)
        rest = self.config.n_centers - len(chosen)
        if interior.size and rest > 0:
            chosen.extend(rng.choice(interior, size=min(rest, interior.size), replace=False))
        return np.array(sorted(set(int(c) for c in chosen)), dtype=np.int64)

    def ball_inside(self, x0: int, radius: float) -> bool:
        """截断区域 K^⟨t⟩ 只经由外部顶点 L^t q_b（q_b ≠ 0）与其余部分相连"""
        mesh = self.mesh
        if mesh.truncation == 0:
            return True
        outer = self.spec.boundary_points * mesh.scale
        outer = outer[np.linalg.norm(outer, axis=1) > 0]
        return bool(np.linalg.norm(outer - mesh.points[x0], axis=1).min() > radius)

    # ---- 变差备忘 ----
    def profile(
        self,
        f: DiscreteFunction,
        locus: str,
        ids: Optional[np.ndarray] = None,
        p: Optional[float] = None,
        kind: str = "ks",
        weights: Optional[np.ndarray] = None,
        min_level: int = 1,
    ) -> VariationProfile:
        """同一 (函数, 位置, p, 类型) 只算一次；locus 是调用方给出的位置键"""
        p = self.config.p if p is None else p
        key = (f.name, locus, float(p), kind, min_level)
        with self._lock:
            cached = self._memo.get(key)
        if cached is None:
            levels = resolvable_levels(self.mesh, k_min=min_level)
            cached = variation(f, ids, p, kind, beta=self.beta, levels=levels, weights=weights, workers=self.workers)
            with self._lock:
                self._memo[key] = cached
        return cached

    def variation(self, f: DiscreteFunction, locus: str, ids: Optional[np.ndarray] = None, p: Optional[float] = None,
                  kind: str = "ks", weights: Optional[np.ndarray] = None, min_level: int = 1) -> float:
        return self.profile(f, locus, ids, p, kind, weights, min_level).estimate

    def first_level_below(self, radius: float) -> int:
        """尺度 r_k 不超过 radius 的最小 k"""
        k = 1
        while k < self.mesh.level - 1 and self.beta * self.spec.length_factor ** (self.mesh.truncation - k) > radius:
            k += 1
        return k

    def maximal(self, f: DiscreteFunction, p: Optional[float] = None) -> MaximalField:
        p = self.config.p if p is None else p
        key = (f.name, float(p))
        with self._lock:
            field = self._fields.get(key)
        if field is None:
            field = maximal_function(f, p, beta=self.beta, workers=self.workers)
            with self._lock:
                self._fields[key] = field
        return field
