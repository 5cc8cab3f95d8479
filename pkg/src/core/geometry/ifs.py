"""
IFS 相似映射与嵌套分形规格。

单词约定：字母取 0..M-1，ψ_w = ψ_{w[0]} ∘ … ∘ ψ_{w[-1]}，
n 层单词的下标为以 M 为基的数，首字母是最高位。这样同一父单形的所有子单形
在数组中连续排列，后面所有按前缀分组的计算都依赖这一点。
"""
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Similitude:
    """ψ(x) = contraction · U x + translation"""

    contraction: float
    unitary: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        unitary = np.atleast_2d(np.asarray(self.unitary, dtype=float))
        translation = np.asarray(self.translation, dtype=float).ravel()
        if unitary.shape != (translation.size, translation.size):
            raise ValueError(f"酉矩阵形状 {unitary.shape} 与平移维数 {translation.size} 不匹配")
        if not 0.0 < self.contraction < 1.0:
            raise ValueError(f"压缩比必须在 (0,1) 内: {self.contraction}")
        object.__setattr__(self, "contraction", float(self.contraction))
        object.__setattr__(self, "unitary", _readonly(unitary))
        object.__setattr__(self, "translation", _readonly(translation))

    @property
    def dim(self) -> int:
        return self.translation.size

    @property
    def linear(self) -> np.ndarray:
        return self.contraction * self.unitary

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x @ self.linear.T + self.translation

    def fixed_point(self) -> np.ndarray:
        return np.linalg.solve(np.eye(self.dim) - self.linear, self.translation)

    def is_orthogonal(self, tol: float = 1e-10) -> bool:
        u = self.unitary
        return bool(np.max(np.abs(u.T @ u - np.eye(self.dim))) <= tol)


@dataclass(frozen=True, eq=False)
class FractalSpec:
    """
    经过公理校验与电导重整化之后的嵌套分形。

    Attributes:
        boundary: 构成 V⁰ 的相似映射下标（本质不动点 q_b 是 ψ_{boundary[b]} 的不动点）
        pairs: V⁰ 局部下标的无序对 (a<b)，按字典序
        pair_orbit: 每个点对所在的对称轨道编号
        conductance: 每条轨道上的电导（重整化不动点，最大值归一为 1）
    """

    name: str
    family: str
    similitudes: Tuple[Similitude, ...]
    boundary: Tuple[int, ...]
    boundary_points: np.ndarray
    pairs: np.ndarray
    pair_orbit: np.ndarray
    symmetries: np.ndarray
    conductance: np.ndarray = field(default_factory=lambda: np.zeros(0))
    resistance_factor: Optional[float] = None
    renormalization_iterations: int = 0

    def __post_init__(self):
        object.__setattr__(self, "similitudes", tuple(self.similitudes))
        object.__setattr__(self, "boundary", tuple(int(b) for b in self.boundary))
        object.__setattr__(self, "boundary_points", _readonly(self.boundary_points))
        pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        orbit = np.asarray(self.pair_orbit, dtype=np.int64).ravel()
        symmetries = np.asarray(self.symmetries, dtype=np.int64)
        for array in (pairs, orbit, symmetries):
            array.setflags(write=False)
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "pair_orbit", orbit)
        object.__setattr__(self, "symmetries", symmetries)
        object.__setattr__(self, "conductance", _readonly(self.conductance))

    # ---- 标度常数 ----
    @property
    def mass_factor(self) -> int:
        return len(self.similitudes)

    @property
    def contraction(self) -> float:
        return self.similitudes[0].contraction

    @property
    def length_factor(self) -> float:
        return 1.0 / self.contraction

    @property
    def linear(self) -> np.ndarray:
        return self.similitudes[0].linear

    @property
    def dim(self) -> int:
        return self.similitudes[0].dim

    @property
    def n_boundary(self) -> int:
        return len(self.boundary)

    @property
    def n_orbits(self) -> int:
        return int(self.pair_orbit.max()) + 1 if self.pair_orbit.size else 0

    @property
    def d_h(self) -> float:
        return math.log(self.mass_factor) / math.log(self.length_factor)

    @property
    def d_w(self) -> float:
        if self.resistance_factor is None:
            raise ValueError(f"{self.name}: 尚未完成电导重整化，d_w 未定义")
        return math.log(self.mass_factor * self.resistance_factor) / math.log(self.length_factor)

    def alpha(self, p: float) -> float:
        """临界 Besov 指数 α_p = (1 − 2/p)(1 − d_h/d_w) + 1/p"""
        ratio = self.d_h / self.d_w
        return (1.0 - 2.0 / p) * (1.0 - ratio) + 1.0 / p

    @property
    def diameter(self) -> float:
        """diam K，等于 V⁰ 的直径（嵌套分形包含在 V⁰ 的凸包内）"""
        diff = self.boundary_points[:, None, :] - self.boundary_points[None, :, :]
        return float(np.sqrt((diff ** 2).sum(axis=-1)).max())

    @property
    def centroid(self) -> np.ndarray:
        return self.boundary_points.mean(axis=0)

    @property
    def pair_conductance(self) -> np.ndarray:
        return self.conductance[self.pair_orbit]

    @property
    def conductance_pattern(self) -> dict:
        return {int(o): float(c) for o, c in enumerate(self.conductance)}

    def orbit_members(self, orbit: int) -> np.ndarray:
        return self.pairs[self.pair_orbit == orbit]

    # ---- 单词映射 ----
    def word_offsets(self, level: int) -> np.ndarray:
        """所有 level 层单词 ψ_w 的平移部分，形状 (M^level, d)，线性部分统一为 A^level。"""
        offsets = np.zeros((1, self.dim))
        power = np.eye(self.dim)
        translations = np.array([s.translation for s in self.similitudes])
        for _ in range(level):
            # ψ_{w i} = ψ_w ∘ ψ_i：子单词偏移 = b_w + A^k a_i
            moved = translations @ power.T
            offsets = (offsets[:, None, :] + moved[None, :, :]).reshape(-1, self.dim)
            power = self.linear @ power
        return offsets

    def linear_power(self, level: int) -> np.ndarray:
        return np.linalg.matrix_power(self.linear, level)

    def cell_points(self, level: int, points: Optional[np.ndarray] = None) -> np.ndarray:
        """ψ_w(points) 对所有 level 层单词，形状 (M^level, k, d)；默认 points = V⁰。"""
        points = self.boundary_points if points is None else np.asarray(points, dtype=float)
        mapped = points @ self.linear_power(level).T
        return self.word_offsets(level)[:, None, :] + mapped[None, :, :]

    def word(self, index: int, level: int) -> Tuple[int, ...]:
        letters = []
        for _ in range(level):
            index, letter = divmod(index, self.mass_factor)
            letters.append(letter)
        return tuple(reversed(letters))

    def word_index(self, word: Sequence[int]) -> int:
        index = 0
        for letter in word:
            if not 0 <= letter < self.mass_factor:
                raise ValueError(f"字母 {letter} 超出 0..{self.mass_factor - 1}")
            index = index * self.mass_factor + int(letter)
        return index

    def apply_word(self, word: Sequence[int], x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        for letter in reversed(tuple(word)):
            x = self.similitudes[letter](x)
        return x

    def corner_suffix_index(self, corner: int, depth: int) -> int:
        """单词 (s_b, …, s_b)（depth 个）的下标；ψ_w(q_b) 是 w·s_b^depth 的第 b 个角点。"""
        letter = self.boundary[corner]
        if depth == 0:
            return 0
        return letter * (self.mass_factor ** depth - 1) // (self.mass_factor - 1)

    def summary(self) -> dict:
        return {
            "name": self.name,
            "family": self.family,
            "L": self.length_factor,
            "M": self.mass_factor,
            "rho": self.resistance_factor,
            "d_h": self.d_h,
            "d_w": self.d_w if self.resistance_factor is not None else None,
            "boundary": list(self.boundary),
            "conductance_pattern": self.conductance_pattern,
            "renormalization_iterations": self.renormalization_iterations,
        }
