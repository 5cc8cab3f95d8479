from typing import List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from src import ENV
from src.core.geometry.registry import IFSConfig


class CheckConfig(BaseModel):
    """一次不等式检验所需的全部参数，缺省值取自 ENV。"""

    spec_name: str = "vicsek"
    ifs: Optional[IFSConfig] = None
    level: int = Field(5, ge=2, description="网格层级 n")
    truncation: int = Field(0, ge=0, description="截断层级 t")
    p: float = Field(2.0, ge=1.0, le=2.0)
    p_grid: List[float] = [1.0, 1.5, 2.0]
    kinds: List[str] = ["constant", "harmonic", "random-cellwise", "indicator"]
    n_random: int = Field(10, ge=0, description="random-cellwise 函数个数")
    seed: int = 0
    simplex_levels: Optional[List[int]] = None
    ball_levels: Optional[List[int]] = None
    max_loci: int = Field(6, ge=1, description="每个层级抽取的单形 / 球心个数上限")
    n_centers: int = Field(6, ge=1)
    chain_length: int = Field(3, ge=1, le=4)
    pair_samples: int = Field(1000, ge=10)
    enlargement: Optional[float] = Field(None, description="球放大因子 A，缺省 3L/β̂")
    exponent_tol: float = ENV.exponent_tol
    heat_slope_tol: float = ENV.heat_slope_tol
    stability_factor: float = ENV.stability_factor
    comparison_factor: float = 10.0
    doubling_factor: float = 1.5
    ahlfors_factor: float = ENV.ahlfors_stability_factor
    identity_tol: float = ENV.identity_tol
    truncation_slack: float = ENV.truncation_slack
    workers: Optional[int] = None

    @field_validator("enlargement")
    @classmethod
    def _enlargement_above_one(cls, value):
        if value is not None and not value > 1.0:
            raise ValueError(f"放大因子 A 必须大于 1: {value}")
        return value

    @field_validator("p_grid")
    @classmethod
    def _p_grid_range(cls, value):
        for p in value:
            if not 1.0 <= p <= 2.0:
                raise ValueError(f"p_grid 中的 {p} 不在 [1, 2] 内")
        return value

    @model_validator(mode="after")
    def _levels_resolvable(self):
        if self.truncation > self.level:
            raise ValueError(f"截断层级 t={self.truncation} 超过网格层级 n={self.level}")
        top = self.level - 1
        for name in ("simplex_levels", "ball_levels"):
            levels = getattr(self, name)
            if levels is not None and any(not 0 <= k < top for k in levels):
                raise ValueError(f"{name}={levels} 必须在 0..{top - 1} 内（需要更细的可分辨尺度）")
        return self

    @property
    def source(self):
        return self.ifs if self.ifs is not None else self.spec_name
