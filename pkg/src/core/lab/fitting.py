import logging
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from src import ENV
from src.core.errors import FitError

logger = logging.getLogger(__name__)


class ExponentFit(BaseModel):
    log_scale: List[float]
    log_quantity: List[float]
    slope: float
    intercept: float
    stderr: Optional[float] = None
    target: Optional[float] = None
    tolerance: float
    excluded: int = 0
    passed: Optional[bool] = None


def fit_exponent(
    scales: Sequence[float],
    quantities: Sequence[float],
    target: Optional[float] = None,
    tol: Optional[float] = None,
) -> ExponentFit:
    """
    对 (log scale, log quantity) 做最小二乘直线拟合。

    非正的样本被剔除并计数；剩余不足 3 个时抛出 FitError。
    """
    tol = ENV.exponent_tol if tol is None else tol
    scales = np.asarray(scales, dtype=float)
    quantities = np.asarray(quantities, dtype=float)
    keep = (scales > 0) & (quantities > 0) & np.isfinite(quantities) & np.isfinite(scales)
    excluded = int((~keep).sum())
    if keep.sum() < 3:
        raise FitError(f"有效样本只有 {int(keep.sum())} 个（剔除 {excluded} 个非正样本），至少需要 3 个")
    x = np.log(scales[keep])
    y = np.log(quantities[keep])
    design = np.stack([x, np.ones_like(x)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ np.array([slope, intercept])
    dof = max(1, x.size - 2)
    spread = float(((x - x.mean()) ** 2).sum())
    stderr = float(np.sqrt((resid @ resid) / dof / spread)) if spread > 0 else None
    passed = None if target is None else bool(abs(slope - target) <= tol)
    return ExponentFit(
        log_scale=x.tolist(),
        log_quantity=y.tolist(),
        slope=float(slope),
        intercept=float(intercept),
        stderr=stderr,
        target=target,
        tolerance=tol,
        excluded=excluded,
        passed=passed,
    )


def fit_or_none(scales: Sequence[float], quantities: Sequence[float], target: Optional[float], tol: float) -> Optional[ExponentFit]:
    """样本不足时返回 None 并记录，供各检验在层级过少时使用"""
    try:
        return fit_exponent(scales, quantities, target=target, tol=tol)
    except FitError as e:
        logger.warning("跳过指数拟合: %s", e)
        return None
