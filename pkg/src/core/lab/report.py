"""
检验报告：逐实例记录、精确断言与尺度稳定性。

ratio = LHS/RHS（RHS > 0）；RHS = 0 且 LHS 不超过 zero_tol 记为退化并计数；
RHS = 0 而 LHS > 0 与定理矛盾，作为硬断言失败处理。
"""
import logging
import math
from collections import defaultdict
from typing import Dict, List, Optional

from pydantic import BaseModel

from src.core.lab.fitting import ExponentFit

logger = logging.getLogger(__name__)


class InstanceRecord(BaseModel):
    function: str
    locus: str
    group: str = ""
    scale: Optional[float] = None
    lhs: float
    rhs: float
    ratio: Optional[float] = None
    degenerate: bool = False


class Assertion(BaseModel):
    name: str
    lhs: float
    rhs: float
    slack: float = 0.0
    holds: bool
    hard: bool = False


class CheckReport(BaseModel):
    check: str
    records: List[InstanceRecord] = []
    max_ratio: Optional[float] = None
    fit: Optional[ExponentFit] = None
    stability: Optional[float] = None
    stability_limit: Optional[float] = None
    degenerate: int = 0
    skipped: List[str] = []
    assertions: List[Assertion] = []
    measured: Dict[str, Optional[float]] = {}
    passed: bool = True

    @property
    def hard_failures(self) -> List[Assertion]:
        return [a for a in self.assertions if a.hard and not a.holds]

    @property
    def is_skipped(self) -> bool:
        """整个检验没有运行：只有跳过原因，没有记录也没有断言"""
        return bool(self.skipped) and not self.records and not self.assertions

    def record_rows(self) -> List[dict]:
        return [r.model_dump() for r in self.records]


def _finite(value: Optional[float]) -> Optional[float]:
    if value is None or not math.isfinite(value):
        return None
    return float(value)


class ReportBuilder:
    """逐步收集记录与断言，最后汇总成 CheckReport"""

    def __init__(self, check: str, zero_tol: float = 0.0):
        self.check = check
        self.zero_tol = zero_tol
        self.records: List[InstanceRecord] = []
        self.assertions: List[Assertion] = []
        self.skipped: List[str] = []
        self.measured: Dict[str, Optional[float]] = {}

    def add(self, function: str, locus: str, lhs: float, rhs: float, group="", scale: Optional[float] = None) -> InstanceRecord:
        lhs, rhs = float(lhs), float(rhs)
        degenerate = False
        ratio = None
        if rhs > 0:
            ratio = lhs / rhs
        elif abs(lhs) <= self.zero_tol:
            degenerate = True
        else:
            self.assert_that(f"rhs_positive[{function}@{locus}]", lhs, rhs, holds=False, hard=True)
        record = InstanceRecord(function=function, locus=locus, group=str(group), scale=_finite(scale),
                                lhs=lhs, rhs=rhs, ratio=_finite(ratio), degenerate=degenerate)
        self.records.append(record)
        return record

    def assert_that(self, name: str, lhs: float, rhs: float, slack: float = 0.0, holds: Optional[bool] = None, hard: bool = False):
        """未给出 holds 时检查 lhs ≤ rhs + slack"""
        if holds is None:
            holds = bool(lhs <= rhs + slack)
        self.assertions.append(Assertion(name=name, lhs=float(lhs), rhs=float(rhs), slack=float(slack), holds=bool(holds), hard=hard))
        if not holds:
            log = logger.error if hard else logger.warning
            log("%s: 断言 %s 不成立（%.6g > %.6g + %.1e）", self.check, name, lhs, rhs, slack)

    def skip(self, reason: str):
        logger.warning("%s: 跳过 %s", self.check, reason)
        self.skipped.append(reason)

    def measure(self, key: str, value: Optional[float]):
        self.measured[key] = _finite(value)

    def group_maxima(self) -> Dict[str, float]:
        maxima = defaultdict(float)
        for r in self.records:
            if r.ratio is not None:
                maxima[r.group] = max(maxima[r.group], r.ratio)
        return dict(maxima)

    def stability(self) -> Optional[float]:
        """各组最大比值的最大值 / 最小值；少于两组时为 None"""
        positive = [v for v in self.group_maxima().values() if v > 0]
        if len(positive) < 2:
            return None
        return max(positive) / min(positive)

    def finish(self, limit: Optional[float] = None, fit: Optional[ExponentFit] = None,
               stability: Optional[float] = None) -> CheckReport:
        ratios = [r.ratio for r in self.records if r.ratio is not None]
        stability = self.stability() if stability is None else stability
        passed = not any(a.hard and not a.holds for a in self.assertions)
        if limit is not None and stability is not None:
            passed = passed and stability <= limit
        if fit is not None and fit.passed is not None:
            passed = passed and fit.passed
        report = CheckReport(
            check=self.check,
            records=self.records,
            max_ratio=max(ratios) if ratios else None,
            fit=fit,
            stability=_finite(stability),
            stability_limit=limit,
            degenerate=sum(r.degenerate for r in self.records),
            skipped=self.skipped,
            assertions=self.assertions,
            measured=self.measured,
            passed=passed,
        )
        logger.info("%s: %d 条记录，最大比值 %s，稳定性 %s，%s", self.check, len(self.records),
                    report.max_ratio, report.stability, "PASS" if passed else "FAIL")
        return report
