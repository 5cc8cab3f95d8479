import logging
from typing import Dict, List, Optional

from rich.table import Table

from src.core.lab.report import CheckReport

logger = logging.getLogger(__name__)


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.4g}"


def status(report: Optional[CheckReport]) -> str:
    if report is None or report.is_skipped:
        return "SKIPPED"
    return "PASS" if report.passed else "FAIL"


def emit_summary(reports: Dict[str, CheckReport], requested: Optional[List[str]] = None, title: str = "检验汇总") -> Table:
    """
    每个检验一行：最大比值、指数拟合与目标、稳定性因子、状态。
    requested 中没有报告的检验记为 SKIPPED。
    """
    table = Table(title=title)
    for column in ("check", "max ratio", "fit slope", "target", "stability", "hard failures", "status"):
        table.add_column(column)
    names = list(requested) if requested is not None else list(reports)
    for name in names:
        report = reports.get(name)
        if report is None:
            table.add_row(name, "-", "-", "-", "-", "-", "[yellow]SKIPPED[/yellow]")
            continue
        fit = report.fit
        state = status(report)
        color = {"PASS": "green", "FAIL": "red", "SKIPPED": "yellow"}[state]
        table.add_row(
            name,
            _fmt(report.max_ratio),
            _fmt(fit.slope if fit else None),
            _fmt(fit.target if fit else None),
            _fmt(report.stability),
            str(len(report.hard_failures)),
            f"[{color}]{state}[/{color}]",
        )
    return table
