"""
fractal-lab 命令行入口。

    fractal-lab build --config run.cfg --out out/
    fractal-lab check poincare morrey --config run.cfg
    fractal-lab check all --level 5 --p 1.5
    fractal-lab run --config run.cfg --out out/
    fractal-lab report --out out/

退出码：0 正常；1 有硬断言失败；2 配置、预算或输入错误。
缓存目录由环境变量 FRACTAL_POINCARE_CACHE 覆盖。
"""
import argparse
import logging
import sys
from typing import List, Optional

from rich.console import Console
from rich.logging import RichHandler

from src.core.errors import FractalLabError
from src.core.pipeline.config_file import RunConfig, load_config
from src.core.pipeline.runner import Runner, load_report, run
from src.core.pipeline.summary import emit_summary

logger = logging.getLogger("fractal_lab")


def setup_logging(verbose: bool = False):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(rich_tracebacks=verbose, show_path=verbose)],
        force=True,
    )


def _common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="运行配置文件路径；缺省使用内置默认值")
    parser.add_argument("--out", help="输出目录")
    parser.add_argument("--seed", type=int, help="随机种子（覆盖 [run] seed）")
    parser.add_argument("--level", type=int, help="网格层级 n（覆盖 [fractal] level）")
    parser.add_argument("--p", type=float, help="指数 p ∈ [1, 2]（覆盖 [functions] p）")
    parser.add_argument("--workers", type=int, help="线程数")
    parser.add_argument("--no-cache", action="store_true", help="不读写磁盘缓存")
    parser.add_argument("-v", "--verbose", action="store_true", help="DEBUG 日志与完整回溯")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fractal-lab", description="嵌套分形上 Sobolev 型不等式的数值检验")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("build", "构造网格，写出 vertices.csv / edges.csv / spec.json"),
        ("spectrum", "谱分解，写出 eigenvalues.csv"),
        ("heat", "热核渐近与弱 Bakry-Émery 比值，写出 heat.json / weak_be.csv / heat_kernel.csv"),
        ("variation", "检验函数族的变差剖面，写出 variation_<function>.csv"),
    ):
        _common(sub.add_parser(name, help=help_text))
    check = sub.add_parser("check", help="运行检验，写出 report.json 与逐实例 CSV")
    check.add_argument("names", nargs="+", help="检验名，或 all")
    _common(check)
    _common(sub.add_parser("run", help="构造网格并运行 [checks] names 中的检验（缺省为全部）"))
    report = sub.add_parser("report", help="校验并汇总已有的 report.json")
    report.add_argument("--out", default="out", help="含 report.json 的目录")
    report.add_argument("-v", "--verbose", action="store_true")
    return parser


def _config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    return config.with_overrides(seed=args.seed, level=args.level, p=args.p, workers=args.workers, out=args.out)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    console = Console()
    try:
        if args.command == "report":
            document = load_report(args.out)
            console.print(emit_summary(document.reports, document.checks))
            return 1 if document.hard_failures else 0
        config = _config(args)
        if args.command == "run":
            status = run(config, use_cache=not args.no_cache)
        else:
            status = Runner(config, use_cache=not args.no_cache).execute(args.command, getattr(args, "names", None))
        if args.command in ("check", "run"):
            document = load_report(config.run.out)
            console.print(emit_summary(document.reports, document.checks))
        return status
    except FractalLabError as e:
        if args.verbose:
            logger.exception("运行失败")
        print(f"fractal-lab: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
