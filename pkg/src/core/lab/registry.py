import inspect
import logging
from typing import Callable, Dict, List, Optional, Tuple, Type

from pydantic import BaseModel, ValidationError, create_model

from src.core.errors import UnsupportedCaseError, UsageError
from src.core.lab.report import CheckReport
from src.core.parallel import ordered_map

logger = logging.getLogger(__name__)

check_registry: Dict[str, dict] = {}


def infer_param_model(func: Callable) -> type[BaseModel]:
    """
    根据检验函数签名自动生成 pydantic 参数模型（第一个参数是上下文，不计入）
    """
    sig = inspect.signature(func)
    fields = {}
    for name, param in list(sig.parameters.items())[1:]:
        ann = param.annotation if param.annotation != inspect.Parameter.empty else str
        if param.default != inspect.Parameter.empty:
            fields[name] = (ann, param.default)
        else:
            fields[name] = (ann, ...)
    title = "".join(part.capitalize() for part in func.__name__.split("_"))
    return create_model(f"{title}Params", **fields)


def register_check(name=None):
    """
    装饰器注册检验函数，自动推导参数模型
    """
    def decorator(func):
        check_name = name or func.__name__.removeprefix("check_")
        check_registry[check_name] = {"func": func, "param_model": infer_param_model(func)}
        return func
    return decorator


def check_names() -> List[str]:
    _load_checks()
    return sorted(check_registry)


def run_check(name: str, ctx, **options) -> CheckReport:
    """
    Raises:
        UsageError: 未注册的检验或参数不合法
        UnsupportedCaseError: 该情形没有理论保证
    """
    _load_checks()
    if name not in check_registry:
        raise UsageError(f"未注册的检验: {name}（可用: {', '.join(sorted(check_registry))}）")
    entry = check_registry[name]
    try:
        params = entry["param_model"](**options)
    except ValidationError as e:
        raise UsageError(f"检验 {name} 的参数不合法: {e}") from e
    logger.info("运行检验 %s %s", name, params.model_dump())
    return entry["func"](ctx, **params.model_dump())


def run_all(
    ctx,
    names: Optional[List[str]] = None,
    workers: int = 1,
    tolerate: Tuple[Type[Exception], ...] = (UnsupportedCaseError,),
) -> Dict[str, CheckReport]:
    """
    并发运行一组检验，结果按名字顺序返回。
    tolerate 中的异常记为跳过：报告中 skipped 给出原因，passed 为 False。
    """
    names = check_names() if names is None else list(names)

    def task(name: str) -> CheckReport:
        try:
            return run_check(name, ctx)
        except tolerate as e:
            logger.warning("跳过检验 %s: %s", name, e)
            return CheckReport(check=name, skipped=[f"{type(e).__name__}: {e}"], passed=False)

    reports = ordered_map(task, names, workers=workers, desc="checks")
    return dict(zip(names, reports))


def _load_checks():
    # 导入即注册
    from src.core.lab import applications, bv_checks, heat_checks, morrey, poincare, structure  # noqa: F401
