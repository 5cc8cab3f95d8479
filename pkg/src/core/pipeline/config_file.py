"""
运行配置文件：扁平的 key = value 文本，按 [section] 分节。

    # 注释以 # 或 ; 开头
    [fractal]
    spec = vicsek
    level = 5

列表用逗号分隔，矩阵的行用分号分隔。每个键的行号都被保留，
校验错误会指出文件、行号和键名。
"""
import hashlib
import json
import logging
import typing
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, Field, ValidationError

from src import ENV
from src.core.errors import ConfigError
from src.core.geometry.registry import IFSConfig
from src.core.lab.config import CheckConfig

logger = logging.getLogger(__name__)


class RunSection(BaseModel):
    seed: int = 0
    out: str = "out"
    workers: Optional[int] = None
    parallel_checks: int = Field(1, ge=1)


class FractalSection(BaseModel):
    spec: str = "vicsek"
    level: int = Field(4, ge=1)
    truncation: int = Field(0, ge=0)


class SpectralSection(BaseModel):
    count: Optional[int] = Field(None, ge=2, description="None 表示全谱")
    times: int = Field(12, ge=3, description="热核时间网格点数")
    point: Optional[int] = None


class FunctionsSection(BaseModel):
    kinds: List[str] = ["constant", "harmonic", "random-cellwise", "indicator"]
    n_random: int = Field(10, ge=0)
    p: float = Field(2.0, ge=1.0, le=2.0)
    p_grid: List[float] = [1.0, 1.5, 2.0]
    variation_kind: str = "ks"


class ChecksSection(BaseModel):
    names: List[str] = []
    simplex_levels: Optional[List[int]] = None
    ball_levels: Optional[List[int]] = None
    max_loci: int = 6
    n_centers: int = 6
    chain_length: int = 3
    pair_samples: int = 1000
    enlargement: Optional[float] = None


class TolerancesSection(BaseModel):
    exponent_tol: float = ENV.exponent_tol
    heat_slope_tol: float = ENV.heat_slope_tol
    stability_factor: float = ENV.stability_factor
    comparison_factor: float = 10.0
    doubling_factor: float = 1.5
    ahlfors_factor: float = ENV.ahlfors_stability_factor
    identity_tol: float = ENV.identity_tol
    truncation_slack: float = ENV.truncation_slack


class BudgetsSection(BaseModel):
    max_cells: int = ENV.max_cells
    dense_limit: int = ENV.dense_limit
    max_pairs: int = ENV.max_pairs


SECTIONS = {
    "run": RunSection,
    "fractal": FractalSection,
    "ifs": IFSConfig,
    "spectral": SpectralSection,
    "functions": FunctionsSection,
    "checks": ChecksSection,
    "tolerances": TolerancesSection,
    "budgets": BudgetsSection,
}

# 每个阶段依赖的配置节；run.out 与 run.workers 不影响输出，不进入哈希
STAGE_SECTIONS = {
    "spec": ("fractal", "ifs"),
    "mesh": ("fractal", "ifs", "budgets"),
    "spectral": ("fractal", "ifs", "budgets", "spectral"),
    "functions": ("fractal", "ifs", "budgets", "functions", "run"),
    "checks": tuple(SECTIONS),
}


def _digest(payload) -> str:
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class RunConfig(BaseModel):
    run: RunSection = RunSection()
    fractal: FractalSection = FractalSection()
    ifs: Optional[IFSConfig] = None
    spectral: SpectralSection = SpectralSection()
    functions: FunctionsSection = FunctionsSection()
    checks: ChecksSection = ChecksSection()
    tolerances: TolerancesSection = TolerancesSection()
    budgets: BudgetsSection = BudgetsSection()
    path: str = Field("<text>", exclude=True)

    def _canonical(self, sections) -> dict:
        data = self.model_dump(mode="json")
        data["run"].pop("out", None)
        data["run"].pop("workers", None)
        return {name: data[name] for name in sections}

    def echo(self) -> dict:
        """报告中回显的配置，与 config_hash 覆盖同一组键"""
        return self._canonical(SECTIONS)

    def config_hash(self) -> str:
        return _digest(self.echo())

    def stage_hash(self, stage: str) -> str:
        if stage not in STAGE_SECTIONS:
            raise ConfigError(f"未知阶段: {stage}", self.path)
        return _digest({"stage": stage, **self._canonical(STAGE_SECTIONS[stage])})

    @property
    def source(self) -> Union[str, IFSConfig]:
        return self.ifs if self.ifs is not None else self.fractal.spec

    @property
    def spec_name(self) -> str:
        return self.ifs.name if self.ifs is not None else self.fractal.spec

    def with_overrides(self, seed: Optional[int] = None, level: Optional[int] = None,
                       p: Optional[float] = None, workers: Optional[int] = None,
                       out: Optional[str] = None) -> "RunConfig":
        """命令行参数覆盖配置文件"""
        data = self.model_dump()
        if seed is not None:
            data["run"]["seed"] = seed
        if workers is not None:
            data["run"]["workers"] = workers
        if out is not None:
            data["run"]["out"] = out
        if level is not None:
            data["fractal"]["level"] = level
        if p is not None:
            data["functions"]["p"] = p
        try:
            return RunConfig(path=self.path, **data)
        except ValidationError as e:
            raise ConfigError(f"命令行参数不合法: {e.errors()[0]['msg']}", self.path) from e

    def to_check_config(self) -> CheckConfig:
        try:
            return self._check_config()
        except ValidationError as e:
            error = e.errors()[0]
            raise ConfigError(f"检验配置不合法: {error['msg']}", self.path, key=".".join(str(x) for x in error["loc"])) from e

    def _check_config(self) -> CheckConfig:
        return CheckConfig(
            spec_name=self.fractal.spec,
            ifs=self.ifs,
            level=self.fractal.level,
            truncation=self.fractal.truncation,
            p=self.functions.p,
            p_grid=self.functions.p_grid,
            kinds=self.functions.kinds,
            n_random=self.functions.n_random,
            seed=self.run.seed,
            workers=self.run.workers,
            **self.checks.model_dump(exclude={"names"}),
            **self.tolerances.model_dump(),
        )


def _shape(annotation) -> int:
    """0 标量，1 列表，2 矩阵"""
    origin = typing.get_origin(annotation)
    if origin is Union:
        args = [a for a in typing.get_args(annotation) if a is not type(None)]
        return _shape(args[0]) if args else 0
    if origin in (list, List):
        inner = typing.get_args(annotation)
        return 1 + (_shape(inner[0]) if inner else 0)
    return 0


def _convert(raw: str, shape: int):
    if raw.lower() in ("none", "null", ""):
        return None
    if shape == 1:
        return [item.strip() for item in raw.split(",") if item.strip()]
    if shape >= 2:
        return [[item.strip() for item in row.split(",") if item.strip()] for row in raw.split(";") if row.strip()]
    return raw


def _tokenize(text: str, path: str) -> Dict[str, Dict[str, Tuple[str, int]]]:
    sections: Dict[str, Dict[str, Tuple[str, int]]] = {}
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"节标题不完整: {line}", path, lineno)
            current = line[1:-1].strip().lower()
            if current not in SECTIONS:
                raise ConfigError(f"未知的节 [{current}]（可用: {', '.join(SECTIONS)}）", path, lineno)
            if current in sections:
                raise ConfigError(f"节 [{current}] 重复", path, lineno)
            sections[current] = {}
            continue
        if "=" not in line:
            raise ConfigError(f"无法解析的行: {line}", path, lineno)
        if current is None:
            raise ConfigError("键值对必须位于某个 [section] 之下", path, lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SECTIONS[current].model_fields:
            raise ConfigError(f"节 [{current}] 没有键 {key}", path, lineno, key)
        if key in sections[current]:
            raise ConfigError("键重复", path, lineno, key)
        sections[current][key] = (value, lineno)
    return sections


def parse_config_text(text: str, path: str = "<text>") -> RunConfig:
    """
    Raises:
        ConfigError: 语法错误、未知的节或键、取值校验失败（带行号）
    """
    tokens = _tokenize(text, path)
    data = {}
    for name, entries in tokens.items():
        model = SECTIONS[name]
        values = {key: _convert(raw, _shape(model.model_fields[key].annotation)) for key, (raw, _) in entries.items()}
        try:
            data[name] = model(**{k: v for k, v in values.items() if v is not None})
        except ValidationError as e:
            error = e.errors()[0]
            key = str(error["loc"][0]) if error["loc"] else None
            line = entries[key][1] if key in entries else None
            raise ConfigError(error["msg"], path, line, f"{name}.{key}" if key else name) from e
    try:
        config = RunConfig(path=path, **data)
    except ValidationError as e:
        raise ConfigError(e.errors()[0]["msg"], path) from e
    logger.debug("读取配置 %s：节 %s，哈希 %s", path, list(tokens), config.config_hash()[:12])
    return config


def load_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError("配置文件不存在", str(path))
    return parse_config_text(path.read_text(encoding="utf-8"), str(path))


def load_ifs_config(source: Union[str, Path]) -> IFSConfig:
    """从配置文件路径或配置文本读取 [ifs] 节"""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and Path(source).exists()):
        config = load_config(source)
    else:
        config = parse_config_text(str(source))
    if config.ifs is None:
        raise ConfigError("缺少 [ifs] 节", config.path)
    return config.ifs
