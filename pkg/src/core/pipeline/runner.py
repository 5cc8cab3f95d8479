"""
运行编排：spec → mesh → spectral → functions → checks。

网格与谱数据按阶段哈希缓存在磁盘上；所有输出文件由编排线程写出，
同一配置哈希下 CSV/JSON 逐字节相同（timings.json 除外）。
"""
import contextlib
import json
import logging
import re
import threading
import time
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Union

import jsonschema
import numpy as np
import pandas as pd
from pydantic import BaseModel

from src import ENV
from src.core.errors import BudgetError, ConfigError, ResolutionError, UnsupportedCaseError, UsageError, WindowError
from src.core.functions.testfuncs import make_test_function
from src.core.geometry.ifs import FractalSpec
from src.core.geometry.mesh import LevelMesh, build_mesh, check_cell_budget, export_mesh
from src.core.geometry.registry import build_spec
from src.core.geometry.separation import cached_beta
from src.core.lab.context import LabContext
from src.core.lab.registry import check_names, run_all
from src.core.lab.report import CheckReport, InstanceRecord
from src.core.pipeline.cache import ArtifactCache
from src.core.pipeline.config_file import BudgetsSection, RunConfig, load_config
from src.core.pipeline.table_writer import (
    EdgeRow,
    EigenRow,
    HeatKernelRow,
    MaximalRow,
    TableWriter,
    VariationRow,
    vertex_row_model,
)
from src.core.spectral.dirichlet import EnergyForm, SpectralData, spectral_decompose
from src.core.spectral.heat import WeakBERow, default_time_grid, heat_asymptotics, heat_kernel

logger = logging.getLogger(__name__)

# check all 时记为跳过而不中断整个运行的错误
SKIPPABLE = (UnsupportedCaseError, BudgetError, WindowError, ResolutionError)

COMMANDS = ("build", "spectrum", "heat", "variation", "check", "run")


class RunManifest(BaseModel):
    config_hash: str
    spec: str
    level: int
    truncation: int
    checks: List[str] = []
    seed: int
    out: str
    stage_hashes: Dict[str, str] = {}


class RunReport(BaseModel):
    config: dict
    config_hash: str
    checks: List[str]
    reports: Dict[str, CheckReport]
    passed: bool
    hard_failures: int
    skipped: List[str] = []


@contextlib.contextmanager
def budget_scope(budgets: BudgetsSection) -> Iterator[None]:
    """在命令执行期间用配置中的预算替换 ENV 默认值"""
    names = list(BudgetsSection.model_fields)
    saved = {name: getattr(ENV, name) for name in names}
    for name in names:
        setattr(ENV, name, getattr(budgets, name))
    try:
        yield
    finally:
        for name, value in saved.items():
            setattr(ENV, name, value)


def safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name).strip("_") or "f"


class Runner:
    def __init__(self, config: RunConfig, cache: Optional[ArtifactCache] = None, use_cache: bool = True):
        self.config = config
        self.out = Path(config.run.out)
        self.cache = (cache or ArtifactCache()) if use_cache else None
        self.timings: Dict[str, float] = {}
        self.stage_hashes: Dict[str, str] = {}
        self._spec: Optional[FractalSpec] = None
        self._mesh: Optional[LevelMesh] = None
        self._spectral: Optional[SpectralData] = None
        self._spectral_lock = threading.Lock()
        self._context: Optional[LabContext] = None

    @contextlib.contextmanager
    def _timed(self, stage: str) -> Iterator[None]:
        start = time.perf_counter()
        yield
        elapsed = time.perf_counter() - start
        self.timings[stage] = self.timings.get(stage, 0.0) + elapsed
        logger.info("阶段 %s 完成，用时 %.3fs", stage, elapsed)

    # ---- 阶段 ----
    def spec(self) -> FractalSpec:
        if self._spec is None:
            with self._timed("spec"):
                self._spec = build_spec(self.config.source)
            self.stage_hashes["spec"] = self.config.stage_hash("spec")
        return self._spec

    def mesh(self) -> LevelMesh:
        if self._mesh is not None:
            return self._mesh
        spec = self.spec()
        fractal = self.config.fractal
        check_cell_budget(spec, fractal.level, self.config.budgets.max_cells, "build_mesh")
        key = self.config.stage_hash("mesh")
        self.stage_hashes["mesh"] = key
        with self._timed("mesh"):
            arrays = self.cache.load("mesh", key) if self.cache else None
            if arrays is not None:
                self._mesh = LevelMesh(spec, fractal.level, fractal.truncation, arrays["points"], arrays["cells"])
            else:
                self._mesh = build_mesh(spec, fractal.level, fractal.truncation, max_cells=self.config.budgets.max_cells)
                if self.cache:
                    self.cache.save("mesh", key, {"points": self._mesh.points, "cells": self._mesh.cells},
                                    upstream=self.stage_hashes["spec"])
        return self._mesh

    def spectral(self) -> SpectralData:
        # 并发检验可能同时请求谱数据
        with self._spectral_lock:
            return self._load_spectral()

    def _load_spectral(self) -> SpectralData:
        if self._spectral is not None:
            return self._spectral
        mesh = self.mesh()
        key = self.config.stage_hash("spectral")
        self.stage_hashes["spectral"] = key
        with self._timed("spectral"):
            arrays = self.cache.load("spectral", key) if self.cache else None
            if arrays is not None:
                self._spectral = SpectralData(
                    mesh=mesh,
                    eigenvalues=arrays["eigenvalues"],
                    eigenvectors=arrays["eigenvectors"],
                    complete=bool(arrays["complete"]),
                    residual=float(arrays["residual"]),
                )
            else:
                data = spectral_decompose(EnergyForm(mesh), self.config.spectral.count)
                self._spectral = data
                if self.cache:
                    self.cache.save("spectral", key, {
                        "eigenvalues": data.eigenvalues,
                        "eigenvectors": data.eigenvectors,
                        "complete": np.array(data.complete),
                        "residual": np.array(data.residual),
                    }, upstream=self.stage_hashes["mesh"])
        return self._spectral

    def context(self) -> LabContext:
        if self._context is None:
            check_config = self.config.to_check_config()
            self._context = LabContext(check_config, spec=self.spec(), mesh=self.mesh(), spectral_loader=self.spectral)
        return self._context

    # ---- 写出 ----
    def _path(self, name: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        return self.out / name

    def _write_json(self, name: str, payload: Union[BaseModel, dict]) -> Path:
        path = self._path(name)
        if isinstance(payload, BaseModel):
            text = payload.model_dump_json(indent=2)
        else:
            text = json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False)
        path.write_text(text + "\n", encoding="utf-8")
        logger.debug("写出 %s", path)
        return path

    def _write_manifest(self, checks: Sequence[str] = ()):
        fractal = self.config.fractal
        manifest = RunManifest(
            config_hash=self.config.config_hash(),
            spec=self.config.spec_name,
            level=fractal.level,
            truncation=fractal.truncation,
            checks=list(checks),
            seed=self.config.run.seed,
            out=str(self.out),
            stage_hashes=dict(sorted(self.stage_hashes.items())),
        )
        self._write_json("manifest.json", manifest)
        self._write_json("timings.json", {k: round(v, 6) for k, v in self.timings.items()})

    # ---- 命令 ----
    def execute(self, command: str, names: Optional[Sequence[str]] = None) -> int:
        """
        Returns:
            退出码：check / run 命令中有硬断言失败时为 1，否则为 0

        Raises:
            UsageError: 未知命令
        """
        if command not in COMMANDS:
            raise UsageError(f"未知命令: {command}（可用: {', '.join(COMMANDS)}）")
        with budget_scope(self.config.budgets):
            if command in ("check", "run"):
                return getattr(self, command)(names)
            getattr(self, command)()
            self._write_manifest()
            return 0

    def build(self) -> List[Path]:
        spec = self.spec()
        mesh = self.mesh()
        vertices, edges = export_mesh(mesh)
        summary = spec.summary()
        summary.update({
            "level": mesh.level,
            "truncation": mesh.truncation,
            "n_vertices": mesh.n_vertices,
            "n_cells": mesh.n_cells,
            "beta": cached_beta(spec).beta,
        })
        return [
            TableWriter(vertex_row_model(mesh.dim)).write_csv(vertices, self._path("vertices.csv")),
            TableWriter(EdgeRow).write_csv(edges, self._path("edges.csv")),
            self._write_json("spec.json", summary),
        ]

    def spectrum(self) -> List[Path]:
        data = self.spectral()
        rows = pd.DataFrame({"j": np.arange(data.count), "eigenvalue": data.eigenvalues})
        return [TableWriter(EigenRow).write_csv(rows, self._path("eigenvalues.csv"))]

    def heat(self) -> List[Path]:
        """
        对角（或热迹）指数拟合、非对角拟合与调和函数的弱 Bakry-Émery 比值；
        另写出时间网格中点处的热核切片 p_t(x, ·)，x 取配置的点（缺省为顶点 0）。
        """
        data = self.spectral()
        times = default_time_grid(data, self.config.spectral.times)
        g = make_test_function("harmonic", data.mesh).values
        with self._timed("heat"):
            result = heat_asymptotics(data, times, x=self.config.spectral.point, g=g, off_diagonal=True,
                                      tol=self.config.tolerances.heat_slope_tol)
            x = 0 if result.point is None else result.point
            kernel = heat_kernel(data, float(times[len(times) // 2]))
        rows = pd.DataFrame({"x_id": x, "y_id": np.arange(data.mesh.n_vertices), "p_t": kernel.row(x)})
        return [
            self._write_json("heat.json", result),
            TableWriter(WeakBERow).write_csv(result.weak_be, self._path("weak_be.csv")),
            TableWriter(HeatKernelRow).write_csv(rows, self._path("heat_kernel.csv")),
        ]

    def variation(self) -> List[Path]:
        """每个检验函数在 K 上、p 网格各点的变差剖面"""
        ctx = self.context()
        kind = self.config.functions.variation_kind
        grid = sorted({self.config.functions.p, *self.config.functions.p_grid})
        writer = TableWriter(VariationRow)
        paths = []
        with self._timed("functions"):
            for f in ctx.suite:
                rows = []
                for p in grid:
                    rows.extend(ctx.profile(f, "K", None, p, kind).rows())
                paths.append(writer.write_csv(rows, self._path(f"variation_{safe_name(f.name)}.csv")))
        self.stage_hashes["functions"] = self.config.stage_hash("functions")
        return paths

    def run_checks(self, names: Optional[Sequence[str]] = None) -> Dict[str, CheckReport]:
        """names 含 all 时运行全部已注册检验，不适用或超预算的记为跳过"""
        requested = list(names) if names is not None else list(self.config.checks.names or ["all"])
        if "all" in requested:
            selected, tolerate = check_names(), SKIPPABLE
        else:
            selected, tolerate = requested, (UnsupportedCaseError,)
        if not selected:
            return {}
        ctx = self.context()
        # 预热共享的惰性量，避免并发检验重复构造
        _ = ctx.mesh, ctx.beta, ctx.suite
        with self._timed("checks"):
            reports = run_all(ctx, selected, workers=self.config.run.parallel_checks, tolerate=tolerate)
        self.stage_hashes["checks"] = self.config.stage_hash("checks")
        return reports

    def write_maximal_fields(self) -> List[Path]:
        """每个检验函数的极大函数 g（p 取配置值），与 maximal 检验共用上下文缓存"""
        ctx = self.context()
        writer = TableWriter(MaximalRow)
        paths = []
        for f in ctx.suite:
            field = ctx.maximal(f)
            rows = pd.DataFrame({"vertex_id": np.arange(field.values.size), "g": field.values})
            paths.append(writer.write_csv(rows, self._path(f"maximal_{safe_name(f.name)}.csv")))
        return paths

    def check(self, names: Optional[Sequence[str]] = None) -> int:
        reports = self.run_checks(names)
        writer = TableWriter(InstanceRecord)
        for name, report in reports.items():
            writer.write_csv(report.records, self._path(f"{safe_name(name)}.csv"))
        maximal = reports.get("maximal")
        if maximal is not None and not maximal.is_skipped:
            self.write_maximal_fields()
        executed = [r for r in reports.values() if not r.is_skipped]
        skipped = [name for name, r in reports.items() if r.is_skipped]
        hard = sum(len(r.hard_failures) for r in reports.values())
        run_report = RunReport(
            config=self.config.echo(),
            config_hash=self.config.config_hash(),
            checks=list(reports),
            reports=reports,
            passed=bool(executed) and all(r.passed for r in executed),
            hard_failures=hard,
            skipped=skipped,
        )
        self._write_json("report.json", run_report)
        self._write_manifest(list(reports))
        if hard:
            logger.error("%d 个硬断言失败", hard)
        elif not executed:
            logger.warning("所有检验均被跳过，运行不计为通过")
        return 1 if hard else 0

    def run(self, names: Optional[Sequence[str]] = None) -> int:
        """build 之后运行检验；names 缺省取 [checks] names（再缺省为全部）"""
        self.build()
        return self.check(names)


def load_report(out: Union[str, Path]) -> RunReport:
    """
    读取 report.json，先按 RunReport 的 JSON Schema 校验。

    Raises:
        ConfigError: 文件不存在、不是 JSON 或不符合模式
    """
    path = Path(out)
    path = path / "report.json" if path.is_dir() else path
    if not path.exists():
        raise ConfigError("报告文件不存在", str(path))
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"报告不是合法 JSON: {e.msg}", str(path), e.lineno) from e
    try:
        jsonschema.validate(document, RunReport.model_json_schema())
    except jsonschema.ValidationError as e:
        where = "/".join(str(x) for x in e.absolute_path) or None
        raise ConfigError(f"报告不符合模式: {e.message}", str(path), key=where) from e
    return RunReport.model_validate(document)


def run(config: Union[str, Path, RunConfig, None] = None, use_cache: bool = True, **overrides) -> int:
    """
    按配置文件（或已解析的配置）构造网格并运行 [checks] names 列出的检验（缺省为全部）。

    Returns:
        退出码，同 Runner.execute
    """
    if not isinstance(config, RunConfig):
        config = load_config(config) if config is not None else RunConfig()
    runner = Runner(config.with_overrides(**overrides), use_cache=use_cache)
    return runner.execute("run")
