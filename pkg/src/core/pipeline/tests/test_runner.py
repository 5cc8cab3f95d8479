"""
运行编排与命令行：输出文件、可复现性、预算与退出码
"""
import json

import pandas as pd
import pytest

from src import ENV
from src.core.errors import BudgetError, ConfigError, UsageError
from src.main import main
from ..config_file import parse_config_text
from ..runner import Runner, budget_scope, load_report, run, safe_name

SMALL_RUN = """\
[fractal]
spec = vicsek
level = 3

[functions]
n_random = 2

[checks]
names = truncation_bound, harmonic_energy
max_loci = 2
n_centers = 2
pair_samples = 100
"""


def _runner(out, text=SMALL_RUN, **overrides):
    config = parse_config_text(text).with_overrides(out=str(out), **overrides)
    return Runner(config, use_cache=False)


def test_build_outputs(tmp_path):
    runner = _runner(tmp_path)
    assert runner.execute("build") == 0
    summary = json.loads((tmp_path / "spec.json").read_text(encoding="utf-8"))
    assert summary["n_vertices"] == 376
    assert summary["level"] == 3
    header = (tmp_path / "vertices.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header == "vertex_id,x0,x1,weight"
    manifest = json.loads((tmp_path / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["config_hash"] == runner.config.config_hash()
    assert set(manifest["stage_hashes"]) == {"spec", "mesh"}
    assert "mesh" in json.loads((tmp_path / "timings.json").read_text(encoding="utf-8"))


def test_spectrum_and_variation(tmp_path):
    runner = _runner(tmp_path, text=SMALL_RUN.replace("vicsek", "sg"))
    runner.execute("spectrum")
    lines = (tmp_path / "eigenvalues.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "j,eigenvalue"
    assert len(lines) == 1 + 42
    runner.execute("variation")
    written = sorted(p.name for p in tmp_path.glob("variation_*.csv"))
    assert len(written) == len(runner.context().suite)
    assert all(pd.read_csv(tmp_path / name).columns[0] == "kind" for name in written)


def test_heat_outputs(tmp_path):
    runner = _runner(tmp_path, text=SMALL_RUN.replace("vicsek", "sg").replace("level = 3", "level = 4"))
    assert runner.execute("heat") == 0
    heat = json.loads((tmp_path / "heat.json").read_text(encoding="utf-8"))
    assert heat["target"] < 0
    assert (tmp_path / "weak_be.csv").read_text(encoding="utf-8").startswith("t,numerator,ratio")
    kernel = pd.read_csv(tmp_path / "heat_kernel.csv")
    assert list(kernel.columns) == ["x_id", "y_id", "p_t"]
    assert len(kernel) == runner.mesh().n_vertices
    assert kernel["x_id"].nunique() == 1
    assert kernel["y_id"].tolist() == list(range(len(kernel)))
    assert kernel["p_t"].notna().all()


def test_check_writes_report(tmp_path):
    runner = _runner(tmp_path)
    assert runner.execute("check") == 0
    document = load_report(tmp_path)
    assert document.checks == ["truncation_bound", "harmonic_energy"]
    assert document.hard_failures == 0
    assert document.config_hash == runner.config.config_hash()
    assert (tmp_path / "truncation_bound.csv").exists()


def test_maximal_fields_written(tmp_path):
    runner = _runner(tmp_path, text=SMALL_RUN.replace("truncation_bound, harmonic_energy", "maximal"))
    assert runner.execute("check") == 0
    written = sorted(tmp_path.glob("maximal_*.csv"))
    assert len(written) == len(runner.context().suite)
    for path in written:
        table = pd.read_csv(path)
        assert list(table.columns) == ["vertex_id", "g"]
        assert len(table) == runner.mesh().n_vertices
        assert (table["g"] >= 0).all()


@pytest.mark.repeat(2)
def test_reports_byte_identical(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    _runner(first).execute("check", ["truncation_bound"])
    _runner(second, workers=2).execute("check", ["truncation_bound"])
    for name in ("report.json", "truncation_bound.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_unsupported_check_skipped(tmp_path):
    text = SMALL_RUN.replace("vicsek", "sg").replace("names = truncation_bound, harmonic_energy", "names = adjacent_simplices_l1")
    runner = _runner(tmp_path, text=text)
    reports = runner.run_checks()
    assert reports["adjacent_simplices_l1"].skipped


def test_fully_skipped_run_not_passed(tmp_path):
    text = SMALL_RUN.replace("vicsek", "sg").replace("names = truncation_bound, harmonic_energy", "names = adjacent_simplices_l1")
    runner = _runner(tmp_path, text=text)
    # 退出码只反映硬断言
    assert runner.execute("check") == 0
    document = load_report(tmp_path)
    assert not document.passed
    assert document.skipped == ["adjacent_simplices_l1"]


def test_budget_error_names_stage(tmp_path):
    runner = _runner(tmp_path, text="[fractal]\nspec = sg\nlevel = 9\n")
    with pytest.raises(BudgetError) as info:
        runner.execute("build")
    assert info.value.stage == "build_mesh"


def test_run_builds_then_checks(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(SMALL_RUN, encoding="utf-8")
    out = tmp_path / "out"
    assert run(path, use_cache=False, out=str(out)) == 0
    assert (out / "vertices.csv").exists()
    assert json.loads((out / "spec.json").read_text(encoding="utf-8"))["n_vertices"] == 376
    document = load_report(out)
    assert document.checks == ["truncation_bound", "harmonic_energy"]
    assert document.skipped == []


def test_budget_scope_restores_env():
    config = parse_config_text("[budgets]\ndense_limit = 10\n")
    before = ENV.dense_limit
    with budget_scope(config.budgets):
        assert ENV.dense_limit == 10
    assert ENV.dense_limit == before


def test_unknown_command(tmp_path):
    with pytest.raises(UsageError):
        _runner(tmp_path).execute("render")


class TestLoadReport:
    def test_missing(self, tmp_path):
        with pytest.raises(ConfigError):
            load_report(tmp_path)

    def test_not_json(self, tmp_path):
        (tmp_path / "report.json").write_text("{\n  \"checks\": [\n", encoding="utf-8")
        with pytest.raises(ConfigError) as info:
            load_report(tmp_path)
        assert info.value.line is not None

    def test_schema_violation(self, tmp_path):
        document = {"config": {}, "config_hash": "x", "checks": ["a"], "reports": {}, "passed": "yes", "hard_failures": 0}
        (tmp_path / "report.json").write_text(json.dumps(document), encoding="utf-8")
        with pytest.raises(ConfigError) as info:
            load_report(tmp_path)
        assert info.value.key == "passed"


class TestMain:
    def test_check_exit_code(self, tmp_path):
        out = tmp_path / "out"
        assert main(["check", "harmonic_energy", "--level", "3", "--no-cache", "--out", str(out)]) == 0
        assert main(["report", "--out", str(out)]) == 0

    def test_run_command(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(SMALL_RUN, encoding="utf-8")
        out = tmp_path / "out"
        assert main(["run", "--config", str(path), "--no-cache", "--out", str(out)]) == 0
        assert load_report(out).hard_failures == 0
        assert (out / "edges.csv").exists()

    def test_config_errors_exit_two(self, tmp_path, capsys):
        assert main(["build", "--config", str(tmp_path / "missing.cfg"), "--no-cache"]) == 2
        assert "ConfigError" in capsys.readouterr().err
        bad = tmp_path / "bad.cfg"
        bad.write_text("[fractal]\nlevel = many\n", encoding="utf-8")
        assert main(["build", "--config", str(bad), "--no-cache"]) == 2

    def test_budget_errors_exit_two(self, tmp_path):
        code = main(["build", "--level", "9", "--no-cache", "--out", str(tmp_path)])
        assert code == 2


def test_safe_name():
    assert safe_name("harmonic(1.0, 0.0, 0.0)") == "harmonic_1.0_0.0_0.0"
    assert safe_name("()") == "f"
