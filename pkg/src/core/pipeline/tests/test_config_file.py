"""
运行配置文件的解析、行号报错与哈希
"""
import pytest

from src.core.errors import ConfigError
from ..config_file import RunConfig, load_config, load_ifs_config, parse_config_text

SAMPLE = """\
# 小规模的 SG 运行
[run]
seed = 7

[fractal]
spec = sg
level = 3

; 列表用逗号分隔
[functions]
kinds = constant, harmonic
p_grid = 1, 1.5
"""


def test_sections_and_lists():
    config = parse_config_text(SAMPLE)
    assert config.run.seed == 7
    assert config.fractal.spec == "sg"
    assert config.fractal.level == 3
    assert config.functions.kinds == ["constant", "harmonic"]
    assert config.functions.p_grid == [1.0, 1.5]
    # 未出现的节取默认值
    assert config.checks.names == []
    assert config.source == "sg"


def test_load_from_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(SAMPLE, encoding="utf-8")
    config = load_config(path)
    assert config.path == str(path)
    assert config.config_hash() == parse_config_text(SAMPLE).config_hash()
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")


@pytest.mark.parametrize(
    "text, line, key",
    [
        ("[fractal]\nspec = sg\ncolour = red\n", 3, "colour"),
        ("[fractal]\nlevel = 3\nlevel = 4\n", 3, "level"),
        ("[fractal]\n\nlevel = zero\n", 3, "fractal.level"),
        ("seed = 1\n", 1, None),
        ("[run]\n[shapes]\n", 2, None),
        ("[run]\nseed 1\n", 2, None),
    ],
)
def test_errors_carry_line_numbers(text, line, key):
    with pytest.raises(ConfigError) as info:
        parse_config_text(text, "bad.cfg")
    assert info.value.path == "bad.cfg"
    assert info.value.line == line
    assert info.value.key == key
    assert f"bad.cfg:{line}" in str(info.value)


def test_ifs_section():
    text = "[ifs]\ncontraction = 0.5\nunitary = 1, 0; 0, 1\ntranslations = 0, 0; 0.5, 0; 0.25, 0.4330127018922193\n"
    ifs = load_ifs_config(text)
    assert ifs.unitary == [[1.0, 0.0], [0.0, 1.0]]
    assert len(ifs.translations) == 3
    assert ifs.rho is None
    with pytest.raises(ConfigError):
        load_ifs_config("[fractal]\nspec = sg\n")


class TestHashes:
    def test_output_location_not_hashed(self):
        base = RunConfig()
        moved = base.with_overrides(out="elsewhere", workers=3)
        assert moved.run.out == "elsewhere"
        assert moved.config_hash() == base.config_hash()
        assert "out" not in moved.echo()["run"]

    def test_stage_hashes_follow_dependencies(self):
        base = RunConfig()
        other_p = base.with_overrides(p=1.5)
        assert other_p.stage_hash("mesh") == base.stage_hash("mesh")
        assert other_p.stage_hash("spectral") == base.stage_hash("spectral")
        assert other_p.stage_hash("functions") != base.stage_hash("functions")
        assert other_p.config_hash() != base.config_hash()
        deeper = base.with_overrides(level=5)
        assert deeper.stage_hash("mesh") != base.stage_hash("mesh")

    def test_unknown_stage(self):
        with pytest.raises(ConfigError):
            RunConfig().stage_hash("render")


class TestOverrides:
    def test_cli_overrides(self):
        config = parse_config_text(SAMPLE).with_overrides(seed=3, level=4, p=1.0)
        assert (config.run.seed, config.fractal.level, config.functions.p) == (3, 4, 1.0)

    def test_bad_override(self):
        with pytest.raises(ConfigError):
            RunConfig().with_overrides(p=3.0)

    def test_check_config(self):
        check = parse_config_text(SAMPLE).to_check_config()
        assert check.spec_name == "sg"
        assert check.level == 3
        assert check.seed == 7
        assert check.kinds == ["constant", "harmonic"]

    def test_unresolvable_levels(self):
        config = parse_config_text("[fractal]\nlevel = 3\n[checks]\nsimplex_levels = 2\n")
        with pytest.raises(ConfigError):
            config.to_check_config()
