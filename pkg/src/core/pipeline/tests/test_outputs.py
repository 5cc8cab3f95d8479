"""
表格输出、磁盘缓存与汇总表的测试
"""
import json

import numpy as np
import pandas as pd
import pytest

from src.core.errors import UsageError
from src.core.lab.report import CheckReport, ReportBuilder
from ..cache import ArtifactCache
from ..summary import emit_summary, status
from ..table_writer import EigenRow, HeatKernelRow, MaximalRow, TableWriter, VariationRow, vertex_row_model


class TestTableWriter:
    def test_csv_format(self, tmp_path):
        rows = [VariationRow(kind="ks", p=2.0, level=1, r_or_t=0.1, raw=1.0 / 3.0, normalized=2.0)]
        writer = TableWriter(VariationRow)
        text = writer.to_csv(rows)
        assert text.splitlines()[0] == "kind,p,level,r_or_t,raw,normalized"
        assert "\r\n" not in text
        assert "0.10000000000000001" in text
        path = writer.write_csv(rows, tmp_path / "nested" / "variation.csv")
        assert path.read_bytes() == text.encode("utf-8")
        assert pd.read_csv(path, float_precision="round_trip")["raw"][0] == 1.0 / 3.0

    def test_column_order_from_model(self):
        frame = pd.DataFrame({"eigenvalue": [0.0, 1.5], "j": [0, 1], "extra": [1, 2]})
        out = TableWriter(EigenRow).frame(frame)
        assert list(out.columns) == ["j", "eigenvalue"]
        with pytest.raises(UsageError):
            TableWriter(EigenRow).frame(pd.DataFrame({"j": [0]}))

    def test_dict_rows_validated(self):
        model = vertex_row_model(2)
        writer = TableWriter(model)
        assert writer.headers == ["vertex_id", "x0", "x1", "weight"]
        frame = writer.frame([{"vertex_id": 0, "x0": 0.0, "x1": 1.0, "weight": 0.5}])
        assert frame.shape == (1, 4)

    def test_export_headers(self):
        assert TableWriter(HeatKernelRow).headers == ["x_id", "y_id", "p_t"]
        assert TableWriter(MaximalRow).headers == ["vertex_id", "g"]


class TestArtifactCache:
    def test_roundtrip(self, tmp_path):
        cache = ArtifactCache(str(tmp_path))
        cache.save("mesh", "abc", {"points": np.eye(2), "cells": np.arange(3)}, upstream="up")
        arrays = cache.load("mesh", "abc")
        assert np.array_equal(arrays["points"], np.eye(2))
        assert np.array_equal(arrays["cells"], np.arange(3))
        assert cache.load("mesh", "other") is None

    def test_sidecar_mismatch_ignored(self, tmp_path):
        cache = ArtifactCache(str(tmp_path))
        cache.save("spectral", "abc", {"eigenvalues": np.zeros(2)})
        sidecar = tmp_path / "spectral" / "abc.json"
        sidecar.write_text(json.dumps({"stage": "spectral", "stage_hash": "zzz"}), encoding="utf-8")
        assert cache.load("spectral", "abc") is None
        sidecar.write_text("{", encoding="utf-8")
        assert cache.load("spectral", "abc") is None

    @pytest.mark.parametrize("damage", ["garbage", "truncated"])
    def test_corrupt_bundle_is_a_miss(self, tmp_path, damage):
        cache = ArtifactCache(str(tmp_path))
        cache.save("mesh", "abc", {"points": np.eye(2)})
        bundle = tmp_path / "mesh" / "abc.npz"
        data = bundle.read_bytes()
        bundle.write_bytes(b"not an archive" if damage == "garbage" else data[:20])
        assert cache.load("mesh", "abc") is None

    def test_env_var_overrides_location(self, tmp_path, monkeypatch):
        monkeypatch.setenv("FRACTAL_POINCARE_CACHE", str(tmp_path))
        assert ArtifactCache().root == tmp_path


class TestSummary:
    def test_status(self):
        assert status(None) == "SKIPPED"
        assert status(CheckReport(check="morrey", skipped=["UnsupportedCaseError: p=1"])) == "SKIPPED"
        assert status(CheckReport(check="morrey", skipped=["BudgetError: pairs"], passed=False)) == "SKIPPED"
        failing = ReportBuilder("demo")
        failing.add("f", "K", 1.0, 0.0)
        assert status(failing.finish()) == "FAIL"
        assert status(CheckReport(check="demo")) == "PASS"

    def test_missing_reports_listed(self):
        table = emit_summary({}, ["poincare", "morrey"])
        assert table.row_count == 2
        assert emit_summary({}).row_count == 0
