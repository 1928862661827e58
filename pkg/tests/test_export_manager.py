# -*- coding: utf-8 -*-
"""
Тесты экспорта: журнал метрик, файлы оценок, таблицы абляции
"""

import importlib
import json
import sys

import numpy as np
import pandas as pd
import pytest
from openpyxl import load_workbook

from errors import DataError, UsageError
from evalmetrics import evaluate
from export_manager import ExportManager
from models import ScoreSet


@pytest.fixture
def exporter(tmp_path):
    return ExportManager(tmp_path / "out")


@pytest.fixture
def table():
    return pd.DataFrame({"model": ["BaseNet", "TP-BaseNet", "GocNet"],
                         "params": [10, 10, 12],
                         "test_acc": [0.8, 0.95, 0.9]})


class TestJsonLines:
    """metrics.jsonl"""

    def test_append_and_read(self, exporter):
        exporter.append_jsonl("m.jsonl", {"epoch": 1, "lr": 0.0005})
        exporter.append_jsonl("m.jsonl", {"epoch": 2, "lr": 0.00025})
        assert exporter.read_jsonl("m.jsonl") == [{"epoch": 1, "lr": 0.0005}, {"epoch": 2, "lr": 0.00025}]
        lines = exporter.path("m.jsonl").read_text(encoding="utf-8").splitlines()
        assert json.loads(lines[1]) == {"epoch": 2, "lr": 0.00025}

    def test_missing_file_is_empty(self, exporter):
        assert exporter.read_jsonl("absent.jsonl") == []

    def test_truncate(self, exporter):
        for epoch in range(1, 5):
            exporter.append_jsonl("m.jsonl", {"epoch": epoch})
        assert exporter.truncate_jsonl("m.jsonl", lambda r: r["epoch"] <= 2) == 2
        assert [r["epoch"] for r in exporter.read_jsonl("m.jsonl")] == [1, 2]


class TestScores:
    """CSV score,label"""

    def test_export_then_read(self, exporter):
        scores = ScoreSet(np.array([0.25, 0.75, 0.125]), np.array([0, 1, 1]))
        data = ExportManager.read_scores(exporter.export_scores(scores))
        np.testing.assert_array_equal(data.scores, scores.scores)
        np.testing.assert_array_equal(data.labels, scores.labels)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="не найден"):
            ExportManager.read_scores(tmp_path / "absent.csv")

    def test_wrong_columns(self, tmp_path):
        (tmp_path / "s.csv").write_text("prob,y\n0.1,0\n", encoding="utf-8")
        with pytest.raises(DataError, match="score,label"):
            ExportManager.read_scores(tmp_path / "s.csv")

    def test_bad_label(self, tmp_path):
        (tmp_path / "s.csv").write_text("score,label\n0.1,3\n", encoding="utf-8")
        with pytest.raises(DataError):
            ExportManager.read_scores(tmp_path / "s.csv")


class TestReports:
    """Отчёт оценки и ROC"""

    def test_eval_report(self, exporter):
        report = evaluate(ScoreSet(np.array([0.9, 0.2, 0.6, 0.4]), np.array([1, 0, 0, 1])))
        data = json.loads(exporter.export_eval_report(report).read_text(encoding="utf-8"))
        assert data["auc"] == report.auc
        assert len(data["roc"]) == len(report.roc)

    def test_roc_svg(self, exporter):
        report = evaluate(ScoreSet(np.array([0.9, 0.2, 0.6, 0.4]), np.array([1, 0, 0, 1])))
        text = exporter.export_roc_svg(report).read_text(encoding="utf-8")
        assert text.lstrip().startswith("<?xml") and "<svg" in text

    def test_core_imports_without_matplotlib(self, tmp_path, monkeypatch):
        """Обучение и CLI импортируются без matplotlib, ROC сообщает об отсутствии"""
        for name in ("matplotlib", "matplotlib.pyplot"):
            monkeypatch.setitem(sys.modules, name, None)
        for name in ("export_manager", "trainer", "ablation", "cli"):
            monkeypatch.delitem(sys.modules, name, raising=False)
        importlib.import_module("trainer")
        importlib.import_module("cli")
        fresh = importlib.import_module("export_manager")
        report = evaluate(ScoreSet(np.array([0.9, 0.2, 0.6, 0.4]), np.array([1, 0, 0, 1])))
        with pytest.raises(UsageError, match="matplotlib"):
            fresh.ExportManager(tmp_path / "out").export_roc_svg(report)


class TestTables:
    """Таблицы абляции"""

    def test_export_table_files(self, exporter, table):
        paths = exporter.export_table(table, "ablation_single")
        assert pd.read_csv(paths["csv"])["model"].tolist() == ["BaseNet", "TP-BaseNet", "GocNet"]
        assert json.loads(paths["json"].read_text(encoding="utf-8"))[2]["params"] == 12

    def test_excel_highlights_best_row(self, exporter, table):
        ws = load_workbook(exporter.export_table(table, "t")["xlsx"]).active
        assert [c.value for c in ws[1]] == ["model", "params", "test_acc"]
        fills = {row: ws.cell(row=row, column=1).fill.start_color.rgb for row in (2, 3, 4)}
        assert fills[3].endswith(ExportManager.EXCEL_COLORS["best"])
        assert not fills[2].endswith(ExportManager.EXCEL_COLORS["best"])

    def test_excel_all_nan_column(self, exporter, table):
        table["test_acc"] = float("nan")
        assert exporter.export_table(table, "t")["xlsx"].exists()

    def test_markdown(self, table):
        lines = ExportManager.markdown_table(table).splitlines()
        assert lines[0] == "| model | params | test_acc |"
        assert lines[1] == "|---|---|---|"
        assert lines[3] == "| TP-BaseNet | 10 | 0.9500 |"
