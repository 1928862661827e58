# -*- coding: utf-8 -*-
"""
Модуль экспорта результатов
JSON-отчёты, журнал метрик (JSON Lines), CSV оценок, ROC в SVG,
таблицы абляции в CSV / JSON / Excel / Markdown
"""

import json
import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Union

import numpy as np
import pandas as pd
from openpyxl import Workbook
from openpyxl.styles import Alignment, Border, Font, PatternFill, Side
from openpyxl.utils import get_column_letter

from errors import DataError, UsageError
from models import EvalReport, ScoreSet

logger = logging.getLogger(__name__)


class ExportManager:
    """Запись артефактов запуска в каталог output_dir"""

    # Подсветка строк таблицы абляции
    EXCEL_COLORS = {
        "header": "4472C4",
        "best": "00C851",
    }

    def __init__(self, output_dir: Union[str, Path]):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def path(self, filename: str) -> Path:
        return self.output_dir / filename

    # -------------------------------------------------------------------------
    # JSON
    # -------------------------------------------------------------------------

    def write_json(self, filename: str, data: Any) -> Path:
        filepath = self.path(filename)
        with open(filepath, "w", encoding="utf-8") as f:
            json.dump(data, f, ensure_ascii=False, indent=2)
            f.write("\n")
        return filepath

    def append_jsonl(self, filename: str, record: Dict[str, Any]) -> Path:
        """Одна строка JSON на запись, без отметок времени"""
        filepath = self.path(filename)
        with open(filepath, "a", encoding="utf-8") as f:
            f.write(json.dumps(record, ensure_ascii=False) + "\n")
        return filepath

    def read_jsonl(self, filename: str) -> List[Dict[str, Any]]:
        filepath = self.path(filename)
        if not filepath.exists():
            return []
        with open(filepath, encoding="utf-8") as f:
            return [json.loads(line) for line in f if line.strip()]

    def truncate_jsonl(self, filename: str, keep: Callable[[Dict[str, Any]], bool]) -> int:
        """Оставить в журнале только записи, удовлетворяющие keep (для продолжения обучения)"""
        records = [r for r in self.read_jsonl(filename) if keep(r)]
        filepath = self.path(filename)
        with open(filepath, "w", encoding="utf-8") as f:
            for record in records:
                f.write(json.dumps(record, ensure_ascii=False) + "\n")
        return len(records)

    def export_eval_report(self, report: EvalReport, filename: str = "eval_report.json") -> Path:
        filepath = self.write_json(filename, report.to_dict())
        logger.info(f"[OK] Отчёт оценки: {filepath}")
        return filepath

    # -------------------------------------------------------------------------
    # Оценки
    # -------------------------------------------------------------------------

    def export_scores(self, scores: ScoreSet, filename: str = "scores.csv") -> Path:
        filepath = self.path(filename)
        pd.DataFrame({"score": scores.scores, "label": scores.labels}).to_csv(
            filepath, index=False, lineterminator="\n", float_format="%.9g")
        return filepath

    @staticmethod
    def read_scores(path: Union[str, Path]) -> ScoreSet:
        """CSV с колонками score,label"""
        path = Path(path)
        if not path.exists():
            raise DataError(f"Файл оценок не найден: {path}")
        try:
            df = pd.read_csv(path)
        except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise DataError(f"Не удалось прочитать файл оценок {path}: {e}")
        if list(df.columns) != ["score", "label"]:
            raise DataError(f"{path}: ожидались колонки score,label, получено {','.join(map(str, df.columns))}")
        try:
            return ScoreSet(df["score"].to_numpy(dtype=float), df["label"].to_numpy())
        except (ValueError, TypeError) as e:
            raise DataError(f"{path}: {e}")

    def export_roc_svg(self, report: EvalReport, filename: str = "roc.svg", title: str = "ROC") -> Path:
        """ROC в координатах (FAR, 1 - FRR) с отмеченной точкой EER"""
        try:
            import matplotlib
            matplotlib.use("Agg")
            import matplotlib.pyplot as plt
        except ImportError:
            raise UsageError("ROC требует matplotlib: pip install -r requirements.txt")
        far = [p[1] for p in report.roc]
        tpr = [1.0 - p[2] for p in report.roc]
        fig, ax = plt.subplots(figsize=(5, 5))
        ax.plot(far, tpr, color="#4472C4", linewidth=1.5, label=f"AUC = {report.auc:.4f}")
        ax.plot([0, 1], [0, 1], color="#999999", linestyle="--", linewidth=0.8)
        ax.scatter([report.eer], [1.0 - report.eer], color="#FF4444", zorder=3, label=f"EER = {report.eer:.4f}")
        ax.set_xlabel("FAR")
        ax.set_ylabel("1 - FRR")
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1)
        ax.set_title(title)
        ax.legend(loc="lower right")
        filepath = self.path(filename)
        fig.savefig(filepath, format="svg", metadata={"Date": None})
        plt.close(fig)
        return filepath

    # -------------------------------------------------------------------------
    # Таблицы абляции
    # -------------------------------------------------------------------------

    def export_table(self, df: pd.DataFrame, stem: str, best_column: str = "test_acc") -> Dict[str, Path]:
        """CSV, JSON и Excel; в Excel лучшая строка по best_column подсвечена"""
        paths = {
            "csv": self.path(f"{stem}.csv"),
            "json": self.path(f"{stem}.json"),
            "xlsx": self.path(f"{stem}.xlsx"),
        }
        df.to_csv(paths["csv"], index=False, lineterminator="\n")
        self.write_json(paths["json"].name, df.to_dict(orient="records"))
        self._export_table_excel(df, paths["xlsx"], best_column)
        logger.info(f"[OK] Таблица {stem}: {', '.join(str(p) for p in paths.values())}")
        return paths

    def _export_table_excel(self, df: pd.DataFrame, filepath: Path, best_column: str):
        wb = Workbook()
        ws = wb.active
        ws.title = "Абляция"

        header_font = Font(bold=True, color="FFFFFF")
        header_fill = PatternFill(start_color=self.EXCEL_COLORS["header"],
                                  end_color=self.EXCEL_COLORS["header"], fill_type="solid")
        best_fill = PatternFill(start_color=self.EXCEL_COLORS["best"],
                                end_color=self.EXCEL_COLORS["best"], fill_type="solid")
        border = Border(
            left=Side(style='thin'),
            right=Side(style='thin'),
            top=Side(style='thin'),
            bottom=Side(style='thin')
        )

        for col, header in enumerate(df.columns, 1):
            cell = ws.cell(row=1, column=col, value=str(header))
            cell.font = header_font
            cell.fill = header_fill
            cell.alignment = Alignment(horizontal='center', vertical='center')
            cell.border = border

        best_row = None
        if best_column in df.columns and len(df):
            values = df[best_column].astype(float).to_numpy()
            if np.isfinite(values).any():
                best_row = int(np.nanargmax(values))

        for i, values in enumerate(df.itertuples(index=False, name=None)):
            for col, value in enumerate(values, 1):
                cell = ws.cell(row=i + 2, column=col, value=value.item() if hasattr(value, "item") else value)
                cell.border = border
                if isinstance(value, float):
                    cell.number_format = "0.0000"
                if i == best_row:
                    cell.fill = best_fill

        for col in range(1, len(df.columns) + 1):
            ws.column_dimensions[get_column_letter(col)].width = 18
        ws.freeze_panes = "A2"
        wb.save(filepath)

    @staticmethod
    def markdown_table(df: pd.DataFrame) -> str:
        def fmt(value):
            return f"{value:.4f}" if isinstance(value, float) else str(value)

        lines = ["| " + " | ".join(map(str, df.columns)) + " |",
                 "|" + "|".join("---" for _ in df.columns) + "|"]
        for values in df.itertuples(index=False, name=None):
            lines.append("| " + " | ".join(fmt(v) for v in values) + " |")
        return "\n".join(lines)
