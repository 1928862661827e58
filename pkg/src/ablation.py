# -*- coding: utf-8 -*-
"""
Абляционные исследования: обучение набора вариантов сети на одном манифесте
и сводная таблица ACC / AUC / EER
"""

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Union

import pandas as pd

from errors import ConfigError
from export_manager import ExportManager
from models import AugmentConfig, DatasetManifest, KernelName, ModelSpec, TPConfig, TrainConfig, Variant
from network import VARIANT_STREAMS
from trainer import Trainer

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AblationRow:
    label: str
    variant: Variant
    operator: Optional[KernelName] = None


STUDIES: Dict[str, List[AblationRow]] = {
    # двухпотоковая архитектура: ни одного модуля / TP / MTA / оба
    "dual": [
        AblationRow("dual", Variant.DUAL_PLAIN),
        AblationRow("dual+TP", Variant.DUAL_TP),
        AblationRow("dual+MTA", Variant.DUAL_MTA),
        AblationRow("GocNet", Variant.GOCNET_DUAL),
    ],
    "single": [
        AblationRow("BaseNet", Variant.BASENET),
        AblationRow("TP-BaseNet", Variant.TP_BASENET),
        AblationRow("BaseNet-MTA", Variant.BASENET_MTA),
        AblationRow("GocNet-single", Variant.GOCNET_SINGLE),
    ],
    "attention": [
        AblationRow("BaseNet", Variant.BASENET),
        AblationRow("BaseNet-MTA-Conv", Variant.BASENET_MTA_CONV),
        AblationRow("BaseNet-MTA", Variant.BASENET_MTA),
    ],
    "operators": [AblationRow("BaseNet", Variant.BASENET)] + [
        AblationRow(f"TP-BaseNet-{op.value}", Variant.TP_BASENET, op) for op in KernelName
    ],
}


def row_spec(base: ModelSpec, row: AblationRow) -> ModelSpec:
    tp = base.tp if row.operator is None else replace(base.tp, operator=row.operator)
    return replace(base, variant=row.variant, tp=tp)


def run_ablation(study: str, base_spec: ModelSpec, config: TrainConfig, manifest: DatasetManifest,
                 output_dir: Union[str, Path], augment_config: Optional[AugmentConfig] = None) -> pd.DataFrame:
    """
    Обучает каждую строку исследования в output_dir/<label>/ и пишет
    ablation_<study>.{csv,json,xlsx} в output_dir.
    """
    if study not in STUDIES:
        raise ConfigError(f"Неизвестное исследование '{study}'. Допустимые: {', '.join(STUDIES)}")
    exporter = ExportManager(output_dir)
    rows = []
    for row in STUDIES[study]:
        spec = row_spec(base_spec, row)
        logger.info(f"Абляция {study}: {row.label} ({spec.variant.value})")
        trainer = Trainer(spec, config, manifest, exporter.path(row.label), augment_config)
        result = trainer.run()
        last = result.metrics[-1]
        rows.append({
            "model": row.label,
            "variant": spec.variant.value,
            "streams": " | ".join(layout.label for layout in VARIANT_STREAMS[spec.variant]),
            "operator": spec.tp.operator.value,
            "params": trainer.store.count("param"),
            "train_loss": last["train_loss"],
            "test_acc": last.get("test_acc", float("nan")),
            "test_auc": last.get("test_auc", float("nan")),
            "test_eer": last.get("test_eer", float("nan")),
        })

    df = pd.DataFrame(rows)
    exporter.export_table(df, f"ablation_{study}")
    logger.info("\n" + exporter.markdown_table(df))
    return df
