# -*- coding: utf-8 -*-
"""
Командная строка: synth, preprocess, train, eval, inspect, ablation

Коды выхода: 0 - успех, 1 - ошибка выполнения, 2 - ошибка конфигурации.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from ablation import STUDIES, run_ablation
from checkpoint import load_checkpoint, restore_into
from config import LOG_LEVEL, SUPPORTED_IMAGE_EXTENSIONS, load_run_config
from data_loader import DataLoader, decode_image, load_manifest
from errors import ConfigError, DataError, GocNetError
from evalmetrics import evaluate
from export_manager import ExportManager
from gradop import trace_image
from models import KernelName, Split, parse_enum
from network import build
from synth import synth_generate
from trainer import evaluate_model, train_run

logger = logging.getLogger(__name__)


def _overrides(args, mapping) -> List[str]:
    """--set плюс явные флаги (флаги побеждают)"""
    result = list(args.set or [])
    for attr, target in mapping.items():
        value = getattr(args, attr, None)
        if value is not None:
            result.append(f"{target}={value}")
    return result


def _run_config(args, mapping):
    return load_run_config(args.config, _overrides(args, mapping))


# =============================================================================
# Команды
# =============================================================================

def cmd_synth(args) -> int:
    rc = _run_config(args, {"kind": "synth.kind", "count": "synth.count", "seed": "run.seed",
                            "image_size": "synth.image_size", "out": "synth.output_dir"})
    out_dir = rc.synth_output_dir()
    manifest = synth_generate(rc.synth_config(), out_dir)
    rc.write_resolved(out_dir)
    print(f"[OK] {len(manifest.records)} изображений, манифест: {out_dir / 'manifest.csv'}")
    return 0


def _iter_images(input_dir: Path) -> List[Path]:
    return sorted(p for p in input_dir.rglob("*") if p.is_file() and p.suffix.lower() in SUPPORTED_IMAGE_EXTENSIONS)


def cmd_preprocess(args) -> int:
    input_dir = Path(args.input)
    if not input_dir.is_dir():
        raise ConfigError(f"Каталог не найден: {input_dir}")
    if args.operator == "all":
        operators = list(KernelName)
    else:
        operators = [parse_enum(KernelName, args.operator, "оператора")]
    out_dir = Path(args.out)

    images = _iter_images(input_dir)
    if not images:
        raise DataError(f"В {input_dir} нет изображений ({', '.join(SUPPORTED_IMAGE_EXTENSIONS)})")

    written, failed = 0, 0
    for path in images:
        try:
            rgb = decode_image(path).transpose(1, 2, 0)
        except DataError as e:
            logger.warning(f"[!] Пропуск: {e}")
            failed += 1
            continue
        relative = path.relative_to(input_dir)
        for operator in operators:
            suffix = f"_{operator.value}" if len(operators) > 1 else ""
            target = out_dir / relative.parent / f"{relative.stem}{suffix}.png"
            target.parent.mkdir(parents=True, exist_ok=True)
            trace_image(rgb, operator).save(target)
            written += 1

    if failed == len(images):
        logger.error("[!] Ни одно изображение не обработано")
        return 1
    print(f"[OK] Сохранено {written} изображений следов в {out_dir} (пропущено {failed})")
    return 0


_TRAIN_FLAGS = {"manifest": "data.manifest", "variant": "model.variant", "epochs": "train.epochs",
                "seed": "run.seed", "out": "run.output_dir"}


def cmd_train(args) -> int:
    rc = _run_config(args, _TRAIN_FLAGS)
    manifest_path = rc.manifest_path()
    if manifest_path is None:
        raise ConfigError("Не задан манифест: data.manifest или --manifest")
    manifest = load_manifest(manifest_path)
    out_dir = rc.output_dir()
    rc.write_resolved(out_dir)

    result = train_run(rc.model_spec(), rc.train_config(), manifest, out_dir,
                       rc.augment_config(), resume_from=args.resume)
    if result.report is not None:
        ExportManager(out_dir).export_eval_report(result.report)
    print(f"[OK] Обучение завершено: {result.steps} шагов, контрольная точка {result.checkpoint}")
    return 0


def cmd_eval(args) -> int:
    rc = _run_config(args, {"manifest": "data.manifest"})
    exporter = ExportManager(args.out)
    if args.scores:
        scores = ExportManager.read_scores(args.scores)
        report = evaluate(scores)
    else:
        if not args.checkpoint or rc.manifest_path() is None:
            raise ConfigError("eval: укажите --scores или --checkpoint вместе с --manifest")
        checkpoint = load_checkpoint(args.checkpoint)
        model, store = build(checkpoint.spec)
        restore_into(store, checkpoint, with_moments=False)
        loader = DataLoader(load_manifest(rc.manifest_path()), checkpoint.spec.backbone.image_size,
                            rc.get("train", "batch_size"), rc.augment_config(), rc.seed)
        report = evaluate_model(model, loader, parse_enum(Split, args.split, "выборки"))

    exporter.export_eval_report(report)
    if args.roc:
        exporter.export_roc_svg(report)
    print(json.dumps({"acc": report.acc, "auc": report.auc, "eer": report.eer}, ensure_ascii=False))
    return 0


def cmd_inspect(args) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    model, store = build(checkpoint.spec)
    reference = store.snapshot(kind="fixed")
    restore_into(store, checkpoint, with_moments=False)
    rows = model.ledger()
    for row in rows:
        if row["kind"] == "fixed":
            row["matches_registry"] = bool(np.array_equal(store[row["name"]].data, reference[row["name"]]))
    totals = model.group_totals("param")

    if args.json:
        print(json.dumps({"spec": checkpoint.spec.to_dict(), "epoch": checkpoint.epoch, "step": checkpoint.step,
                          "entries": rows, "totals": totals, "total": sum(totals.values())},
                         ensure_ascii=False, indent=2))
        return 0

    print(f"Вариант: {checkpoint.spec.variant.value}, эпоха {checkpoint.epoch}, шаг {checkpoint.step}")
    for row in rows:
        shape = "x".join(str(d) for d in row["shape"])
        mark = ""
        if row["kind"] == "fixed":
            mark = "  (реестр: совпадает)" if row["matches_registry"] else "  (реестр: ОТЛИЧАЕТСЯ)"
        print(f"  {row['name']:<50} {row['kind']:<7} {shape:>14} {row['count']:>10}{mark}")
    for group, count in totals.items():
        print(f"Итого {group}: {count}")
    print(f"Всего обучаемых параметров: {sum(totals.values())}")
    return 0


def cmd_ablation(args) -> int:
    rc = _run_config(args, {"manifest": "data.manifest", "epochs": "train.epochs",
                            "seed": "run.seed", "out": "run.output_dir"})
    if rc.manifest_path() is None:
        raise ConfigError("Не задан манифест: data.manifest или --manifest")
    out_dir = rc.output_dir()
    rc.write_resolved(out_dir)
    df = run_ablation(args.study, rc.model_spec(), rc.train_config(), load_manifest(rc.manifest_path()),
                      out_dir, rc.augment_config())
    print(ExportManager.markdown_table(df))
    return 0


# =============================================================================
# Разбор аргументов
# =============================================================================

def _add_config_args(parser: argparse.ArgumentParser):
    parser.add_argument("-c", "--config", help="конфигурационный файл (INI)")
    parser.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="переопределение значения конфигурации (можно повторять)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gocnet", description="Обнаружение подделок лиц градиентными операторами")
    parser.add_argument("-v", "--verbose", action="store_true", help="подробный журнал (DEBUG)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="синтетический набор подделок")
    _add_config_args(p)
    p.add_argument("--kind", help="blend-patch | periodic-fingerprint | mixed")
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--image-size", dest="image_size", type=int)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("preprocess", help="изображения следов градиентного оператора")
    p.add_argument("input", help="каталог с изображениями")
    p.add_argument("--operator", default=KernelName.PREWITT_D.value, help="имя оператора или all")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_preprocess)

    p = sub.add_parser("train", help="обучение сети")
    _add_config_args(p)
    p.add_argument("--manifest")
    p.add_argument("--variant")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--resume", help="контрольная точка для продолжения")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", help="оценка: файл оценок или контрольная точка + манифест")
    _add_config_args(p)
    p.add_argument("--scores", help="CSV score,label")
    p.add_argument("--checkpoint")
    p.add_argument("--manifest")
    p.add_argument("--split", default="test")
    p.add_argument("--out", default=".")
    p.add_argument("--roc", action="store_true", help="сохранить ROC в roc.svg")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("inspect", help="реестр параметров контрольной точки")
    p.add_argument("checkpoint")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=cmd_inspect)

    p = sub.add_parser("ablation", help="абляционное исследование")
    _add_config_args(p)
    p.add_argument("--study", default="dual", help=", ".join(STUDIES))
    p.add_argument("--manifest")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_ablation)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else LOG_LEVEL,
                        format="[%(levelname)s] %(name)s: %(message)s")
    try:
        return args.handler(args)
    except ConfigError as e:
        logger.error(f"[!] Ошибка конфигурации: {e}")
        return 2
    except (GocNetError, OSError, ValueError) as e:
        logger.error(f"[!] {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
