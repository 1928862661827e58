#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Запуск системы обнаружения подделок лиц GocNet
"""

import sys
from pathlib import Path

# Добавляем путь к src
sys.path.insert(0, str(Path(__file__).parent / 'src'))


def banner():
    print("=" * 70)
    print("   ОБНАРУЖЕНИЕ ПОДДЕЛОК ЛИЦ ГРАДИЕНТНЫМИ ОПЕРАТОРАМИ")
    print("   GocNet v1.0")
    print("=" * 70)
    print()
    print("Команды:")
    print("  synth       - синтетический набор подделок (blend-patch, periodic-fingerprint, mixed)")
    print("  preprocess  - изображения следов градиентного оператора")
    print("  train       - обучение сети (Adam, затухание LR по эпохам)")
    print("  eval        - ACC, AUC, EER и ROC")
    print("  inspect     - реестр параметров контрольной точки")
    print("  ablation    - абляционное исследование (dual, single, attention, operators)")
    print()
    print("Пример: python run.py train -c configs/gocnet_dual.cfg")
    print("-" * 70)


def main():
    """Главная функция запуска"""
    if len(sys.argv) < 2:
        banner()
        return 0

    # Проверка зависимостей
    try:
        import numpy  # noqa: F401
        import pandas  # noqa: F401
        from PIL import Image  # noqa: F401
    except ImportError as e:
        print(f"[!] Не установлена зависимость: {e.name}. Выполните: pip install -r requirements.txt")
        return 1

    from cli import main as cli_main
    return cli_main(sys.argv[1:])


if __name__ == '__main__':
    sys.exit(main())
