# -*- coding: utf-8 -*-
"""
Исключения системы обнаружения подделок лиц
"""


class GocNetError(Exception):
    """Базовая ошибка проекта"""


class ShapeError(GocNetError, ValueError):
    """Несовпадение размерностей тензоров"""


class NumericError(GocNetError, ArithmeticError):
    """NaN/Inf в вычислениях"""


class ConfigError(GocNetError, ValueError):
    """Неверная конфигурация (код выхода 2)"""


class DataError(GocNetError, ValueError):
    """Ошибка входных данных: манифест, изображения, метки"""


class UsageError(GocNetError, RuntimeError):
    """Неверное использование API"""
