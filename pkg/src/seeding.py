# -*- coding: utf-8 -*-
"""
Именованные потоки случайных чисел.
Вся случайность выводится из одного seed: init, data, augment, shuffle, synth.
"""

import zlib

import numpy as np

STREAMS = ("init", "data", "augment", "shuffle", "synth")


def stream_key(name: str) -> int:
    """Стабильный (не зависящий от PYTHONHASHSEED) ключ потока"""
    return zlib.crc32(name.encode("utf-8"))


def make_rng(seed: int, stream: str, *extra: int) -> np.random.Generator:
    """Генератор для потока `stream`; extra: например, номер эпохи"""
    if stream not in STREAMS:
        raise ValueError(f"Неизвестный поток случайных чисел: {stream}")
    entropy = [int(seed), stream_key(stream), *[int(e) for e in extra]]
    return np.random.default_rng(np.random.SeedSequence(entropy))
