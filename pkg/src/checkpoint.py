# -*- coding: utf-8 -*-
"""
Модуль для сохранения и загрузки контрольных точек обучения

Формат файла (little-endian):
    b"GOCK" | u32 версия | u32 длина JSON | JSON метаданных
    | u32 число тензоров | тензоры
Тензор: u32 длина имени | имя (utf-8) | u8 тип (0 = float32, 1 = float64)
    | u32 ранг | u32 x ранг размеры | данные.
Моменты Adam хранятся как тензоры "adam.m/<имя>" и "adam.v/<имя>".
"""

import json
import logging
import os
import struct
from collections import OrderedDict
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, BinaryIO, Dict, Union

import numpy as np

from errors import DataError, ShapeError
from models import ModelSpec
from tensor_core import ParamStore

logger = logging.getLogger(__name__)

MAGIC = b"GOCK"
VERSION = 1
DTYPE_TAGS = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
FIRST_MOMENT = "adam.m/"
SECOND_MOMENT = "adam.v/"


@dataclass
class Checkpoint:
    """Содержимое контрольной точки"""
    spec: ModelSpec
    epoch: int
    step: int
    tensors: "OrderedDict[str, np.ndarray]"
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def parameters(self) -> Dict[str, np.ndarray]:
        return {k: v for k, v in self.tensors.items()
                if not k.startswith((FIRST_MOMENT, SECOND_MOMENT))}


@contextmanager
def _atomic_writer(path: Path):
    """Запись во временный файл и замена целевого: старая точка остаётся целой при сбое"""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    handle = open(tmp, "wb")
    try:
        yield handle
        handle.close()
        os.replace(tmp, path)
    finally:
        if not handle.closed:
            handle.close()
        if tmp.exists():
            tmp.unlink()


def _dtype_tag(array: np.ndarray) -> int:
    for tag, dtype in DTYPE_TAGS.items():
        if array.dtype == dtype or array.dtype == dtype.newbyteorder("="):
            return tag
    raise DataError(f"Неподдерживаемый тип тензора в контрольной точке: {array.dtype}")


def _write_tensor(handle: BinaryIO, name: str, array: np.ndarray):
    tag = _dtype_tag(array)
    encoded = name.encode("utf-8")
    handle.write(struct.pack("<I", len(encoded)))
    handle.write(encoded)
    handle.write(struct.pack("<BI", tag, array.ndim))
    handle.write(struct.pack(f"<{array.ndim}I", *array.shape))
    handle.write(np.ascontiguousarray(array, dtype=DTYPE_TAGS[tag]).tobytes())


def save_checkpoint(path: Union[str, Path], store: ParamStore, spec: ModelSpec, epoch: int, step: int,
                    metadata: Dict[str, Any] = None):
    """Параметры, буферы, фиксированные ядра и моменты Adam"""
    path = Path(path)
    tensors: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for name, entry in store.items():
        tensors[name] = entry.tensor.data
    for name in store.first_moment:
        tensors[FIRST_MOMENT + name] = store.first_moment[name]
        tensors[SECOND_MOMENT + name] = store.second_moment[name]

    header = {"spec": spec.to_dict(), "epoch": epoch, "step": step}
    header.update(metadata or {})
    blob = json.dumps(header, sort_keys=True, ensure_ascii=False).encode("utf-8")

    with _atomic_writer(path) as handle:
        handle.write(MAGIC)
        handle.write(struct.pack("<II", VERSION, len(blob)))
        handle.write(blob)
        handle.write(struct.pack("<I", len(tensors)))
        for name, array in tensors.items():
            _write_tensor(handle, name, array)
    logger.debug(f"Контрольная точка сохранена: {path} (эпоха {epoch}, шаг {step})")


def _read_exact(handle: BinaryIO, size: int, path: Path) -> bytes:
    data = handle.read(size)
    if len(data) != size:
        raise DataError(f"Контрольная точка {path} обрезана")
    return data


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise DataError(f"Контрольная точка не найдена: {path}")
    with open(path, "rb") as handle:
        if _read_exact(handle, 4, path) != MAGIC:
            raise DataError(f"{path}: не является контрольной точкой (нет сигнатуры GOCK)")
        version, blob_size = struct.unpack("<II", _read_exact(handle, 8, path))
        if version != VERSION:
            raise DataError(f"{path}: версия формата {version} не поддерживается (ожидалась {VERSION})")
        header = json.loads(_read_exact(handle, blob_size, path).decode("utf-8"))
        (count,) = struct.unpack("<I", _read_exact(handle, 4, path))

        tensors: "OrderedDict[str, np.ndarray]" = OrderedDict()
        for _ in range(count):
            (name_size,) = struct.unpack("<I", _read_exact(handle, 4, path))
            name = _read_exact(handle, name_size, path).decode("utf-8")
            tag, rank = struct.unpack("<BI", _read_exact(handle, 5, path))
            if tag not in DTYPE_TAGS:
                raise DataError(f"{path}: неизвестный тип тензора {tag} у '{name}'")
            shape = struct.unpack(f"<{rank}I", _read_exact(handle, 4 * rank, path))
            dtype = DTYPE_TAGS[tag]
            payload = _read_exact(handle, int(np.prod(shape)) * dtype.itemsize, path)
            tensors[name] = np.frombuffer(payload, dtype=dtype).reshape(shape).astype(dtype.newbyteorder("="))

    spec = ModelSpec.from_dict(header.pop("spec"))
    epoch = int(header.pop("epoch"))
    step = int(header.pop("step"))
    return Checkpoint(spec, epoch, step, tensors, header)


def restore_into(store: ParamStore, checkpoint: Checkpoint, with_moments: bool = True):
    """Копирование значений в существующее хранилище (на месте, с проверкой форм)"""
    parameters = checkpoint.parameters
    missing = [name for name in store if name not in parameters]
    if missing:
        raise DataError(f"В контрольной точке нет параметров: {', '.join(missing[:5])}")
    for name in store:
        target = store[name].data
        value = parameters[name]
        if value.shape != target.shape:
            raise ShapeError(f"{name}: форма в контрольной точке {value.shape}, в сети {target.shape}")
        target[...] = value

    store.first_moment.clear()
    store.second_moment.clear()
    if with_moments:
        for key, value in checkpoint.tensors.items():
            if key.startswith(FIRST_MOMENT):
                name = key[len(FIRST_MOMENT):]
                store.first_moment[name] = value.astype(store[name].data.dtype)
                store.second_moment[name] = checkpoint.tensors[SECOND_MOMENT + name].astype(store[name].data.dtype)
