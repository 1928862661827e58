# -*- coding: utf-8 -*-
"""
Модуль загрузки данных: манифест набора, декодирование изображений,
аугментации и формирование батчей
"""

import logging
import re
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from PIL import Image, UnidentifiedImageError
from tqdm import tqdm

from config import MANIFEST_COLUMNS, SUPPORTED_IMAGE_EXTENSIONS
from errors import DataError
from models import AugmentConfig, DatasetManifest, ManifestRecord, Split, parse_enum
from seeding import make_rng
from tensor_core import Tensor

logger = logging.getLogger(__name__)


# =============================================================================
# Манифест
# =============================================================================

def load_manifest(path: Union[str, Path], check_files: bool = True) -> DatasetManifest:
    """
    Загрузка манифеста: CSV с заголовком path,label,split.
    Строки нумеруются с 1 после заголовка, пустые строки учитываются в нумерации
    и пропускаются; порядок записей = порядок в файле.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"Манифест не найден: {path}")

    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, skip_blank_lines=False)
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        where = f"строка {int(match.group(1)) - 1}: " if match else ""
        raise DataError(f"{path}: {where}неверное число колонок (ожидалось 3): {e}")
    except pd.errors.EmptyDataError:
        raise DataError(f"{path}: пустой манифест")

    columns = [str(c).strip().lower() for c in df.columns]
    if columns != list(MANIFEST_COLUMNS):
        raise DataError(f"{path}: заголовок должен быть {','.join(MANIFEST_COLUMNS)}, получено {','.join(columns)}")

    df.columns = list(MANIFEST_COLUMNS)
    df = df.fillna("").astype(str)
    for column in MANIFEST_COLUMNS:
        df[column] = df[column].str.strip()
    df.index = pd.RangeIndex(1, len(df) + 1)
    df = df[(df != "").any(axis=1)]

    missing = (df == "").any(axis=1)
    bad_label = ~df["label"].isin(("0", "1"))
    bad_split = ~df["split"].isin(tuple(s.value for s in Split))
    broken = missing | bad_label | bad_split
    if broken.any():
        line = int(broken.idxmax())
        row = df.loc[line]
        if missing[line]:
            raise DataError(f"{path}: строка {line}: неверное число колонок (ожидалось 3)")
        if bad_label[line]:
            raise DataError(f"{path}: строка {line}: метка '{row['label']}' не бинарная (0 = real, 1 = fake)")
        raise DataError(f"{path}: строка {line}: неизвестная выборка '{row['split']}' (train, test)")

    root = path.parent
    if check_files:
        present = {p: (root / p).exists() for p in df["path"].unique()}
        absent = ~df["path"].map(present).astype(bool)
        if absent.any():
            line = int(absent.idxmax())
            raise DataError(f"{path}: строка {line}: файл не найден: {df.at[line, 'path']}")

    splits = {s.value: s for s in Split}
    records = [ManifestRecord(p, int(label), splits[split])
               for p, label, split in zip(df["path"], df["label"], df["split"])]

    logger.info(f"[OK] Манифест {path.name}: {len(records)} записей")
    return DatasetManifest(records, root)


def save_manifest(manifest: DatasetManifest, path: Union[str, Path]):
    df = pd.DataFrame(
        [(r.path, r.label, r.split.value) for r in manifest.records],
        columns=list(MANIFEST_COLUMNS),
    )
    df.to_csv(path, index=False, lineterminator="\n")


# =============================================================================
# Изображения
# =============================================================================

def bilinear_resize(image: np.ndarray, height: int, width: int) -> np.ndarray:
    """
    Билинейное масштабирование (центры пикселей со сдвигом 0.5, края зажаты).
    image: (..., H, W). Размер без изменений -> тот же массив.
    """
    in_h, in_w = image.shape[-2:]
    if (in_h, in_w) == (height, width):
        return image

    def axis(in_size, out_size):
        src = (np.arange(out_size) + 0.5) * (in_size / out_size) - 0.5
        src = np.clip(src, 0, in_size - 1)
        lo = np.floor(src).astype(np.int64)
        hi = np.minimum(lo + 1, in_size - 1)
        return lo, hi, src - lo

    r0, r1, wr = axis(in_h, height)
    c0, c1, wc = axis(in_w, width)
    top = image[..., r0, :]
    bottom = image[..., r1, :]
    rows = top + wr[:, None] * (bottom - top)
    left = rows[..., c0]
    right = rows[..., c1]
    return left + wc * (right - left)


def decode_image(path: Union[str, Path]) -> np.ndarray:
    """Изображение -> (3, H, W) float64 в [0, 1], порядок каналов RGB"""
    path = Path(path)
    if path.suffix.lower() not in SUPPORTED_IMAGE_EXTENSIONS:
        raise DataError(f"Неподдерживаемый формат файла: {path}")
    try:
        with Image.open(path) as img:
            pixels = np.asarray(img.convert("RGB"), dtype=np.float64)
    except (OSError, UnidentifiedImageError) as e:
        raise DataError(f"Не удалось прочитать изображение {path}: {e}")
    return pixels.transpose(2, 0, 1) / 255.0


def decode_and_resize(path: Union[str, Path], target: Tuple[int, int]) -> Tensor:
    """Изображение -> тензор (1, 3, H, W) в [0, 1]"""
    chw = bilinear_resize(decode_image(path), *target)
    return Tensor(chw[None])


# =============================================================================
# Аугментации
# =============================================================================

def _perspective_coeffs(start: np.ndarray, end: np.ndarray) -> np.ndarray:
    """Коэффициенты PIL PERSPECTIVE: точки выхода end -> точки входа start"""
    rows = []
    for (ex, ey), (sx, sy) in zip(end, start):
        rows.append([ex, ey, 1, 0, 0, 0, -sx * ex, -sx * ey])
        rows.append([0, 0, 0, ex, ey, 1, -sy * ex, -sy * ey])
    return np.linalg.solve(np.array(rows, dtype=np.float64), start.reshape(-1).astype(np.float64))


def _random_perspective_points(rng: np.random.Generator, height: int, width: int,
                               scale: float) -> Tuple[np.ndarray, np.ndarray]:
    half_h, half_w = height // 2, width // 2
    dx, dy = int(scale * half_w), int(scale * half_h)
    start = np.array([[0, 0], [width - 1, 0], [width - 1, height - 1], [0, height - 1]], dtype=np.float64)
    offsets = rng.integers(0, [dx + 1, dy + 1], size=(4, 2))
    signs = np.array([[1, 1], [-1, 1], [-1, -1], [1, -1]])
    return start, start + signs * offsets


def _warp_channels(sample: np.ndarray, warp) -> np.ndarray:
    channels = []
    for channel in sample:
        image = Image.fromarray(channel.astype(np.float32))
        channels.append(np.asarray(warp(image), dtype=np.float64))
    return np.stack(channels)


def augment(batch: np.ndarray, config: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    """
    Поворот, отражение, перспектива (независимо для каждого образца), затем нормализация.
    batch: (n, 3, H, W) в [0, 1].
    """
    batch = np.asarray(batch, dtype=np.float64)
    out = np.empty_like(batch)
    _, _, height, width = batch.shape
    for i, sample in enumerate(batch):
        if config.rotation and config.rotation_degrees > 0:
            angle = float(rng.uniform(-config.rotation_degrees, config.rotation_degrees))
            sample = _warp_channels(sample, lambda im: im.rotate(angle, resample=Image.Resampling.BILINEAR))
        if config.hflip and rng.random() < config.hflip_prob:
            sample = sample[:, :, ::-1]
        if config.perspective and rng.random() < config.perspective_prob:
            start, end = _random_perspective_points(rng, height, width, config.perspective_scale)
            coeffs = tuple(_perspective_coeffs(start, end))
            sample = _warp_channels(sample, lambda im: im.transform(
                (width, height), Image.Transform.PERSPECTIVE, coeffs, Image.Resampling.BILINEAR))
        out[i] = sample
    if config.normalize:
        mean = np.array(config.mean).reshape(1, 3, 1, 1)
        std = np.array(config.std).reshape(1, 3, 1, 1)
        out = (out - mean) / std
    return out


# =============================================================================
# Батчи
# =============================================================================

class DataLoader:
    """Загрузка выборки из манифеста и выдача батчей в детерминированном порядке"""

    def __init__(self, manifest: DatasetManifest, image_size: int, batch_size: int,
                 augment_config: Optional[AugmentConfig] = None, seed: int = 7):
        self.manifest = manifest
        self.image_size = image_size
        self.batch_size = batch_size
        self.augment_config = augment_config or AugmentConfig()
        self.eval_config = AugmentConfig(rotation=False, hflip=False, perspective=False,
                                         normalize=self.augment_config.normalize,
                                         mean=self.augment_config.mean, std=self.augment_config.std)
        self.seed = seed
        self._cache: Dict[Split, Tuple[np.ndarray, np.ndarray]] = {}

    def arrays(self, split) -> Tuple[np.ndarray, np.ndarray]:
        """Все изображения выборки (n, 3, H, W) и метки; кэшируется"""
        split = parse_enum(Split, split, "выборки")
        if split not in self._cache:
            records = self.manifest.split(split)
            if not records:
                raise DataError(f"В манифесте нет записей выборки '{split.value}'")
            images = np.empty((len(records), 3, self.image_size, self.image_size), dtype=np.float32)
            for i, record in enumerate(tqdm(records, desc=f"Загрузка {split.value}", leave=False)):
                images[i] = bilinear_resize(decode_image(self.manifest.absolute(record)),
                                            self.image_size, self.image_size)
            labels = np.array([r.label for r in records], dtype=np.int64)
            self._cache[split] = (images, labels)
        return self._cache[split]

    def _chunks(self, count: int) -> List[slice]:
        bounds = list(range(0, count, self.batch_size)) + [count]
        chunks = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
        # хвост из одного образца присоединяется к предыдущему батчу (batch norm)
        if len(chunks) > 1 and chunks[-1].stop - chunks[-1].start == 1:
            chunks[-2] = slice(chunks[-2].start, count)
            chunks.pop()
        return chunks

    def num_batches(self, split) -> int:
        return len(self._chunks(len(self.arrays(split)[1])))

    def batches(self, split, epoch: int = 0, train: bool = True) -> Iterator[Tuple[Tensor, np.ndarray]]:
        """
        Батчи (тензор, метки). train=True: перемешивание и аугментации
        из потоков shuffle/augment, зависящих только от (seed, epoch).
        """
        images, labels = self.arrays(split)
        if train:
            order = make_rng(self.seed, "shuffle", epoch).permutation(len(labels))
            rng = make_rng(self.seed, "augment", epoch)
            config = self.augment_config
        else:
            order = np.arange(len(labels))
            rng = make_rng(self.seed, "augment", epoch)
            config = self.eval_config
        for chunk in self._chunks(len(labels)):
            index = order[chunk]
            yield Tensor(augment(images[index], config, rng)), labels[index]
