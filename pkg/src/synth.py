# -*- coding: utf-8 -*-
"""
Генератор синтетических подделок

Реальные изображения - гладкие многомасштабные текстуры. Подделка = та же
текстура + малозаметный артефакт:
  blend-patch           - круглая вставка со сдвигом цвета и шумом на шве смешивания
  periodic-fingerprint  - периодический остаток по всему изображению (как у GAN)
  mixed                 - чередование двух видов

Структура каталога: real/, fake/, masks/, manifest.csv.
Маска: 255 - шов смешивания, 128 - внутренняя часть вставки, 0 - чистые пиксели.
Для periodic-fingerprint вся маска = 255.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from PIL import Image
from tqdm import tqdm

from data_loader import bilinear_resize, save_manifest
from errors import DataError
from gradop import trace_response
from models import (SUBTLETY_LIMIT, DatasetManifest, KernelName, ManifestRecord, Split,
                    SynthConfig, SynthKind)
from seeding import make_rng

logger = logging.getLogger(__name__)

MASK_SEAM = 255
MASK_INTERIOR = 128
MASK_CLEAN = 0

# (размер сетки, амплитуда в долях [0, 1]) для слоёв текстуры
TEXTURE_OCTAVES = ((2, 0.02), (3, 0.02), (5, 0.02))


@dataclass
class SynthPair:
    """Пара real/fake в уровнях 0..255 (3, H, W) и маска артефакта (H, W)"""
    real: np.ndarray
    fake: np.ndarray
    mask: np.ndarray
    kind: SynthKind


def smooth_texture(rng: np.random.Generator, size: int) -> np.ndarray:
    """Гладкая цветная текстура (3, size, size) в [0, 1]"""
    base = rng.uniform(0.3, 0.7, size=(3, 1, 1))
    texture = np.broadcast_to(base, (3, size, size)).copy()
    for grid, amplitude in TEXTURE_OCTAVES:
        texture += amplitude * bilinear_resize(rng.normal(0.0, 1.0, size=(3, grid, grid)), size, size)
    return np.clip(texture, 0.0, 1.0)


def blend_weight(size: int, center: Tuple[float, float], radius: float, sigma: float) -> np.ndarray:
    """Вес вставки m: 1 внутри, 0 снаружи, smoothstep на полосе [R - sigma, R + sigma]"""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    distance = np.hypot(yy - center[0], xx - center[1])
    t = np.clip((radius + sigma - distance) / (2.0 * sigma), 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _blend_patch(config: SynthConfig, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    size = config.image_size
    margin = config.patch_radius + config.blend_sigma + 1
    center = tuple(rng.uniform(margin, size - 1 - margin, size=2))
    m = blend_weight(size, center, config.patch_radius, config.blend_sigma)
    shift = rng.uniform(-1.0, 1.0, size=(3, 1, 1)) * config.blend_noise / 3.0
    seam = rng.normal(0.0, config.blend_noise, size=(3, size, size)) * (4.0 * m * (1.0 - m))
    delta = m * shift + seam

    mask = np.full((size, size), MASK_CLEAN, dtype=np.uint8)
    mask[m >= 1.0] = MASK_INTERIOR
    mask[(m > 0.0) & (m < 1.0)] = MASK_SEAM
    return delta, mask


def _periodic_fingerprint(config: SynthConfig,
                          rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    size = config.image_size
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    phase_x, phase_y = rng.uniform(0.0, 2.0 * np.pi, size=2)
    omega = 2.0 * np.pi / config.fingerprint_period
    pattern = np.cos(omega * xx + phase_x) + np.cos(omega * yy + phase_y)
    delta = np.broadcast_to(config.fingerprint_amplitude * pattern, (3, size, size))
    return delta, np.full((size, size), MASK_SEAM, dtype=np.uint8)


def _kind_for(config: SynthConfig, index: int) -> SynthKind:
    if config.kind == SynthKind.MIXED:
        return SynthKind.BLEND_PATCH if index % 2 == 0 else SynthKind.PERIODIC_FINGERPRINT
    return config.kind


def make_pair(config: SynthConfig, index: int) -> SynthPair:
    """Пара номер index; зависит только от (seed, index)"""
    rng = make_rng(config.seed, "synth", index)
    real_levels = np.rint(smooth_texture(rng, config.image_size) * 255.0)
    kind = _kind_for(config, index)
    if kind == SynthKind.BLEND_PATCH:
        delta, mask = _blend_patch(config, rng)
    else:
        delta, mask = _periodic_fingerprint(config, rng)
    fake_levels = np.clip(np.rint(real_levels + delta), 0, 255)

    mean_delta = float(np.abs(fake_levels - real_levels).mean()) / 255.0
    if mean_delta >= SUBTLETY_LIMIT:
        raise DataError(
            f"Пара {index}: средний |fake - real| = {mean_delta * 255:.2f} уровней >= 4; "
            f"уменьшите амплитуду артефакта")
    return SynthPair(real_levels.astype(np.uint8), fake_levels.astype(np.uint8), mask, kind)


def _save_rgb(levels: np.ndarray, path: Path):
    Image.fromarray(np.ascontiguousarray(levels.transpose(1, 2, 0))).save(path)


def synth_generate(config: SynthConfig, out_dir: Union[str, Path]) -> DatasetManifest:
    """
    count реальных изображений и count подделок с масками + manifest.csv.
    Пары real/fake попадают в одну выборку; разбиение train/test перемешано потоком synth.
    """
    out_dir = Path(out_dir)
    for sub in ("real", "fake", "masks"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)

    order = make_rng(config.seed, "synth").permutation(config.count)
    n_train = int(round(config.count * config.train_fraction))
    train_pairs = set(order[:n_train].tolist())

    records = []
    for index in tqdm(range(config.count), desc="Синтез", leave=False):
        pair = make_pair(config, index)
        name = f"{index:05d}.png"
        _save_rgb(pair.real, out_dir / "real" / name)
        _save_rgb(pair.fake, out_dir / "fake" / name)
        Image.fromarray(pair.mask).save(out_dir / "masks" / name)
        split = Split.TRAIN if index in train_pairs else Split.TEST
        records.append(ManifestRecord(f"real/{name}", 0, split))
        records.append(ManifestRecord(f"fake/{name}", 1, split))

    manifest = DatasetManifest(records, out_dir)
    save_manifest(manifest, out_dir / "manifest.csv")
    counts = manifest.counts()
    logger.info(f"[OK] Синтезировано {2 * config.count} изображений ({config.kind.value}) в {out_dir}: "
                f"train {counts['train']}, test {counts['test']}")
    return manifest


# =============================================================================
# Проверки заметности
# =============================================================================

def histogram_overlap(real: np.ndarray, fake: np.ndarray) -> float:
    """Доля пересечения 256-корзинных гистограмм значений пикселей"""
    h_real = np.bincount(real.reshape(-1).astype(np.int64), minlength=256) / real.size
    h_fake = np.bincount(fake.reshape(-1).astype(np.int64), minlength=256) / fake.size
    return float(np.minimum(h_real, h_fake).sum())


def artifact_energy_ratio(pair: SynthPair, operator=KernelName.PREWITT_D) -> float:
    """Отклик оператора на подделке / на реальном изображении по пикселям артефакта"""
    artifact = pair.mask == MASK_SEAM
    fake_energy = trace_response(pair.fake.transpose(1, 2, 0) / 255.0, operator).mean(axis=0)
    real_energy = trace_response(pair.real.transpose(1, 2, 0) / 255.0, operator).mean(axis=0)
    real_mean = float(real_energy[artifact].mean())
    if real_mean <= 0:
        return float("inf")
    return float(fake_energy[artifact].mean()) / real_mean
