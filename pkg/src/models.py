# -*- coding: utf-8 -*-
"""
Модели данных: конфигурации сети, обучения, данных и результаты оценки
"""

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from errors import ConfigError


def parse_enum(enum_cls, value, what: str = None):
    """Приведение строки к Enum с понятной ошибкой"""
    if isinstance(value, enum_cls):
        return value
    text = str(value).strip().lower().replace('_', '-')
    for member in enum_cls:
        if member.value == text:
            return member
    valid = ", ".join(m.value for m in enum_cls)
    raise ConfigError(f"Неизвестное значение {what or enum_cls.__name__}: '{value}'. Допустимые: {valid}")


class KernelName(Enum):
    """Девять классических градиентных операторов"""
    HIGHPASS = "highpass"
    ROBERTS_SHARPEN = "roberts-sharpen"
    KIRSCH = "kirsch"
    LAPLACIAN = "laplacian"
    SOBEL_H = "sobel-h"
    SOBEL_V = "sobel-v"
    PREWITT_H = "prewitt-h"
    PREWITT_V = "prewitt-v"
    PREWITT_D = "prewitt-d"


class TPMode(Enum):
    """Поканальная свёртка или сумма по каналам (буквальная формула)"""
    DEPTHWISE = "depthwise"
    SUMMED_SINGLE = "summed-single"


class FusionMode(Enum):
    """Modulated: F' = F * A; Literal: F' = A"""
    MODULATED = "modulated"
    LITERAL = "literal"


class Variant(Enum):
    """Варианты сети для абляции"""
    BASENET = "basenet"
    TP_BASENET = "tp-basenet"
    BASENET_MTA = "basenet-mta"
    BASENET_MTA_CONV = "basenet-mta-conv"
    GOCNET_SINGLE = "gocnet-single"
    GOCNET_DUAL = "gocnet-dual"
    DUAL_PLAIN = "dual-plain"
    DUAL_TP = "dual-tp"
    DUAL_MTA = "dual-mta"


class BackboneKind(Enum):
    MINI = "mini"
    RESNET18 = "resnet18"


class Mode(Enum):
    """Режим batch norm"""
    TRAIN = "train"
    EVAL = "eval"


class SynthKind(Enum):
    """Тип синтетического артефакта"""
    BLEND_PATCH = "blend-patch"
    PERIODIC_FINGERPRINT = "periodic-fingerprint"
    MIXED = "mixed"


class Split(Enum):
    TRAIN = "train"
    TEST = "test"


@dataclass(frozen=True)
class PaddingMode:
    """Паддинг свёртки: zero(p) или replicate(p)"""
    kind: str = "zero"
    size: int = 0

    def __post_init__(self):
        if self.kind not in ("zero", "replicate"):
            raise ConfigError(f"Неизвестный тип паддинга: '{self.kind}' (zero, replicate)")
        if self.size < 0:
            raise ConfigError(f"Размер паддинга не может быть отрицательным: {self.size}")

    @classmethod
    def zero(cls, size: int) -> "PaddingMode":
        return cls("zero", size)

    @classmethod
    def replicate(cls, size: int) -> "PaddingMode":
        return cls("replicate", size)


@dataclass
class TPConfig:
    """Настройки модуля TP (предобработка градиентным оператором)"""
    operator: KernelName = KernelName.PREWITT_D
    mode: TPMode = TPMode.DEPTHWISE
    padding: PaddingMode = field(default_factory=lambda: PaddingMode.replicate(1))

    def __post_init__(self):
        self.operator = parse_enum(KernelName, self.operator, "оператора")
        self.mode = parse_enum(TPMode, self.mode, "режима TP")


@dataclass
class MTAConfig:
    """
    Настройки модуля MTA.
    channels = 0 означает «взять число каналов блока-хозяина при сборке».
    """
    channels: int = 0
    reduction: int = 16
    operator: KernelName = KernelName.PREWITT_D
    fusion_mode: FusionMode = FusionMode.MODULATED
    alpha_init: float = 1.0
    mode: TPMode = TPMode.DEPTHWISE

    def __post_init__(self):
        self.operator = parse_enum(KernelName, self.operator, "оператора")
        self.fusion_mode = parse_enum(FusionMode, self.fusion_mode, "режима слияния")
        self.mode = parse_enum(TPMode, self.mode, "режима MT-гейта")
        if self.reduction < 1:
            raise ConfigError(f"mta.reduction должен быть >= 1, получено {self.reduction}")
        if not np.isfinite(self.alpha_init):
            raise ConfigError(f"mta.alpha_init должен быть конечным числом: {self.alpha_init}")
        if self.channels and self.channels // self.reduction < 1:
            raise ConfigError(
                f"MTA: channels/reduction < 1 ({self.channels}/{self.reduction}); "
                f"уменьшите mta.reduction")

    @property
    def hidden(self) -> int:
        return self.channels // self.reduction


@dataclass
class BackboneSpec:
    """Конфигурация остова ResNet"""
    kind: BackboneKind = BackboneKind.MINI
    stage_channels: Tuple[int, ...] = (16, 32, 64, 128)
    blocks_per_stage: int = 2
    image_size: int = 64

    def __post_init__(self):
        self.kind = parse_enum(BackboneKind, self.kind, "остова")
        self.stage_channels = tuple(int(c) for c in self.stage_channels)
        if not self.stage_channels or min(self.stage_channels) < 1:
            raise ConfigError(f"Неверные каналы стадий: {self.stage_channels}")
        if self.blocks_per_stage < 1:
            raise ConfigError(f"blocks_per_stage должен быть >= 1: {self.blocks_per_stage}")
        if self.image_size < 4:
            raise ConfigError(f"Слишком маленький размер изображения: {self.image_size}")

    @classmethod
    def mini(cls, image_size: int = 64) -> "BackboneSpec":
        return cls(BackboneKind.MINI, (16, 32, 64, 128), 2, image_size)

    @classmethod
    def resnet18(cls, image_size: int = 299) -> "BackboneSpec":
        return cls(BackboneKind.RESNET18, (64, 128, 256, 512), 2, image_size)

    @property
    def feature_dim(self) -> int:
        return self.stage_channels[-1]


@dataclass
class ModelSpec:
    """Декларативное описание сети"""
    variant: Variant = Variant.GOCNET_DUAL
    backbone: BackboneSpec = field(default_factory=BackboneSpec)
    tp: TPConfig = field(default_factory=TPConfig)
    mta: MTAConfig = field(default_factory=MTAConfig)
    num_classes: int = 2
    seed: int = 7

    def __post_init__(self):
        self.variant = parse_enum(Variant, self.variant, "варианта сети")
        if self.num_classes != 2:
            raise ConfigError(f"Поддерживается только бинарная классификация, num_classes={self.num_classes}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "variant": self.variant.value,
            "backbone": {
                "kind": self.backbone.kind.value,
                "stage_channels": list(self.backbone.stage_channels),
                "blocks_per_stage": self.backbone.blocks_per_stage,
                "image_size": self.backbone.image_size,
            },
            "tp": {
                "operator": self.tp.operator.value,
                "mode": self.tp.mode.value,
                "padding": [self.tp.padding.kind, self.tp.padding.size],
            },
            "mta": {
                "reduction": self.mta.reduction,
                "operator": self.mta.operator.value,
                "fusion_mode": self.mta.fusion_mode.value,
                "alpha_init": self.mta.alpha_init,
                "mode": self.mta.mode.value,
            },
            "num_classes": self.num_classes,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelSpec":
        tp = dict(data.get("tp", {}))
        if "padding" in tp:
            tp["padding"] = PaddingMode(*tp["padding"])
        return cls(
            variant=data["variant"],
            backbone=BackboneSpec(**data.get("backbone", {})),
            tp=TPConfig(**tp),
            mta=MTAConfig(**data.get("mta", {})),
            num_classes=data.get("num_classes", 2),
            seed=data.get("seed", 7),
        )


@dataclass
class AugmentConfig:
    """Аугментации: поворот, нормализация, отражение, случайная перспектива"""
    rotation_degrees: float = 10.0
    hflip_prob: float = 0.5
    perspective_scale: float = 0.2
    perspective_prob: float = 0.5
    mean: Tuple[float, float, float] = (0.5, 0.5, 0.5)
    std: Tuple[float, float, float] = (0.5, 0.5, 0.5)
    rotation: bool = True
    hflip: bool = True
    perspective: bool = True
    normalize: bool = True

    def __post_init__(self):
        for name in ("hflip_prob", "perspective_prob", "perspective_scale"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"augment.{name} должен быть в [0, 1], получено {value}")
        if self.rotation_degrees < 0:
            raise ConfigError(f"augment.rotation_degrees < 0: {self.rotation_degrees}")
        self.mean = tuple(float(v) for v in self.mean)
        self.std = tuple(float(v) for v in self.std)
        if len(self.mean) != 3 or len(self.std) != 3:
            raise ConfigError("augment.mean и augment.std должны содержать по 3 значения")
        if min(self.std) <= 0:
            raise ConfigError(f"augment.std должен быть > 0: {self.std}")

    @classmethod
    def disabled(cls) -> "AugmentConfig":
        """Только нормализация (для оценки)"""
        return cls(rotation=False, hflip=False, perspective=False, normalize=True)


# Предел заметности артефакта: средний |fake - real| < 4/255
SUBTLETY_LIMIT = 4.0 / 255.0


@dataclass
class SynthConfig:
    """
    Синтетический набор подделок.
    Амплитуды задаются в уровнях 8-битного изображения.
    """
    kind: SynthKind = SynthKind.BLEND_PATCH
    image_size: int = 64
    patch_radius: int = 14
    blend_sigma: float = 3.0
    blend_noise: float = 8.0
    fingerprint_amplitude: float = 3.0
    fingerprint_period: int = 4
    count: int = 500
    seed: int = 7
    train_fraction: float = 0.8

    def __post_init__(self):
        self.kind = parse_enum(SynthKind, self.kind, "типа синтеза")
        if self.count < 1:
            raise ConfigError(f"synth.count должен быть >= 1: {self.count}")
        if not 0 < self.fingerprint_amplitude <= 3.0:
            raise ConfigError(
                f"synth.fingerprint_amplitude должен быть в (0, 3] уровней, "
                f"иначе артефакт перестаёт быть незаметным: {self.fingerprint_amplitude}")
        if not 0 < self.blend_noise <= 12.0:
            raise ConfigError(f"synth.blend_noise должен быть в (0, 12] уровней: {self.blend_noise}")
        if not 2 <= self.fingerprint_period <= self.image_size // 2:
            raise ConfigError(f"synth.fingerprint_period вне диапазона: {self.fingerprint_period}")
        if self.blend_sigma <= 0:
            raise ConfigError(f"synth.blend_sigma должен быть > 0: {self.blend_sigma}")
        if not 2 <= self.patch_radius < self.image_size / 2 - self.blend_sigma:
            raise ConfigError(
                f"synth.patch_radius={self.patch_radius} не помещается в изображение {self.image_size}")
        if not 0 < self.train_fraction < 1:
            raise ConfigError(f"synth.train_fraction должен быть в (0, 1): {self.train_fraction}")


@dataclass
class TrainConfig:
    """Параметры оптимизации (Adam + экспоненциальное затухание LR по эпохам)"""
    lr0: float = 0.0005
    gamma: float = 0.5
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 32
    epochs: int = 10
    seed: int = 7
    decay_unit: str = "epoch"
    checkpoint_every: int = 1
    eval_every: int = 1

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ConfigError(f"train.gamma должен быть в (0, 1]: {self.gamma}")
        for name in ("beta1", "beta2"):
            value = getattr(self, name)
            if not 0 <= value < 1:
                raise ConfigError(f"train.{name} должен быть в [0, 1): {value}")
        if self.lr0 <= 0 or self.epsilon <= 0:
            raise ConfigError("train.lr0 и train.epsilon должны быть > 0")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("train.batch_size и train.epochs должны быть >= 1")
        if self.decay_unit != "epoch":
            raise ConfigError(f"Поддерживается только decay_unit=epoch, получено '{self.decay_unit}'")
        if self.checkpoint_every < 1 or self.eval_every < 1:
            raise ConfigError("checkpoint_every и eval_every должны быть >= 1")


@dataclass
class ManifestRecord:
    """Строка манифеста"""
    path: str
    label: int
    split: Split


@dataclass
class DatasetManifest:
    """Список (путь, метка, выборка) относительно корня набора"""
    records: List[ManifestRecord]
    root: Path

    def split(self, split) -> List[ManifestRecord]:
        split = parse_enum(Split, split, "выборки")
        return [r for r in self.records if r.split == split]

    def absolute(self, record: ManifestRecord) -> Path:
        return self.root / record.path

    def counts(self) -> Dict[str, int]:
        result = {"total": len(self.records)}
        for split in Split:
            subset = self.split(split)
            result[split.value] = len(subset)
            result[f"{split.value}_fake"] = sum(r.label for r in subset)
        return result


@dataclass
class ScoreSet:
    """Пары (вероятность класса fake, метка)"""
    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64).ravel()
        self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if self.scores.shape != self.labels.shape:
            raise ConfigError(f"Число оценок {self.scores.shape} != число меток {self.labels.shape}")
        if not np.all(np.isfinite(self.scores)):
            raise ConfigError("Оценки содержат NaN/Inf")
        if np.any((self.labels != 0) & (self.labels != 1)):
            raise ConfigError("Метки должны быть 0 (real) или 1 (fake)")

    @classmethod
    def from_pairs(cls, pairs: Sequence[Tuple[float, int]]) -> "ScoreSet":
        pairs = list(pairs)
        return cls(np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs]))

    def __len__(self) -> int:
        return int(self.scores.size)

    @property
    def positives(self) -> np.ndarray:
        return self.scores[self.labels == 1]

    @property
    def negatives(self) -> np.ndarray:
        return self.scores[self.labels == 0]


@dataclass
class EvalReport:
    """ACC, AUC, EER и точки ROC, из которых они получены"""
    acc: float
    auc: float
    eer: float
    eer_threshold: float
    roc: List[Tuple[float, float, float]] = field(default_factory=list)
    counts: Dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "acc": self.acc,
            "auc": self.auc,
            "eer": self.eer,
            "eer_threshold": self.eer_threshold,
            "counts": dict(self.counts),
            "roc": [{"threshold": t, "far": far, "frr": frr} for t, far, frr in self.roc],
        }
