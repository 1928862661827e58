# -*- coding: utf-8 -*-
"""
Конфигурация системы обнаружения подделок

Пути и переменные окружения, таблица значений по умолчанию и загрузка
конфигурационного файла запуска (INI) с переопределениями из командной строки.
"""

import configparser
import logging
import os
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, Optional, Tuple, Union

from dotenv import load_dotenv

from errors import ConfigError
from models import (AugmentConfig, BackboneKind, BackboneSpec, MTAConfig, ModelSpec, PaddingMode,
                    SynthConfig, TPConfig, TrainConfig, parse_enum)

logger = logging.getLogger(__name__)

# Базовые пути
BASE_DIR = Path(__file__).resolve().parent.parent
CONFIGS_DIR = BASE_DIR / "configs"

load_dotenv(BASE_DIR / ".env")

OUTPUT_ROOT = Path(os.environ.get("GOCNET_OUTPUT_ROOT", "output"))
LOG_LEVEL = os.environ.get("GOCNET_LOG_LEVEL", "INFO").upper()

MANIFEST_COLUMNS = ("path", "label", "split")
SUPPORTED_IMAGE_EXTENSIONS = (".png", ".ppm", ".jpg", ".jpeg")
RESOLVED_CONFIG_NAME = "resolved.cfg"


def _bool(raw: str) -> bool:
    value = raw.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"ожидалось true/false, получено '{raw}'")


def _floats(raw: str) -> Tuple[float, ...]:
    return tuple(float(v) for v in raw.split(",") if v.strip())


def _ints(raw: str) -> Tuple[int, ...]:
    return tuple(int(v) for v in raw.split(",") if v.strip())


# Схема: секция -> ключ -> (преобразование, значение по умолчанию)
SCHEMA: Dict[str, Dict[str, Tuple[Callable[[str], Any], str]]] = {
    "run": {
        "seed": (int, "7"),
        "name": (str, "gocnet"),
        "output_dir": (str, ""),
    },
    "data": {
        "manifest": (str, ""),
    },
    "model": {
        "variant": (str, "gocnet-dual"),
        "backbone": (str, "mini"),
        # пусто = значения остова по умолчанию (mini: 16,32,64,128 и 64; resnet18: 64..512 и 299)
        "stage_channels": (_ints, ""),
        "blocks_per_stage": (int, "2"),
        "image_size": (int, ""),
        "num_classes": (int, "2"),
    },
    "tp": {
        "operator": (str, "prewitt-d"),
        "mode": (str, "depthwise"),
        "padding": (str, "replicate"),
        "padding_size": (int, "1"),
    },
    "mta": {
        "channels": (int, "0"),
        "reduction": (int, "16"),
        "operator": (str, "prewitt-d"),
        "fusion_mode": (str, "modulated"),
        "alpha_init": (float, "1.0"),
        "mode": (str, "depthwise"),
    },
    "train": {
        "lr0": (float, "0.0005"),
        "gamma": (float, "0.5"),
        "beta1": (float, "0.9"),
        "beta2": (float, "0.999"),
        "epsilon": (float, "1e-8"),
        "batch_size": (int, "32"),
        "epochs": (int, "10"),
        "decay_unit": (str, "epoch"),
        "checkpoint_every": (int, "1"),
        "eval_every": (int, "1"),
    },
    "augment": {
        "rotation_degrees": (float, "10"),
        "hflip_prob": (float, "0.5"),
        "perspective_scale": (float, "0.2"),
        "perspective_prob": (float, "0.5"),
        "mean": (_floats, "0.5,0.5,0.5"),
        "std": (_floats, "0.5,0.5,0.5"),
        "rotation": (_bool, "true"),
        "hflip": (_bool, "true"),
        "perspective": (_bool, "true"),
        "normalize": (_bool, "true"),
    },
    "synth": {
        "kind": (str, "blend-patch"),
        "image_size": (int, "64"),
        "patch_radius": (int, "14"),
        "blend_sigma": (float, "3.0"),
        "blend_noise": (float, "8.0"),
        "fingerprint_amplitude": (float, "3.0"),
        "fingerprint_period": (int, "4"),
        "count": (int, "500"),
        "train_fraction": (float, "0.8"),
        "output_dir": (str, ""),
    },
}

DEFAULTS: Dict[str, Dict[str, str]] = {
    section: {key: default for key, (_, default) in keys.items()} for section, keys in SCHEMA.items()
}


def parse_override(text: str) -> Tuple[str, str, str]:
    """'section.key=value' -> (section, key, value)"""
    if "=" not in text or "." not in text.split("=", 1)[0]:
        raise ConfigError(f"Переопределение должно иметь вид section.key=value: '{text}'")
    name, value = text.split("=", 1)
    section, key = name.strip().split(".", 1)
    return section.strip(), key.strip(), value.strip()


class RunConfig:
    """
    Разрешённая конфигурация запуска: значения по умолчанию, файл и переопределения.
    Все объекты конфигурации строятся при загрузке, поэтому ошибки видны до начала работы.
    """

    def __init__(self, parser: configparser.ConfigParser, source: Optional[Path] = None):
        self.parser = parser
        self.source = source
        self.validate()

    def get(self, section: str, key: str) -> Any:
        convert, _ = SCHEMA[section][key]
        raw = self.parser.get(section, key)
        try:
            return convert(raw)
        except ValueError as e:
            raise ConfigError(f"{section}.{key}: неверное значение '{raw}' ({e})")

    def raw(self, section: str, key: str) -> str:
        return self.parser.get(section, key)

    @property
    def seed(self) -> int:
        return self.get("run", "seed")

    def output_dir(self) -> Path:
        explicit = self.raw("run", "output_dir")
        return Path(explicit) if explicit else OUTPUT_ROOT / self.raw("run", "name")

    def manifest_path(self) -> Optional[Path]:
        raw = self.raw("data", "manifest")
        return Path(raw) if raw else None

    def model_spec(self) -> ModelSpec:
        kind = parse_enum(BackboneKind, self.raw("model", "backbone"), "остова")
        defaults = BackboneSpec.resnet18() if kind == BackboneKind.RESNET18 else BackboneSpec.mini()
        backbone = BackboneSpec(
            kind=kind,
            stage_channels=self.get("model", "stage_channels") or defaults.stage_channels,
            blocks_per_stage=self.get("model", "blocks_per_stage"),
            image_size=self.get("model", "image_size") if self.raw("model", "image_size") else defaults.image_size,
        )
        tp = TPConfig(
            operator=self.raw("tp", "operator"),
            mode=self.raw("tp", "mode"),
            padding=PaddingMode(self.raw("tp", "padding"), self.get("tp", "padding_size")),
        )
        mta = MTAConfig(**{key: self.get("mta", key) for key in SCHEMA["mta"]})
        return ModelSpec(variant=self.raw("model", "variant"), backbone=backbone, tp=tp, mta=mta,
                         num_classes=self.get("model", "num_classes"), seed=self.seed)

    def train_config(self) -> TrainConfig:
        return TrainConfig(seed=self.seed, **{key: self.get("train", key) for key in SCHEMA["train"]})

    def augment_config(self) -> AugmentConfig:
        return AugmentConfig(**{key: self.get("augment", key) for key in SCHEMA["augment"]})

    def synth_config(self) -> SynthConfig:
        values = {key: self.get("synth", key) for key in SCHEMA["synth"] if key != "output_dir"}
        return SynthConfig(seed=self.seed, **values)

    def synth_output_dir(self) -> Path:
        explicit = self.raw("synth", "output_dir")
        return Path(explicit) if explicit else OUTPUT_ROOT / "synth" / self.raw("synth", "kind")

    def validate(self):
        for section, keys in SCHEMA.items():
            for key in keys:
                if SCHEMA[section][key][1] == "" and self.raw(section, key) == "":
                    continue
                self.get(section, key)
        try:
            self.model_spec()
            self.train_config()
            self.augment_config()
            self.synth_config()
        except ConfigError:
            raise
        except (ValueError, TypeError) as e:
            raise ConfigError(f"Неверная конфигурация: {e}")

    def write_resolved(self, directory: Union[str, Path]) -> Path:
        """Эхо полной конфигурации в каталог запуска"""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / RESOLVED_CONFIG_NAME
        with open(path, "w", encoding="utf-8") as f:
            self.parser.write(f)
        return path

    def as_dict(self) -> Dict[str, Dict[str, str]]:
        return {section: dict(self.parser.items(section)) for section in SCHEMA}


def _check_known(section: str, key: str, origin: str):
    if section not in SCHEMA:
        raise ConfigError(f"{origin}: неизвестная секция [{section}]. Допустимые: {', '.join(SCHEMA)}")
    if key not in SCHEMA[section]:
        raise ConfigError(f"{origin}: неизвестный ключ {section}.{key}. Допустимые: {', '.join(SCHEMA[section])}")


def load_run_config(path: Optional[Union[str, Path]] = None, overrides: Iterable[str] = ()) -> RunConfig:
    """Значения по умолчанию <- файл <- переопределения section.key=value (последнее побеждает)"""
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_dict(DEFAULTS)

    source = None
    if path is not None:
        source = Path(path)
        if not source.exists():
            raise ConfigError(f"Конфигурационный файл не найден: {source}")
        user = configparser.ConfigParser(interpolation=None)
        try:
            user.read(source, encoding="utf-8")
        except configparser.Error as e:
            raise ConfigError(f"{source}: ошибка разбора: {e}")
        for section in user.sections():
            for key, value in user.items(section):
                _check_known(section, key, str(source))
                parser.set(section, key, value)

    for text in overrides:
        section, key, value = parse_override(text)
        _check_known(section, key, "--set")
        parser.set(section, key, value)

    return RunConfig(parser, source)
