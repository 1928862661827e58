# -*- coding: utf-8 -*-
"""
Градиентные операторы и модуль TP

Девять классических 3x3 операторов (реестр только для чтения), свёртка входного
тензора фиксированным ядром (TP) и визуализация следов манипуляции.
"""

import logging
from dataclasses import dataclass
from types import MappingProxyType
from typing import List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image

from errors import ConfigError, ShapeError
from models import KernelName, PaddingMode, TPConfig, TPMode, parse_enum
from tensor_core import ParamStore, Tensor, conv2d, no_grad, tensor_abs

logger = logging.getLogger(__name__)

Coeffs = Tuple[Tuple[float, float, float], ...]


@dataclass(frozen=True)
class GradientKernel:
    """
    Именованное неизменяемое 3x3 ядро.
    pair задаётся только для оператора Робертса: отклики двух масок
    объединяются как |Gx| + |Gy|.
    """
    name: KernelName
    coeffs: Coeffs
    pair: Optional[Coeffs] = None

    @property
    def zero_sum(self) -> bool:
        grids = [self.coeffs] + ([self.pair] if self.pair else [])
        return all(abs(float(np.sum(g))) < 1e-9 for g in grids)

    @property
    def is_linear(self) -> bool:
        return self.pair is None

    def arrays(self) -> List[np.ndarray]:
        """Копии коэффициентов как массивы 3x3"""
        grids = [self.coeffs] + ([self.pair] if self.pair else [])
        return [np.array(g, dtype=np.float64) for g in grids]


def _transpose(coeffs: Coeffs) -> Coeffs:
    return tuple(zip(*coeffs))


_PREWITT_H = ((-1, 0, 1), (-1, 0, 1), (-1, 0, 1))
_SOBEL_H = ((-1, 0, 1), (-2, 0, 2), (-1, 0, 1))

_REGISTRY: Mapping[KernelName, GradientKernel] = MappingProxyType({
    KernelName.HIGHPASS: GradientKernel(KernelName.HIGHPASS, ((-1, -1, -1), (-1, 8, -1), (-1, -1, -1))),
    # крест Робертса, вложенный в центр 3x3
    KernelName.ROBERTS_SHARPEN: GradientKernel(
        KernelName.ROBERTS_SHARPEN,
        ((0, 0, 0), (0, 1, 0), (0, 0, -1)),
        ((0, 0, 0), (0, 0, 1), (0, -1, 0)),
    ),
    # восточная маска
    KernelName.KIRSCH: GradientKernel(KernelName.KIRSCH, ((-3, -3, 5), (-3, 0, 5), (-3, -3, 5))),
    KernelName.LAPLACIAN: GradientKernel(KernelName.LAPLACIAN, ((0, 1, 0), (1, -4, 1), (0, 1, 0))),
    KernelName.SOBEL_H: GradientKernel(KernelName.SOBEL_H, _SOBEL_H),
    KernelName.SOBEL_V: GradientKernel(KernelName.SOBEL_V, _transpose(_SOBEL_H)),
    KernelName.PREWITT_H: GradientKernel(KernelName.PREWITT_H, _PREWITT_H),
    KernelName.PREWITT_V: GradientKernel(KernelName.PREWITT_V, _transpose(_PREWITT_H)),
    KernelName.PREWITT_D: GradientKernel(KernelName.PREWITT_D, ((0, 1, 1), (-1, 0, 1), (-1, -1, 0))),
})


def kernel_registry() -> Mapping[KernelName, GradientKernel]:
    """Все девять операторов (словарь только для чтения)"""
    return _REGISTRY


def get_kernel(name: Union[str, KernelName]) -> GradientKernel:
    return _REGISTRY[parse_enum(KernelName, name, "оператора")]


def kernel_weights(kernel: GradientKernel, channels: int, mode: TPMode) -> List[np.ndarray]:
    """
    Веса свёртки для фиксированного ядра.
    Depthwise: (C, 1, 3, 3), groups=C. SummedSingle: (1, C, 3, 3) - сумма по каналам.
    """
    if channels < 1:
        raise ShapeError(f"Фиксированное ядро: число каналов должно быть >= 1, получено {channels}")
    weights = []
    for grid in kernel.arrays():
        if mode == TPMode.DEPTHWISE:
            weights.append(np.tile(grid, (channels, 1, 1, 1)))
        else:
            weights.append(np.tile(grid, (1, channels, 1, 1)))
    return weights


class FixedKernelConv:
    """
    Свёртка фиксированным градиентным оператором.
    Веса регистрируются в ParamStore как fixed (trainable=False) и не меняются.
    """

    def __init__(self, operator: Union[str, KernelName], channels: int, mode: TPMode = TPMode.DEPTHWISE,
                 padding: PaddingMode = PaddingMode.replicate(1), store: Optional[ParamStore] = None,
                 prefix: str = "tp"):
        self.kernel = get_kernel(operator)
        self.channels = channels
        self.mode = parse_enum(TPMode, mode, "режима")
        self.padding = padding
        self.weights: List[Tensor] = []
        suffixes = ("kernel", "kernel_y")
        for suffix, array in zip(suffixes, kernel_weights(self.kernel, channels, self.mode)):
            if store is not None:
                tensor = store.register(f"{prefix}.{suffix}", array, trainable=False, kind="fixed")
            else:
                tensor = Tensor(array)
            self.weights.append(tensor)

    @property
    def out_channels(self) -> int:
        return self.channels if self.mode == TPMode.DEPTHWISE else 1

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[1] != self.channels:
            raise ShapeError(
                f"{self.kernel.name.value}: ожидалось {self.channels} каналов, получен вход {x.shape}")
        groups = self.channels if self.mode == TPMode.DEPTHWISE else 1
        responses = [conv2d(x, w, padding=self.padding, groups=groups) for w in self.weights]
        if len(responses) == 1:
            return responses[0]
        return tensor_abs(responses[0]) + tensor_abs(responses[1])

    def reference_weights(self) -> List[np.ndarray]:
        """Эталонные значения из реестра (для проверки неизменности)"""
        return kernel_weights(self.kernel, self.channels, self.mode)


def build_tp(config: TPConfig, channels: int, store: Optional[ParamStore] = None,
             prefix: str = "tp") -> FixedKernelConv:
    return FixedKernelConv(config.operator, channels, config.mode, config.padding, store, prefix)


def tp_apply(x: Tensor, config: TPConfig = None) -> Tensor:
    """Уточнение тензора фиксированным оператором: T_o = sum(T_i * G) или поканально"""
    config = config or TPConfig()
    if x.ndim != 4:
        raise ShapeError(f"tp_apply: ожидался тензор ранга 4, форма {x.shape}")
    return build_tp(config, x.shape[1])(x)


# =============================================================================
# Визуализация следов
# =============================================================================

def _image_to_array(image) -> np.ndarray:
    """PIL-изображение или массив HxWx3 -> (3, H, W) float64 в [0, 1]"""
    if isinstance(image, Image.Image):
        array = np.asarray(image.convert("RGB"), dtype=np.float64) / 255.0
    else:
        array = np.asarray(image, dtype=np.float64)
        if array.ndim == 2:
            array = np.repeat(array[:, :, None], 3, axis=2)
    if array.ndim != 3 or array.shape[2] != 3:
        raise ShapeError(f"trace: ожидалось изображение HxWx3, получено {array.shape}")
    return array.transpose(2, 0, 1)


def trace_response(image, operator: Union[str, KernelName] = KernelName.PREWITT_D) -> np.ndarray:
    """|отклик| оператора по каналам, форма (3, H, W)"""
    chw = _image_to_array(image)
    conv = FixedKernelConv(operator, 3, TPMode.DEPTHWISE, PaddingMode.replicate(1))
    with no_grad():
        response = conv(Tensor(chw[None]))
    return np.abs(response.data[0].astype(np.float64))


def trace_image(image, operator: Union[str, KernelName] = KernelName.PREWITT_D) -> Image.Image:
    """
    8-битная визуализация отклика оператора.
    Каждый канал |отклика| нормируется min-max в [0, 255]; постоянный канал -> 0.
    """
    response = trace_response(image, operator)
    out = np.zeros_like(response)
    for c in range(response.shape[0]):
        lo, hi = response[c].min(), response[c].max()
        if hi - lo > 1e-12:
            out[c] = (response[c] - lo) / (hi - lo) * 255.0
    pixels = np.clip(np.rint(out), 0, 255).astype(np.uint8).transpose(1, 2, 0)
    return Image.fromarray(pixels)


def trace_energy_ratio(response: np.ndarray, artifact_mask: np.ndarray, clean_mask: np.ndarray) -> float:
    """Средний отклик на пикселях артефакта / средний отклик на чистых пикселях"""
    energy = response.mean(axis=0) if response.ndim == 3 else response
    if not artifact_mask.any() or not clean_mask.any():
        raise ConfigError("trace_energy_ratio: пустая маска артефакта или чистой области")
    clean = float(energy[clean_mask].mean())
    artifact = float(energy[artifact_mask].mean())
    if clean <= 0:
        return float("inf") if artifact > 0 else 1.0
    return artifact / clean
