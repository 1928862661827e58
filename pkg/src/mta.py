# -*- coding: utf-8 -*-
"""
Модуль MTA (Manipulation Trace Attention)

DP-гейт: M_c = S_n(AvgPool(F)) + S_n(MaxPool(F)), S_n - общая сеть из двух 1x1 свёрток.
MT-гейт: M_t = F * G, G - фиксированный градиентный оператор.
Слияние: A = sigmoid(M_c) + sigmoid(alpha * M_t); F' = F * A (Modulated) или F' = A (Literal).
"""

import logging
from typing import Optional

import numpy as np

from errors import ConfigError, NumericError, ShapeError
from gradop import FixedKernelConv
from models import FusionMode, MTAConfig, PaddingMode
from tensor_core import (ParamStore, Tensor, conv2d, global_avg_pool, global_max_pool,
                         he_normal, relu, sigmoid)

logger = logging.getLogger(__name__)


class MTAState:
    """
    Параметры одного модуля MTA.
    shared_net используется обоими путями пулинга (один набор весов).
    learnable_gate=True заменяет MT-гейт обучаемой depthwise-свёрткой 3x3.
    """

    def __init__(self, config: MTAConfig, channels: int, store: ParamStore, prefix: str,
                 rng: np.random.Generator, learnable_gate: bool = False):
        if config.channels and config.channels != channels:
            raise ConfigError(
                f"{prefix}: mta.channels={config.channels} не совпадает с каналами блока {channels}")
        hidden = channels // config.reduction
        if hidden < 1:
            raise ConfigError(
                f"{prefix}: channels/reduction < 1 ({channels}/{config.reduction}); уменьшите mta.reduction")
        self.config = config
        self.channels = channels
        self.prefix = prefix
        self.learnable_gate = learnable_gate

        self.fc1 = store.register(f"{prefix}.shared.fc1.weight", he_normal(rng, (hidden, channels, 1, 1)))
        self.fc2 = store.register(f"{prefix}.shared.fc2.weight", he_normal(rng, (channels, hidden, 1, 1)))
        self.alpha = store.register(f"{prefix}.alpha", np.full((1,), config.alpha_init))

        if learnable_gate:
            self.gate_weight = store.register(f"{prefix}.mt_conv.weight", he_normal(rng, (channels, 1, 3, 3)))
            self.mt_kernel = None
        else:
            self.gate_weight = None
            self.mt_kernel = FixedKernelConv(config.operator, channels, config.mode,
                                             PaddingMode.replicate(1), store, prefix=f"{prefix}.mt")

    def _check(self, F: Tensor):
        if F.ndim != 4 or F.shape[1] != self.channels:
            raise ShapeError(f"{self.prefix}: ожидалось {self.channels} каналов, получен вход {F.shape}")

    def shared_net(self, pooled: Tensor) -> Tensor:
        return conv2d(relu(conv2d(pooled, self.fc1)), self.fc2)

    def dp_gate(self, F: Tensor) -> Tensor:
        """Сырые (до сигмоиды) значения канального внимания, форма (n, C, 1, 1)"""
        self._check(F)
        return self.shared_net(global_avg_pool(F)) + self.shared_net(global_max_pool(F))

    def mt_gate(self, F: Tensor) -> Tensor:
        self._check(F)
        if self.learnable_gate:
            return conv2d(F, self.gate_weight, padding=PaddingMode.zero(1), groups=self.channels)
        return self.mt_kernel(F)

    def attention(self, F: Tensor) -> Tensor:
        """A = sigmoid(M_c) + sigmoid(alpha * M_t), значения в (0, 2)"""
        if not np.all(np.isfinite(self.alpha.data)):
            raise NumericError(f"{self.prefix}.alpha: значение не конечно ({self.alpha.data})")
        return sigmoid(self.dp_gate(F)) + sigmoid(self.alpha * self.mt_gate(F))

    def __call__(self, F: Tensor) -> Tensor:
        A = self.attention(F)
        if self.config.fusion_mode == FusionMode.LITERAL:
            return A
        return F * A


def dp_gate(F: Tensor, state: MTAState) -> Tensor:
    return state.dp_gate(F)


def mt_gate(F: Tensor, state: MTAState) -> Tensor:
    return state.mt_gate(F)


def mta_forward(F: Tensor, state: MTAState, config: Optional[MTAConfig] = None) -> Tensor:
    """F' по текущему режиму слияния (config перекрывает режим состояния)"""
    if config is not None and config.fusion_mode != state.config.fusion_mode:
        A = state.attention(F)
        return A if config.fusion_mode == FusionMode.LITERAL else F * A
    return state(F)
