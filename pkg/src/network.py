# -*- coding: utf-8 -*-
"""
Сеть GocNet: базовые блоки ResNet, остов (mini / resnet18) и двухпотоковая сборка.

Поток 1: TP -> остов. Поток 2: остов с MTA в каждом базовом блоке.
Признаки потоков после глобального среднего пулинга складываются и подаются
в один полносвязный слой. Варианты для абляции описаны таблицей VARIANT_STREAMS.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import ConfigError, ShapeError
from gradop import FixedKernelConv, build_tp
from models import BackboneKind, BackboneSpec, MTAConfig, Mode, ModelSpec, PaddingMode, TPMode, Variant
from mta import MTAState
from seeding import make_rng
from tensor_core import (ParamStore, Tensor, batch_norm2d, conv2d, flatten, global_avg_pool,
                         he_normal, lecun_normal, linear, max_pool2d, relu)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StreamLayout:
    """Состав одного потока: TP на входе и вид MTA в блоках (none | fixed | conv)"""
    tp: bool = False
    mta: str = "none"

    @property
    def label(self) -> str:
        parts = (["tp"] if self.tp else []) + ([f"mta-{self.mta}"] if self.mta != "none" else [])
        return "+".join(parts) or "plain"


_PLAIN = StreamLayout()
_TP = StreamLayout(tp=True)
_MTA = StreamLayout(mta="fixed")

VARIANT_STREAMS: Dict[Variant, Tuple[StreamLayout, ...]] = {
    Variant.BASENET: (_PLAIN,),
    Variant.TP_BASENET: (_TP,),
    Variant.BASENET_MTA: (_MTA,),
    Variant.BASENET_MTA_CONV: (StreamLayout(mta="conv"),),
    Variant.GOCNET_SINGLE: (StreamLayout(tp=True, mta="fixed"),),
    Variant.GOCNET_DUAL: (_TP, _MTA),
    Variant.DUAL_PLAIN: (_PLAIN, _PLAIN),
    Variant.DUAL_TP: (_TP, _PLAIN),
    Variant.DUAL_MTA: (_PLAIN, _MTA),
}


class BatchNorm:
    """scale/shift - обучаемые, running_mean/running_var - буферы ParamStore"""

    def __init__(self, store: ParamStore, prefix: str, channels: int):
        self.prefix = prefix
        self.scale = store.register(f"{prefix}.scale", np.ones(channels))
        self.shift = store.register(f"{prefix}.shift", np.zeros(channels))
        self.running_mean = store.register(f"{prefix}.running_mean", np.zeros(channels),
                                           trainable=False, kind="buffer")
        self.running_var = store.register(f"{prefix}.running_var", np.ones(channels),
                                          trainable=False, kind="buffer")

    def __call__(self, x: Tensor, mode: Mode) -> Tensor:
        return batch_norm2d(x, self.scale, self.shift, self.running_mean.data, self.running_var.data, mode)


class BasicBlock:
    """
    Базовый блок ResNet: conv3x3-bn-relu-conv3x3-bn [-MTA] + shortcut, затем relu.
    MTA применяется к ветви после bn2 и до сложения с shortcut.
    """

    def __init__(self, store: ParamStore, prefix: str, in_channels: int, out_channels: int, stride: int,
                 rng: np.random.Generator, mta_config: Optional[MTAConfig] = None, learnable_gate: bool = False):
        self.prefix = prefix
        self.stride = stride
        self.conv1 = store.register(f"{prefix}.conv1.weight", he_normal(rng, (out_channels, in_channels, 3, 3)))
        self.bn1 = BatchNorm(store, f"{prefix}.bn1", out_channels)
        self.conv2 = store.register(f"{prefix}.conv2.weight", he_normal(rng, (out_channels, out_channels, 3, 3)))
        self.bn2 = BatchNorm(store, f"{prefix}.bn2", out_channels)

        self.downsample = None
        if stride != 1 or in_channels != out_channels:
            self.downsample = store.register(f"{prefix}.downsample.weight",
                                             he_normal(rng, (out_channels, in_channels, 1, 1)))
            self.downsample_bn = BatchNorm(store, f"{prefix}.downsample.bn", out_channels)

        self.mta = None
        if mta_config is not None:
            self.mta = MTAState(mta_config, out_channels, store, f"{prefix}.mta", rng, learnable_gate)

    def branch(self, x: Tensor, mode: Mode) -> Tensor:
        out = relu(self.bn1(conv2d(x, self.conv1, stride=self.stride, padding=PaddingMode.zero(1)), mode))
        out = self.bn2(conv2d(out, self.conv2, padding=PaddingMode.zero(1)), mode)
        if self.mta is not None:
            out = self.mta(out)
        return out

    def shortcut(self, x: Tensor, mode: Mode) -> Tensor:
        if self.downsample is None:
            return x
        return self.downsample_bn(conv2d(x, self.downsample, stride=self.stride), mode)

    def __call__(self, x: Tensor, mode: Mode) -> Tensor:
        out = self.branch(x, mode)
        identity = self.shortcut(x, mode)
        if out.shape != identity.shape:
            raise ShapeError(f"{self.prefix}: ветвь {out.shape} и shortcut {identity.shape} не совпадают")
        return relu(out + identity)


def basic_block_forward(x: Tensor, block: BasicBlock, mode: Mode = Mode.TRAIN) -> Tensor:
    return block(x, mode)


class Backbone:
    """Стем + стадии базовых блоков + глобальный средний пулинг -> (n, d)"""

    def __init__(self, store: ParamStore, prefix: str, spec: BackboneSpec, in_channels: int,
                 rng: np.random.Generator, mta_config: Optional[MTAConfig] = None, learnable_gate: bool = False):
        self.spec = spec
        stem_channels = spec.stage_channels[0]
        if spec.kind == BackboneKind.RESNET18:
            self.stem = store.register(f"{prefix}.stem.conv.weight",
                                       he_normal(rng, (stem_channels, in_channels, 7, 7)))
            self.stem_stride, self.stem_padding = 2, PaddingMode.zero(3)
        else:
            self.stem = store.register(f"{prefix}.stem.conv.weight",
                                       he_normal(rng, (stem_channels, in_channels, 3, 3)))
            self.stem_stride, self.stem_padding = 1, PaddingMode.zero(1)
        self.stem_bn = BatchNorm(store, f"{prefix}.stem.bn", stem_channels)

        self.blocks: List[BasicBlock] = []
        channels = stem_channels
        for stage, out_channels in enumerate(spec.stage_channels):
            for index in range(spec.blocks_per_stage):
                stride = 2 if stage > 0 and index == 0 else 1
                self.blocks.append(BasicBlock(store, f"{prefix}.stage{stage}.block{index}", channels,
                                              out_channels, stride, rng, mta_config, learnable_gate))
                channels = out_channels

    @property
    def feature_dim(self) -> int:
        return self.spec.feature_dim

    def __call__(self, x: Tensor, mode: Mode) -> Tensor:
        out = relu(self.stem_bn(conv2d(x, self.stem, stride=self.stem_stride, padding=self.stem_padding), mode))
        if self.spec.kind == BackboneKind.RESNET18:
            out = max_pool2d(out, 3, 2)
        for block in self.blocks:
            out = block(out, mode)
        return flatten(global_avg_pool(out))


class Stream:
    """Один поток: опциональный TP и остов"""

    def __init__(self, store: ParamStore, name: str, layout: StreamLayout, spec: ModelSpec,
                 rng: np.random.Generator):
        self.name = name
        self.layout = layout
        self.tp: Optional[FixedKernelConv] = None
        in_channels = 3
        if layout.tp:
            self.tp = build_tp(spec.tp, 3, store, prefix=f"{name}.tp")
            in_channels = self.tp.out_channels
        mta_config = spec.mta if layout.mta != "none" else None
        self.backbone = Backbone(store, name, spec.backbone, in_channels, rng,
                                 mta_config, learnable_gate=layout.mta == "conv")

    def __call__(self, x: Tensor, mode: Mode) -> Tensor:
        if self.tp is not None:
            x = self.tp(x)
        return self.backbone(x, mode)


class GocNet:
    """
    Классификатор real/fake из одного или двух потоков.
    Режим batch norm переключается train()/eval().
    """

    def __init__(self, spec: ModelSpec, store: Optional[ParamStore] = None):
        self.spec = spec
        self.store = store if store is not None else ParamStore()
        self.mode = Mode.TRAIN
        rng = make_rng(spec.seed, "init")
        layouts = VARIANT_STREAMS[spec.variant]
        self.streams = [Stream(self.store, f"stream{i + 1}", layout, spec, rng)
                        for i, layout in enumerate(layouts)]
        dim = spec.backbone.feature_dim
        self.fc_weight = self.store.register("fc.weight", lecun_normal(rng, (spec.num_classes, dim)))
        self.fc_bias = self.store.register("fc.bias", np.zeros(spec.num_classes))
        logger.info(f"[OK] Сеть {spec.variant.value}: потоков {len(self.streams)}, "
                    f"параметров {self.store.count('param')}")

    def train(self) -> "GocNet":
        self.mode = Mode.TRAIN
        return self

    def eval(self) -> "GocNet":
        self.mode = Mode.EVAL
        return self

    def _check_input(self, x: Tensor):
        size = self.spec.backbone.image_size
        if x.ndim != 4 or x.shape[1] != 3 or x.shape[2:] != (size, size):
            raise ShapeError(f"Вход сети {x.shape} не соответствует (n, 3, {size}, {size})")

    def stream_features(self, x: Tensor) -> List[Tensor]:
        """Векторы признаков (n, d) каждого потока"""
        self._check_input(x)
        return [stream(x, self.mode) for stream in self.streams]

    def classify(self, features: Sequence[Tensor]) -> Tensor:
        """Поэлементная сумма признаков потоков -> FC"""
        fused = features[0]
        for extra in features[1:]:
            fused = fused + extra
        return linear(fused, self.fc_weight, self.fc_bias)

    def forward(self, x: Tensor) -> Tensor:
        return self.classify(self.stream_features(x))

    __call__ = forward

    def fixed_kernels(self) -> List[FixedKernelConv]:
        """Все фиксированные свёртки сети (TP и MT-гейты)"""
        kernels = []
        for stream in self.streams:
            if stream.tp is not None:
                kernels.append(stream.tp)
            for block in stream.backbone.blocks:
                if block.mta is not None and block.mta.mt_kernel is not None:
                    kernels.append(block.mta.mt_kernel)
        return kernels

    def ledger(self) -> List[Dict]:
        """Реестр параметров: имя, форма, число значений, вид, группа"""
        rows = []
        for name, entry in self.store.items():
            rows.append({
                "name": name,
                "shape": list(entry.tensor.shape),
                "count": int(entry.tensor.data.size),
                "kind": entry.kind,
                "group": name.split(".", 1)[0],
            })
        return rows

    def group_totals(self, kind: str = "param") -> Dict[str, int]:
        totals: Dict[str, int] = {}
        for row in self.ledger():
            if row["kind"] == kind:
                totals[row["group"]] = totals.get(row["group"], 0) + row["count"]
        return totals


def build(spec: ModelSpec) -> Tuple[GocNet, ParamStore]:
    """Сборка сети с детерминированной инициализацией от spec.seed"""
    if spec.variant not in VARIANT_STREAMS:
        raise ConfigError(f"Вариант {spec.variant} не описан в таблице потоков")
    if spec.tp.mode == TPMode.SUMMED_SINGLE:
        logger.warning("[!] TP в режиме summed-single: на вход остова подаётся 1 канал")
    model = GocNet(spec)
    return model, model.store


def gocnet_forward(x: Tensor, model: GocNet) -> Tensor:
    return model.forward(x)
