# -*- coding: utf-8 -*-
"""
Общие фикстуры тестов
"""

import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))
sys.path.insert(0, str(Path(__file__).resolve().parent))

from models import BackboneSpec, MTAConfig, ModelSpec, SynthConfig, TrainConfig, Variant  # noqa: E402


def pytest_collection_modifyitems(config, items):
    if os.environ.get("GOCNET_RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="долгий тест: задайте GOCNET_RUN_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def tiny_backbone():
    """Две стадии по одному блоку, 8 каналов максимум, вход 8x8"""
    return BackboneSpec(stage_channels=(4, 8), blocks_per_stage=1, image_size=8)


@pytest.fixture
def tiny_spec(tiny_backbone):
    def make(variant=Variant.GOCNET_DUAL, **mta):
        return ModelSpec(variant=variant, backbone=tiny_backbone,
                         mta=MTAConfig(reduction=2, **mta), seed=3)
    return make


@pytest.fixture
def fast_train_config():
    return TrainConfig(lr0=0.01, gamma=0.9, batch_size=8, epochs=2, seed=5)


@pytest.fixture
def tiny_synth_config():
    return SynthConfig(image_size=16, patch_radius=4, blend_sigma=1.5, count=12, seed=11,
                       fingerprint_period=4, train_fraction=0.75)
