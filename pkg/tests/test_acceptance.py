# -*- coding: utf-8 -*-
"""
Приёмочные проверки обучения на синтетических данных (долгие).

Запуск: GOCNET_RUN_SLOW=1 pytest -m slow
"""

import pytest

from ablation import run_ablation
from models import AugmentConfig, BackboneSpec, ModelSpec, SynthConfig, TrainConfig, Variant
from synth import synth_generate
from trainer import train_run

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def mixed_manifest(tmp_path_factory):
    config = SynthConfig(kind="mixed", count=600, seed=7, train_fraction=0.8333333333)
    return synth_generate(config, tmp_path_factory.mktemp("acceptance") / "mixed")


class TestAcceptance:
    """Обучение мини-остова до разделения синтетических подделок"""

    def test_basenet_fits_separable_corpus(self, tmp_path):
        manifest = synth_generate(SynthConfig(kind="blend-patch", count=200, seed=7, blend_noise=12.0),
                                  tmp_path / "synth")
        spec = ModelSpec(variant=Variant.BASENET, backbone=BackboneSpec.mini(), seed=7)
        result = train_run(spec, TrainConfig(epochs=5, seed=7), manifest, tmp_path / "run",
                           AugmentConfig.disabled())
        assert max(record["train_acc"] for record in result.metrics) >= 0.99

    def test_single_stream_study(self, tmp_path, mixed_manifest):
        df = run_ablation("single", ModelSpec(backbone=BackboneSpec.mini(), seed=7),
                          TrainConfig(epochs=10, seed=7), mixed_manifest, tmp_path)
        acc = dict(zip(df["model"], df["test_acc"]))
        assert acc["TP-BaseNet"] >= acc["BaseNet"]

    def test_dual_stream_study(self, tmp_path, mixed_manifest):
        df = run_ablation("dual", ModelSpec(backbone=BackboneSpec.mini(), seed=7),
                          TrainConfig(epochs=10, seed=7), mixed_manifest, tmp_path)
        rows = df.set_index("model")
        gocnet = rows.loc["GocNet"]
        assert gocnet["test_acc"] >= rows.drop(index="GocNet")["test_acc"].max() - 0.01
        assert gocnet["test_acc"] >= 0.95
        assert gocnet["test_eer"] <= 0.10
