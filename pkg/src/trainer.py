# -*- coding: utf-8 -*-
"""
Обучение: Adam, экспоненциальное затухание LR по эпохам, журнал метрик,
контрольные точки и продолжение обучения.

Порядок батчей и аугментации зависят только от (seed, epoch), поэтому продолжение
с контрольной точки эпохи k воспроизводит хвост журнала побитово.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from tqdm import tqdm

from checkpoint import load_checkpoint, restore_into, save_checkpoint
from data_loader import DataLoader
from errors import ConfigError, DataError, NumericError
from evalmetrics import evaluate
from export_manager import ExportManager
from models import AugmentConfig, DatasetManifest, EvalReport, ModelSpec, ScoreSet, Split, TrainConfig
from network import GocNet, build
from tensor_core import ParamStore, Tensor, no_grad, softmax, softmax_cross_entropy

logger = logging.getLogger(__name__)

METRICS_FILE = "metrics.jsonl"
LAST_CHECKPOINT = "last.gock"


def lr_schedule(epoch: int, config: TrainConfig) -> float:
    """lr_t = lr0 * gamma^epoch"""
    if epoch < 0:
        raise ConfigError(f"Номер эпохи не может быть отрицательным: {epoch}")
    return config.lr0 * config.gamma ** epoch


def adam_step(store: ParamStore, t: int, lr: float, config: TrainConfig):
    """
    Один шаг Adam с поправкой смещения моментов.
    Отсутствующий градиент считается нулевым; fixed и buffer не трогаются.
    """
    if t < 1:
        raise ConfigError(f"Номер шага Adam должен быть >= 1: {t}")
    trainable = store.trainable()
    for name, tensor in trainable:
        if tensor.grad is not None and not np.all(np.isfinite(tensor.grad)):
            raise NumericError(f"NaN/Inf в градиенте параметра '{name}'")

    bias1 = 1.0 - config.beta1 ** t
    bias2 = 1.0 - config.beta2 ** t
    for name, tensor in trainable:
        grad = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        m, v = store.moments(name)
        m *= config.beta1
        m += (1.0 - config.beta1) * grad
        v *= config.beta2
        v += (1.0 - config.beta2) * grad * grad
        m_hat = m / bias1
        v_hat = v / bias2
        tensor.data -= (lr * m_hat / (np.sqrt(v_hat) + config.epsilon)).astype(tensor.data.dtype)


def train_step(model: GocNet, images: Tensor, labels: np.ndarray, t: int, lr: float,
               config: TrainConfig) -> Tuple[float, int]:
    """Прямой и обратный проход + шаг Adam. Возвращает (loss, число верных)"""
    model.train()
    model.store.zero_grads()
    logits = model(images)
    loss = softmax_cross_entropy(logits, labels)
    loss.backward()
    adam_step(model.store, t, lr, config)
    correct = int((logits.data.argmax(axis=1) == labels).sum())
    return loss.item(), correct


def score_model(model: GocNet, loader: DataLoader, split=Split.TEST) -> Tuple[ScoreSet, np.ndarray]:
    """Вероятности класса fake и предсказания argmax в режиме Eval"""
    previous = model.mode
    model.eval()
    scores, labels, predictions = [], [], []
    try:
        with no_grad():
            for images, batch_labels in loader.batches(split, train=False):
                logits = model(images).data.astype(np.float64)
                scores.append(softmax(logits)[:, 1])
                predictions.append(logits.argmax(axis=1) == 1)
                labels.append(batch_labels)
    finally:
        model.mode = previous
    return ScoreSet(np.concatenate(scores), np.concatenate(labels)), np.concatenate(predictions)


def evaluate_model(model: GocNet, loader: DataLoader, split=Split.TEST) -> EvalReport:
    scores, predictions = score_model(model, loader, split)
    return evaluate(scores, predictions)


@dataclass
class TrainResult:
    metrics: List[Dict] = field(default_factory=list)
    checkpoint: Optional[Path] = None
    steps: int = 0
    report: Optional[EvalReport] = None


class Trainer:
    """Цикл обучения одной сети на одном манифесте"""

    def __init__(self, spec: ModelSpec, config: TrainConfig, manifest: DatasetManifest,
                 output_dir: Union[str, Path], augment_config: Optional[AugmentConfig] = None):
        if not manifest.split(Split.TRAIN):
            raise DataError("В манифесте нет записей выборки train")
        self.spec = spec
        self.config = config
        self.model, self.store = build(spec)
        self.loader = DataLoader(manifest, spec.backbone.image_size, config.batch_size,
                                 augment_config, config.seed)
        self.has_test = bool(manifest.split(Split.TEST))
        self.exporter = ExportManager(output_dir)
        self.checkpoint_dir = self.exporter.output_dir / "checkpoints"

    def _metadata(self, epoch: int) -> Dict:
        return {
            "train": {"seed": self.config.seed, "lr0": self.config.lr0, "gamma": self.config.gamma,
                      "batch_size": self.config.batch_size, "epochs": self.config.epochs},
            "rng": {"seed": self.config.seed, "next_epoch": epoch,
                    "streams": ["shuffle", "augment"]},
        }

    def _save(self, epoch: int, step: int) -> Path:
        last = self.checkpoint_dir / LAST_CHECKPOINT
        save_checkpoint(last, self.store, self.spec, epoch, step, self._metadata(epoch))
        if epoch % self.config.checkpoint_every == 0 or epoch == self.config.epochs:
            save_checkpoint(self.checkpoint_dir / f"epoch_{epoch:03d}.gock", self.store, self.spec,
                            epoch, step, self._metadata(epoch))
        return last

    def resume(self, path: Union[str, Path]) -> Tuple[int, int]:
        """Восстановление параметров, буферов и моментов; возвращает (эпоха, шаг)"""
        checkpoint = load_checkpoint(path)
        if checkpoint.spec.to_dict() != self.spec.to_dict():
            raise ConfigError(f"Контрольная точка {path} собрана для другой конфигурации сети")
        restore_into(self.store, checkpoint)
        logger.info(f"[OK] Продолжение с {path}: эпоха {checkpoint.epoch}, шаг {checkpoint.step}")
        return checkpoint.epoch, checkpoint.step

    def run(self, resume_from: Optional[Union[str, Path]] = None, max_steps: Optional[int] = None) -> TrainResult:
        start_epoch, step = 0, 0
        if resume_from is not None:
            start_epoch, step = self.resume(resume_from)
            self.exporter.truncate_jsonl(METRICS_FILE, lambda r: r["epoch"] < start_epoch)
        else:
            self.exporter.path(METRICS_FILE).unlink(missing_ok=True)

        result = TrainResult(metrics=self.exporter.read_jsonl(METRICS_FILE), steps=step)
        last_good = Path(resume_from) if resume_from else None

        for epoch in range(start_epoch, self.config.epochs):
            lr = lr_schedule(epoch, self.config)
            total_loss, total_correct, seen = 0.0, 0, 0
            batches = self.loader.batches(Split.TRAIN, epoch, train=True)
            progress = tqdm(batches, total=self.loader.num_batches(Split.TRAIN),
                            desc=f"Эпоха {epoch + 1}/{self.config.epochs}", leave=False)
            for images, labels in progress:
                try:
                    loss, correct = train_step(self.model, images, labels, step + 1, lr, self.config)
                except NumericError as e:
                    logger.error(f"[!] Обучение разошлось на шаге {step + 1}: {e}. "
                                 f"Последняя корректная точка: {last_good or 'нет'}")
                    raise
                step += 1
                total_loss += loss * len(labels)
                total_correct += correct
                seen += len(labels)
                if max_steps is not None and step >= max_steps:
                    break

            record = {
                "epoch": epoch,
                "step": step,
                "lr": lr,
                "train_loss": total_loss / max(seen, 1),
                "train_acc": total_correct / max(seen, 1),
            }
            if self.has_test and (epoch + 1) % self.config.eval_every == 0:
                report = evaluate_model(self.model, self.loader)
                record.update({"test_acc": report.acc, "test_auc": report.auc, "test_eer": report.eer})
                result.report = report
            self.exporter.append_jsonl(METRICS_FILE, record)
            result.metrics.append(record)
            logger.info(f"[OK] Эпоха {epoch + 1}: loss={record['train_loss']:.4f} "
                        f"acc={record['train_acc']:.4f} lr={lr:g}")

            last_good = self._save(epoch + 1, step)
            result.checkpoint = last_good
            if max_steps is not None and step >= max_steps:
                break

        result.steps = step
        return result


def train_run(spec: ModelSpec, config: TrainConfig, manifest: DatasetManifest, output_dir: Union[str, Path],
              augment_config: Optional[AugmentConfig] = None,
              resume_from: Optional[Union[str, Path]] = None) -> TrainResult:
    """Полный запуск обучения: контрольные точки и metrics.jsonl в output_dir"""
    trainer = Trainer(spec, config, manifest, output_dir, augment_config)
    return trainer.run(resume_from)
