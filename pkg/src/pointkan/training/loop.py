import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from pointkan.blocks.model import CloudBatch, PointKan
from pointkan.errors import InvalidArgumentError
from pointkan.geometry import PERTURBATIONS, PointCloud, hierarchy_plan
from pointkan.training.loss import cross_entropy_batch
from pointkan.training.optim import OptimizerState, optimizer_step

log = logging.getLogger(__name__)

BATCH_SIZE = 8


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss: float
    train_acc: float
    test_acc: float

    def line(self) -> str:
        return (
            f"epoch {self.epoch} loss {self.loss:.6f}"
            f" train_acc {self.train_acc:.4f} test_acc {self.test_acc:.4f}"
        )


@dataclass
class TrainResult:
    epochs: list[EpochRecord] = field(default_factory=list)

    @property
    def final(self) -> EpochRecord | None:
        return self.epochs[-1] if self.epochs else None


@dataclass(frozen=True)
class EvalResult:
    overall_accuracy: float
    mean_class_accuracy: float
    # confusion[true, predicted]
    confusion: np.ndarray

    @property
    def count(self) -> int:
        return int(self.confusion.sum())

    def class_accuracies(self) -> dict[int, float]:
        totals = self.confusion.sum(axis=1)
        return {
            int(c): float(self.confusion[c, c] / totals[c])
            for c in np.flatnonzero(totals)
        }


def check_dataset(dataset: list[PointCloud], num_classes: int):
    if not dataset:
        msg = "Dataset is empty"
        raise InvalidArgumentError(msg)
    for i, cloud in enumerate(dataset):
        if cloud.label is None or not 0 <= cloud.label < num_classes:
            msg = f"Cloud {i} has label {cloud.label}, expecting 0 to {num_classes - 1}"
            raise InvalidArgumentError(msg)


class PlanCache:
    """Sampling plans of a fixed list of clouds, computed on first use"""

    def __init__(self, clouds: list[PointCloud], stages):
        self.clouds = clouds
        self.stages = stages
        self.plans = {}

    def batch(self, indices) -> CloudBatch:
        for i in indices:
            if i not in self.plans:
                self.plans[i] = hierarchy_plan(self.clouds[i].points, self.stages)
        return CloudBatch.from_clouds(
            [self.clouds[i] for i in indices],
            None,
            [self.plans[i] for i in indices],
        )


def accuracy_from_predictions(labels, predictions, num_classes: int) -> EvalResult:
    """
    Overall accuracy, and the mean of the per-class accuracies over the
    classes present in `labels`
    """
    labels = np.asarray(labels, dtype=np.intp)
    predictions = np.asarray(predictions, dtype=np.intp)
    if len(labels) == 0:
        msg = "Cannot compute accuracy of an empty set"
        raise InvalidArgumentError(msg)
    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(confusion, (labels, predictions), 1)
    totals = confusion.sum(axis=1)
    present = totals > 0
    per_class = np.diag(confusion)[present] / totals[present]
    return EvalResult(
        float(np.trace(confusion) / len(labels)),
        float(per_class.mean()),
        confusion,
    )


def evaluate(
    model: PointKan, dataset: list[PointCloud], plans: PlanCache | None = None
) -> EvalResult:
    """Accuracy of `model` in evaluation mode"""
    check_dataset(dataset, model.num_classes)
    plans = plans or PlanCache(dataset, model.config.stage_plan())
    was_training = model.training
    model.eval()
    try:
        predictions = []
        for start in range(0, len(dataset), 4 * BATCH_SIZE):
            batch = plans.batch(range(start, min(start + 4 * BATCH_SIZE, len(dataset))))
            predictions.append(np.argmax(model(batch), axis=1))
    finally:
        model.train(was_training)
    labels = [c.label for c in dataset]
    return accuracy_from_predictions(labels, np.concatenate(predictions), model.num_classes)


def train(
    model: PointKan,
    dataset: list[PointCloud],
    epochs: int,
    optimizer: OptimizerState,
    seed=0,
    *,
    test_set: list[PointCloud] | None = None,
    batch_size=BATCH_SIZE,
    epoch_log: Path | None = None,
    on_epoch: Callable[[EpochRecord], None] | None = None,
) -> TrainResult:
    """
    Mini-batch training. The shuffle order depends only on `seed`, and the
    sampling plan of every cloud is computed once and reused. Each epoch
    appends one line to `epoch_log` when given; `test_acc` is `nan` without
    a test set.
    """
    check_dataset(dataset, model.num_classes)
    if epochs < 0:
        msg = f"Epoch count must not be negative, not {epochs}"
        raise InvalidArgumentError(msg)
    if batch_size < 1:
        msg = f"Batch size must be positive, not {batch_size}"
        raise InvalidArgumentError(msg)

    rng = np.random.default_rng(seed)
    params = dict(model.named_parameters())
    stages = model.config.stage_plan()
    train_plans = PlanCache(dataset, stages)
    test_plans = PlanCache(test_set, stages) if test_set else None
    labels = np.array([c.label for c in dataset])

    result = TrainResult()
    for epoch in range(1, epochs + 1):
        optimizer.epoch = epoch - 1
        model.train()
        order = rng.permutation(len(dataset))
        loss_sum = 0.0
        correct = 0
        for start in range(0, len(order), batch_size):
            idx = order[start : start + batch_size]
            scores, cache = model.forward(train_plans.batch(idx))
            loss, d_scores = cross_entropy_batch(scores, labels[idx])
            _, grads = model.backward(d_scores, cache)
            optimizer_step(params, grads, optimizer)
            loss_sum += loss * len(idx)
            correct += int(np.sum(np.argmax(scores, axis=1) == labels[idx]))

        test_acc = float("nan")
        if test_set:
            test_acc = evaluate(model, test_set, test_plans).overall_accuracy
        record = EpochRecord(epoch, loss_sum / len(dataset), correct / len(dataset), test_acc)
        result.epochs.append(record)
        log.info(f"{record.line()} lr {optimizer.lr:.3g}")
        if epoch_log:
            with epoch_log.open("a") as fh:
                fh.write(record.line() + "\n")
        if on_epoch:
            on_epoch(record)
    model.train()
    return result


def robustness_eval(
    model: PointKan, dataset: list[PointCloud], perturbation: str, seed=0
) -> EvalResult:
    """Accuracy on a copy of `dataset` with a seeded perturbation applied"""
    if perturbation not in PERTURBATIONS:
        msg = (
            f"Unknown perturbation {perturbation!r},"
            f" expecting one of {tuple(PERTURBATIONS)}"
        )
        raise InvalidArgumentError(msg)
    func = PERTURBATIONS[perturbation]
    rng = np.random.default_rng(seed)
    return evaluate(model, [func(c, rng) for c in dataset])
