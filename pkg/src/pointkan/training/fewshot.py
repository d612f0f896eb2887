"""
n-way m-shot episodes: each trial samples n classes, trains a fresh model on
exactly n × m clouds and tests it on 20 further clouds of every sampled
class.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from pointkan.blocks.model import PointKan
from pointkan.config import ModelConfig
from pointkan.errors import InvalidArgumentError
from pointkan.geometry import PointCloud
from pointkan.training.loop import evaluate, train
from pointkan.training.optim import OptimizerState

log = logging.getLogger(__name__)

TEST_PER_CLASS = 20


@dataclass(frozen=True)
class FewShotEpisode:
    way: int
    shot: int
    # Original labels of the sampled classes; episode label i is classes[i]
    classes: tuple[int, ...]
    # Indices into the dataset
    train: tuple[int, ...]
    test: tuple[int, ...]

    def relabel(self, dataset: list[PointCloud], indices) -> list[PointCloud]:
        episode_label = {c: i for i, c in enumerate(self.classes)}
        return [
            PointCloud(dataset[i].points, episode_label[dataset[i].label])
            for i in indices
        ]


def few_shot_episodes(
    labels, way: int, shot: int, trials: int, seed=0, test_per_class=TEST_PER_CLASS
) -> list[FewShotEpisode]:
    """Seeded episodes drawn from a dataset with the given labels"""
    labels = np.asarray(labels, dtype=np.intp)
    for name, val in (("way", way), ("shot", shot), ("trials", trials)):
        if val < 1:
            msg = f"Few-shot {name} must be positive, not {val}"
            raise InvalidArgumentError(msg)
    need = shot + test_per_class
    classes, counts = np.unique(labels, return_counts=True)
    eligible = classes[counts >= need]
    if len(eligible) < way:
        msg = (
            f"{way}-way {shot}-shot episodes need {way} classes with at least"
            f" {need} instances, but only {len(eligible)} have enough"
        )
        raise InvalidArgumentError(msg)

    rng = np.random.default_rng(seed)
    episodes = []
    for _ in range(trials):
        chosen = np.sort(rng.choice(eligible, size=way, replace=False))
        train_idx, test_idx = [], []
        for c in chosen:
            pick = rng.permutation(np.flatnonzero(labels == c))[:need]
            train_idx.extend(pick[:shot].tolist())
            test_idx.extend(pick[shot:].tolist())
        episodes.append(
            FewShotEpisode(
                way,
                shot,
                tuple(int(c) for c in chosen),
                tuple(train_idx),
                tuple(test_idx),
            )
        )
    return episodes


def mean_std(values) -> tuple[float, float]:
    """Mean and population standard deviation"""
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def run_few_shot(
    dataset: list[PointCloud],
    episodes: list[FewShotEpisode],
    make_config: Callable[[int], ModelConfig],
    epochs: int,
    optimizer_kind="sgd_momentum",
    seed=0,
) -> list[float]:
    """
    Trains a fresh `way`-class model per episode and returns the overall
    test accuracy of each.
    """
    accuracies = []
    for trial, ep in enumerate(episodes):
        cfg = make_config(ep.way)
        model = PointKan(cfg, seed=seed + trial)
        opt = OptimizerState.for_kind(optimizer_kind, epochs)
        train(model, ep.relabel(dataset, ep.train), epochs, opt, seed + trial)
        acc = evaluate(model, ep.relabel(dataset, ep.test)).overall_accuracy
        log.info(f"trial {trial + 1}: classes {ep.classes} accuracy {acc:.4f}")
        accuracies.append(acc)
    return accuracies
