import numpy as np

from pointkan.errors import InvalidArgumentError


def _check_labels(labels, classes: int):
    labels = np.asarray(labels, dtype=np.intp)
    if np.any(labels < 0) or np.any(labels >= classes):
        msg = f"Labels {labels.tolist()} outside the range of {classes} classes"
        raise InvalidArgumentError(msg)
    return labels


def cross_entropy(scores, label: int) -> tuple[float, np.ndarray]:
    """
    `-log softmax(scores)[label]` and its gradient `softmax(scores) -
    onehot(label)` with respect to the scores.
    """
    scores = np.asarray(scores, dtype=np.float64)
    (label,) = _check_labels([label], len(scores))
    shifted = scores - scores.max()
    log_z = np.log(np.sum(np.exp(shifted)))
    grad = np.exp(shifted - log_z)
    grad[label] -= 1.0
    return float(log_z - shifted[label]), grad


def cross_entropy_batch(scores, labels) -> tuple[float, np.ndarray]:
    """Mean loss over a (B, C) batch; the gradient is divided by B"""
    scores = np.asarray(scores, dtype=np.float64)
    labels = _check_labels(labels, scores.shape[1])
    if len(labels) != len(scores):
        msg = f"{len(labels)} labels for {len(scores)} score rows"
        raise InvalidArgumentError(msg)
    rows = np.arange(len(scores))
    shifted = scores - scores.max(axis=1, keepdims=True)
    log_z = np.log(np.sum(np.exp(shifted), axis=1))
    loss = np.mean(log_z - shifted[rows, labels])
    grad = np.exp(shifted - log_z[:, None])
    grad[rows, labels] -= 1.0
    return float(loss), grad / len(scores)
