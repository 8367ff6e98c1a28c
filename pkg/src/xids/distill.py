"""Classifier training and teacher-to-student distillation.

The teacher trains on hard labels with softmax cross-entropy.  The
student trains against a frozen teacher on a blended objective:

  loss = (1 - alpha) * ce(labels, student)
       + alpha * T^2 * kl(softmax(teacher / T) || softmax(student / T))

whose gradient w.r.t. the student logits is

  (1 - alpha) * (softmax(s) - onehot) / n + alpha * T * (p_s - p_t) / n

with p_s, p_t the tempered softmaxes.  Inference always runs at T = 1.
"""

from __future__ import annotations

import numpy as np

from .errors import DivergenceError, UsageError
from .nets import (
    DenseNet,
    backward,
    build_net,
    forward,
    forward_cache,
    log_softmax,
    make_optimizer,
    softmax,
    softmax_cross_entropy,
)


def tempered_softmax(logits: np.ndarray, temperature: float) -> np.ndarray:
    if temperature <= 0:
        raise UsageError("temperature must be positive")
    return softmax(np.asarray(logits, dtype=np.float64) / temperature)


def distillation_loss(
    student_logits: np.ndarray,
    teacher_logits: np.ndarray,
    labels: np.ndarray,
    temperature: float,
    alpha: float,
):
    """Blended hard/soft loss and its gradient w.r.t. the student logits."""
    if not 0.0 <= alpha <= 1.0:
        raise UsageError("alpha must lie in [0, 1]")
    s = np.asarray(student_logits, dtype=np.float64)
    t = np.asarray(teacher_logits, dtype=np.float64)
    if s.shape != t.shape:
        raise UsageError("student and teacher logits must have the same shape")
    n = s.shape[0]
    hard, hard_grad = softmax_cross_entropy(s, labels)

    p_t = tempered_softmax(t, temperature)
    p_s = tempered_softmax(s, temperature)
    log_pt = log_softmax(t / temperature)
    log_ps = log_softmax(s / temperature)
    kl_terms = np.where(p_t > 0.0, p_t * (log_pt - log_ps), 0.0)
    soft = float(kl_terms.sum(axis=1).mean())

    loss = (1.0 - alpha) * hard + alpha * temperature**2 * soft
    grad = (1.0 - alpha) * hard_grad + alpha * temperature * (p_s - p_t) / n
    return loss, grad


def classifier_loss_and_grads(net: DenseNet, X: np.ndarray, labels: np.ndarray):
    logits, caches = forward_cache(net, X)
    loss, g_logits = softmax_cross_entropy(logits, labels)
    grads, _ = backward(net, caches, g_logits)
    return loss, grads


def distill_loss_and_grads(
    net: DenseNet,
    X: np.ndarray,
    teacher_logits: np.ndarray,
    labels: np.ndarray,
    temperature: float,
    alpha: float,
):
    logits, caches = forward_cache(net, X)
    loss, g_logits = distillation_loss(logits, teacher_logits, labels, temperature, alpha)
    grads, _ = backward(net, caches, g_logits)
    return loss, grads


def _run_epochs(net, n: int, epochs: int, batch_size: int, rng, opt, step, what: str):
    if epochs < 1 or batch_size < 1:
        raise UsageError("epochs and batch_size must be positive")
    params = net.parameters()
    history = []
    for epoch in range(epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            # overflow surfaces as a non-finite loss below, not a warning
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads = step(idx)
            if not np.isfinite(loss):
                raise DivergenceError(f"{what} training diverged at epoch {epoch}", epoch=epoch)
            opt.step(params, grads)
            loss_sum += loss * idx.size
        history.append({"epoch": epoch, "loss": loss_sum / n})
    return history


def train_teacher(
    X: np.ndarray,
    y: np.ndarray,
    hidden: list[int],
    n_classes: int,
    epochs: int = 100,
    batch_size: int = 64,
    lr: float = 0.001,
    optimizer: str = "adam",
    seed: int = 0,
) -> tuple[DenseNet, list[dict]]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    rng = np.random.default_rng(seed)
    net = build_net([X.shape[1]] + list(hidden) + [n_classes], rng, "linear")
    opt = make_optimizer(optimizer, lr)
    history = _run_epochs(
        net, X.shape[0], epochs, batch_size, rng, opt,
        lambda idx: classifier_loss_and_grads(net, X[idx], y[idx]),
        "teacher",
    )
    return net, history


def train_student(
    X: np.ndarray,
    y: np.ndarray,
    teacher: DenseNet,
    hidden: list[int],
    epochs: int = 100,
    batch_size: int = 64,
    lr: float = 0.001,
    temperature: float = 2.0,
    alpha: float = 0.5,
    optimizer: str = "adam",
    seed: int = 0,
) -> tuple[DenseNet, list[dict]]:
    """Distill the frozen teacher into a smaller student head."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    rng = np.random.default_rng(seed)
    net = build_net([X.shape[1]] + list(hidden) + [teacher.out_dim], rng, "linear")
    opt = make_optimizer(optimizer, lr)

    def step(idx):
        t_logits = forward(teacher, X[idx])
        return distill_loss_and_grads(net, X[idx], t_logits, y[idx], temperature, alpha)

    history = _run_epochs(net, X.shape[0], epochs, batch_size, rng, opt, step, "student")
    return net, history


def predict(net: DenseNet, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(labels, probabilities) at temperature 1; ties go to the lowest index."""
    probs = softmax(forward(net, X))
    return probs.argmax(axis=1).astype(np.int64), probs


def predict_proba(net: DenseNet, X: np.ndarray) -> np.ndarray:
    return softmax(forward(net, X))
