"""Classification metrics, inference timing, and model footprint.

The confusion matrix is indexed [true_class, predicted_class].  Any
precision/recall/f1 with a zero denominator is reported as 0.0 rather
than NaN so aggregate rows stay finite on degenerate class mixes.
"""

from __future__ import annotations

import statistics
import time

import numpy as np

from .errors import UsageError
from .jsonio import canonical_json
from .nets import DenseNet, count_parameters, forward, softmax


def confusion(y_true, y_pred, n_classes: int) -> np.ndarray:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise UsageError("y_true and y_pred must have the same length")
    for arr in (y_true, y_pred):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise UsageError("class index out of range")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def metrics(y_true, y_pred, class_names: list[str]) -> dict:
    """Accuracy, per-class precision/recall/f1/support, macro and weighted rows."""
    n_classes = len(class_names)
    cm = confusion(y_true, y_pred, n_classes)
    total = int(cm.sum())
    if total == 0:
        raise UsageError("cannot score an empty label vector")
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    per_class = []
    for c in range(n_classes):
        tp = float(cm[c, c])
        p = _safe_div(tp, float(predicted[c]))
        r = _safe_div(tp, float(support[c]))
        f1 = _safe_div(2.0 * p * r, p + r)
        per_class.append(
            {
                "class": class_names[c],
                "precision": p,
                "recall": r,
                "f1": f1,
                "support": int(support[c]),
            }
        )
    weights = support / total

    def agg(key, w=None):
        vals = np.array([pc[key] for pc in per_class])
        return float(vals.mean()) if w is None else float((vals * w).sum())

    return {
        "accuracy": float(np.trace(cm) / total),
        "per_class": per_class,
        "macro": {k: agg(k) for k in ("precision", "recall", "f1")},
        "weighted": {k: agg(k, weights) for k in ("precision", "recall", "f1")},
        "confusion": cm.tolist(),
        "n_samples": total,
    }


def time_inference(
    net: DenseNet,
    X: np.ndarray,
    batch_size: int | None = None,
    repeats: int = 5,
    warmup: int = 1,
) -> dict:
    """Wall-clock softmax inference timing, median over repeated sweeps.

    Each sweep pushes every batch through the net once.  Warm-up sweeps
    run first and are discarded.
    """
    if repeats < 3:
        raise UsageError("need at least 3 timed repeats")
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n == 0:
        raise UsageError("cannot time an empty matrix")
    bs = n if batch_size is None else int(batch_size)
    if bs < 1:
        raise UsageError("batch_size must be positive")
    starts = range(0, n, bs)

    def sweep() -> float:
        t0 = time.perf_counter()
        for s in starts:
            softmax(forward(net, X[s : s + bs]))
        return time.perf_counter() - t0

    for _ in range(warmup):
        sweep()
    seconds = [sweep() for _ in range(repeats)]
    med = statistics.median(seconds)
    n_batches = len(list(starts))
    return {
        "repeats": repeats,
        "warmup": warmup,
        "batch_size": bs,
        "n_rows": n,
        "n_batches": n_batches,
        "total_ms_median": med * 1000.0,
        "per_batch_ms": med * 1000.0 / n_batches,
        "per_sample_ms": med * 1000.0 / n,
    }


def analytic_memory(net: DenseNet) -> dict:
    """Deterministic footprint: 8 bytes per parameter plus metadata bytes.

    Counted from shapes, never measured from the process, so reruns
    agree byte-for-byte.
    """
    meta = canonical_json(
        {
            "layers": [
                {"in": l.fan_in, "out": l.fan_out, "activation": l.activation}
                for l in net.layers
            ]
        }
    )
    n_params = count_parameters(net)
    return {
        "parameters": n_params,
        "parameter_bytes": n_params * 8,
        "metadata_bytes": len(meta.encode("utf-8")),
        "total_bytes": n_params * 8 + len(meta.encode("utf-8")),
    }
