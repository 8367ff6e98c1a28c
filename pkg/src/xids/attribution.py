"""Additive break-down attributions for any vector-valued predictor.

A predictor is a callable mapping an (n, d) matrix to (n, C) outputs
(here: class probabilities).  Conditional expectations are estimated by
overwriting the conditioned features into every background row and
averaging the predictions.  Walking the features in some order and
taking successive differences telescopes from the background mean to
the exact prediction for the instance, so the contributions add up to
the model output with no residual beyond float rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError


def _check_inputs(background: np.ndarray, instance: np.ndarray):
    background = np.asarray(background, dtype=np.float64)
    instance = np.asarray(instance, dtype=np.float64)
    if background.ndim != 2 or background.shape[0] == 0:
        raise UsageError("background must be a non-empty 2-d array")
    if instance.shape != (background.shape[1],):
        raise UsageError("instance width must match the background")
    return background, instance


def mean_prediction(predict_fn, background: np.ndarray) -> np.ndarray:
    """Average model output over the background rows (the intercept)."""
    background = np.asarray(background, dtype=np.float64)
    return np.asarray(predict_fn(background), dtype=np.float64).mean(axis=0)


def conditional_expectation(
    predict_fn, background: np.ndarray, instance: np.ndarray, features
) -> np.ndarray:
    """E[f(X) | the given features pinned to the instance's values].

    Estimated by substitution: copy the background, overwrite the pinned
    columns with the instance's values, average the predictions.
    """
    background, instance = _check_inputs(background, instance)
    features = list(features)
    Z = background.copy()
    if features:
        Z[:, features] = instance[features]
    return np.asarray(predict_fn(Z), dtype=np.float64).mean(axis=0)


def contribution_of(
    predict_fn, background: np.ndarray, instance: np.ndarray, features, given=()
) -> np.ndarray:
    """Joint contribution of `features` on top of the already-pinned `given` set."""
    given = sorted(set(given))
    joint = sorted(set(given) | set(features))
    if len(joint) == len(given):
        raise UsageError("features must add something beyond the conditioning set")
    with_both = conditional_expectation(predict_fn, background, instance, joint)
    base = conditional_expectation(predict_fn, background, instance, given)
    return with_both - base


def marginal_importance_order(
    predict_fn, background: np.ndarray, instance: np.ndarray, target_class: int
) -> list[int]:
    """Features sorted by |single-feature contribution| for the target class.

    Descending magnitude; ties break toward the lower feature index.
    """
    background, instance = _check_inputs(background, instance)
    v0 = mean_prediction(predict_fn, background)
    d = background.shape[1]
    scores = np.empty(d)
    for j in range(d):
        delta = conditional_expectation(predict_fn, background, instance, [j]) - v0
        scores[j] = abs(delta[target_class])
    return sorted(range(d), key=lambda j: (-scores[j], j))


@dataclass
class Breakdown:
    """Per-feature additive contributions for one instance.

    `contributions[j]` is feature j's step, indexed by feature, with
    `order` recording the walk.  For every class c,
    intercept[c] + contributions[:, c].sum() equals prediction[c] up to
    float rounding.
    """

    order: list[int]
    intercept: np.ndarray
    contributions: np.ndarray
    prediction: np.ndarray
    target_class: int

    @property
    def local_accuracy_gap(self) -> float:
        total = self.intercept + self.contributions.sum(axis=0)
        return float(np.max(np.abs(total - self.prediction)))


def breakdown(
    predict_fn,
    background: np.ndarray,
    instance: np.ndarray,
    target_class: int | None = None,
    order: list[int] | None = None,
) -> Breakdown:
    """Walk the features and take successive conditional differences.

    Without an explicit order, features are walked by descending
    single-feature importance for the target class (default: the class
    the model predicts for the instance).
    """
    background, instance = _check_inputs(background, instance)
    d = background.shape[1]
    single = np.asarray(predict_fn(instance[None, :]), dtype=np.float64)[0]
    if target_class is None:
        target_class = int(np.argmax(single))
    if not 0 <= target_class < single.shape[0]:
        raise UsageError(f"target_class {target_class} out of range")
    if order is None:
        order = marginal_importance_order(predict_fn, background, instance, target_class)
    else:
        order = [int(j) for j in order]
        if sorted(order) != list(range(d)):
            raise UsageError("order must be a permutation of all feature indices")

    v0 = mean_prediction(predict_fn, background)
    contributions = np.zeros((d, single.shape[0]))
    pinned: list[int] = []
    prev = v0
    for j in order:
        pinned.append(j)
        cur = conditional_expectation(predict_fn, background, instance, pinned)
        contributions[j] = cur - prev
        prev = cur
    return Breakdown(
        order=order,
        intercept=v0,
        contributions=contributions,
        prediction=prev,
        target_class=target_class,
    )


def explain_instance(
    predict_fn,
    background: np.ndarray,
    instance: np.ndarray,
    feature_names: list[str],
    target_class: int | None = None,
    order: list[int] | None = None,
) -> dict:
    """Breakdown for one instance as a waterfall-style report dict.

    Rows follow the walk order; each carries the feature's contribution
    to the target class and the cumulative prediction after pinning it.
    """
    bd = breakdown(predict_fn, background, instance, target_class, order)
    if len(feature_names) != bd.contributions.shape[0]:
        raise UsageError("feature_names length must match the feature count")
    t = bd.target_class
    rows = []
    cumulative = float(bd.intercept[t])
    for j in bd.order:
        c = float(bd.contributions[j, t])
        cumulative += c
        rows.append({"feature": feature_names[j], "contribution": c, "cumulative": cumulative})
    return {
        "target_class": t,
        "intercept": float(bd.intercept[t]),
        "prediction": float(bd.prediction[t]),
        "local_accuracy_gap": bd.local_accuracy_gap,
        "rows": rows,
    }
