"""Seeded synthetic traffic-like tables for demos and end-to-end tests.

Classes are Gaussian blobs with well-separated means, so a competent
pipeline should score high accuracy; everything is reproducible from
the seed.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import UsageError
from .jsonio import write_json

NOMINAL_CATEGORIES = ("tcp", "udp", "icmp")


def _class_means(n_classes: int, n_features: int, separation: float) -> np.ndarray:
    if n_classes == 2:
        u = np.ones(n_features) / np.sqrt(n_features)
        return np.stack([separation * u, -separation * u])
    means = np.zeros((n_classes, n_features))
    for c in range(n_classes):
        means[c, c % n_features] = separation * (1.0 if (c // n_features) % 2 == 0 else -1.0)
    return means


def synthetic_arrays(
    n_rows: int,
    n_features: int,
    n_classes: int = 2,
    separation: float = 3.0,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Blob features and integer labels, balanced across classes."""
    if n_rows < n_classes or n_classes < 2 or n_features < 1:
        raise UsageError("need at least one feature and one row per class")
    rng = np.random.default_rng(seed)
    y = np.arange(n_rows, dtype=np.int64) % n_classes
    y = y[rng.permutation(n_rows)]
    X = _class_means(n_classes, n_features, separation)[y] + rng.standard_normal(
        (n_rows, n_features)
    )
    return X, y


def write_synthetic(
    out_dir: str | Path,
    n_rows: int = 1000,
    n_features: int = 8,
    n_classes: int = 2,
    separation: float = 3.0,
    seed: int = 0,
    missing_rate: float = 0.0,
    with_nominal: bool = False,
) -> tuple[Path, Path]:
    """Write data.csv and schema.json under out_dir; returns both paths.

    `missing_rate` blanks that fraction of feature cells to exercise
    imputation; `with_nominal` appends a protocol-style categorical
    column correlated with the class.
    """
    if not 0.0 <= missing_rate < 1.0:
        raise UsageError("missing_rate must lie in [0, 1)")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    X, y = synthetic_arrays(n_rows, n_features, n_classes, separation, seed)
    rng = np.random.default_rng(seed + 1)
    mask = rng.random(X.shape) < missing_rate if missing_rate > 0 else None
    if with_nominal:
        pick = rng.random(n_rows)
        protos = [
            NOMINAL_CATEGORIES[y[i] % 3 if pick[i] < 0.8 else rng.integers(3)]
            for i in range(n_rows)
        ]

    feature_names = [f"f{j}" for j in range(n_features)]
    csv_path = out_dir / "data.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        header = list(feature_names) + (["proto"] if with_nominal else []) + ["label"]
        w.writerow(header)
        for i in range(n_rows):
            row = [
                "" if mask is not None and mask[i, j] else repr(float(X[i, j]))
                for j in range(n_features)
            ]
            if with_nominal:
                row.append(protos[i])
            row.append(f"class{y[i]}")
            w.writerow(row)

    columns = [{"name": name, "kind": "numeric"} for name in feature_names]
    if with_nominal:
        columns.append({"name": "proto", "kind": "nominal"})
    columns.append({"name": "label", "kind": "label"})
    schema_path = out_dir / "schema.json"
    write_json(schema_path, {"columns": columns, "has_header": True})
    return csv_path, schema_path
