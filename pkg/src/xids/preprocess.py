"""Table encoding: imputation, one-hot and ordinal codes, standardization.

A Preprocessor is fitted once on a training table and then applied to
any table with the same schema.  Fitting learns imputation values,
per-column standardization statistics, nominal category vocabularies,
and the class list; applying replays them without touching the data it
sees.  Feature layout, in schema order:

  numeric column  -> one standardized value
  ordinal column  -> its category index, imputed like a numeric, standardized
  nominal column  -> one 0/1 indicator per fitted category (not standardized)

Standardization is z = (v - mean) / std with the population (1/n) std.
A constant column gets std recorded as 1.0 so it maps to all zeros.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, UsageError
from .tabular import ColumnSchema, RawTable, validate_schema

IMPUTE_CHOICES = ("mean", "median")
UNSEEN_CHOICES = ("error", "all_zeros")


@dataclass(frozen=True)
class PreprocessPolicy:
    """Knobs for missing data and unseen categories.

    Rows whose fraction of missing feature cells exceeds
    `row_drop_threshold` are dropped, as are rows with a missing label.
    Remaining gaps are imputed: numerics and ordinal codes with the
    training mean or median, nominals as an all-zero indicator block.
    `unseen_category` decides what a nominal value never seen during
    fitting becomes when the preprocessor is applied later.
    """

    impute_numeric: str = "mean"
    row_drop_threshold: float = 0.5
    unseen_category: str = "all_zeros"

    def __post_init__(self):
        if self.impute_numeric not in IMPUTE_CHOICES:
            raise UsageError(f"impute_numeric must be one of {IMPUTE_CHOICES}")
        if self.unseen_category not in UNSEEN_CHOICES:
            raise UsageError(f"unseen_category must be one of {UNSEEN_CHOICES}")
        if not 0.0 <= self.row_drop_threshold <= 1.0:
            raise UsageError("row_drop_threshold must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "impute_numeric": self.impute_numeric,
            "row_drop_threshold": self.row_drop_threshold,
            "unseen_category": self.unseen_category,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PreprocessPolicy":
        known = {"impute_numeric", "row_drop_threshold", "unseen_category"}
        bad = set(d) - known
        if bad:
            raise UsageError(f"unknown preprocess options: {sorted(bad)}")
        return cls(**d)


@dataclass
class Dataset:
    """Encoded feature matrix plus integer labels."""

    X: np.ndarray
    y: np.ndarray
    feature_names: list[str]
    class_names: list[str]

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2:
            raise UsageError("X must be 2-dimensional")
        if self.y.shape != (self.X.shape[0],):
            raise UsageError("y must have one entry per row of X")
        if self.X.shape[1] != len(self.feature_names):
            raise UsageError("feature_names must match X's width")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.X[idx], self.y[idx], self.feature_names, self.class_names)


def mapped_label(col: ColumnSchema, raw: str) -> str:
    if col.label_map is None:
        return raw
    if raw in col.label_map:
        return col.label_map[raw]
    if col.label_other is not None:
        return col.label_other
    raise DataError(f"label value {raw!r} not covered by the label map")


@dataclass
class Preprocessor:
    """Fitted encoding state, replayable on new tables."""

    columns: list[ColumnSchema]
    policy: PreprocessPolicy = field(default_factory=PreprocessPolicy)
    numeric_stats: dict = field(default_factory=dict)
    nominal_categories: dict = field(default_factory=dict)
    class_names: list[str] = field(default_factory=list)
    fitted: bool = False

    def __post_init__(self):
        validate_schema(self.columns)

    @property
    def label_column(self) -> ColumnSchema:
        return next(c for c in self.columns if c.kind == "label")

    @property
    def feature_names(self) -> list[str]:
        names: list[str] = []
        for c in self.columns:
            if c.kind in ("numeric", "ordinal"):
                names.append(c.name)
            elif c.kind == "nominal":
                names.extend(f"{c.name}={cat}" for cat in self.nominal_categories[c.name])
        return names

    def _keep_rows(self, table: RawTable) -> list[int]:
        return kept_row_indices(table, self.policy)

    def _ordinal_code(self, col: ColumnSchema, value) -> float | None:
        if value is None:
            return None
        if value not in col.ordinal_order:
            raise DataError(f"ordinal column {col.name!r}: unknown category {value!r}")
        return float(col.ordinal_order.index(value))

    # -- fitting ------------------------------------------------------

    def fit(self, table: RawTable, class_names: list[str] | None = None) -> "Preprocessor":
        if [c.name for c in table.columns] != [c.name for c in self.columns]:
            raise DataError("table columns do not match the preprocessor schema")
        kept = self._keep_rows(table)
        rows = [table.rows[r] for r in kept]
        lab_col = self.label_column
        lab_idx = table.label_index

        self.numeric_stats = {}
        self.nominal_categories = {}
        for i, col in enumerate(self.columns):
            if col.kind == "numeric":
                vals = [row[i] for row in rows if row[i] is not None]
                self.numeric_stats[col.name] = self._fit_numeric(col.name, vals, [row[i] for row in rows])
            elif col.kind == "ordinal":
                codes = [self._ordinal_code(col, row[i]) for row in rows]
                vals = [v for v in codes if v is not None]
                self.numeric_stats[col.name] = self._fit_numeric(col.name, vals, codes)
            elif col.kind == "nominal":
                cats = sorted({row[i] for row in rows if row[i] is not None})
                self.nominal_categories[col.name] = cats

        observed = sorted({mapped_label(lab_col, row[lab_idx]) for row in rows})
        if class_names is not None:
            if len(set(class_names)) != len(class_names):
                raise UsageError("class_names contains duplicates")
            unknown = set(observed) - set(class_names)
            if unknown:
                raise DataError(f"labels {sorted(unknown)} not in the declared class list")
            self.class_names = list(class_names)
        else:
            self.class_names = observed
        if len(self.class_names) < 2:
            raise DataError("need at least two classes to train a classifier")
        self.fitted = True
        return self

    def _fit_numeric(self, name: str, observed: list, codes: list) -> dict:
        if not observed:
            raise DataError(f"column {name!r} has no observed values to fit on")
        arr = np.array(observed, dtype=np.float64)
        impute = float(np.mean(arr)) if self.policy.impute_numeric == "mean" else float(np.median(arr))
        filled = np.array([impute if v is None else v for v in codes], dtype=np.float64)
        mean = float(np.mean(filled))
        std = float(np.std(filled))
        if std == 0.0:
            std = 1.0
        return {"impute": impute, "mean": mean, "std": std}

    # -- applying -----------------------------------------------------

    def transform(self, table: RawTable) -> Dataset:
        if not self.fitted:
            raise UsageError("preprocessor has not been fitted")
        if [c.name for c in table.columns] != [c.name for c in self.columns]:
            raise DataError("table columns do not match the preprocessor schema")
        kept = self._keep_rows(table)
        rows = [table.rows[r] for r in kept]
        lab_col = self.label_column
        lab_idx = table.label_index
        class_index = {name: k for k, name in enumerate(self.class_names)}

        n = len(rows)
        feats = self.feature_names
        X = np.zeros((n, len(feats)), dtype=np.float64)
        y = np.zeros(n, dtype=np.int64)
        for r, row in enumerate(rows):
            j = 0
            for i, col in enumerate(self.columns):
                if col.kind in ("numeric", "ordinal"):
                    st = self.numeric_stats[col.name]
                    v = row[i] if col.kind == "numeric" else self._ordinal_code(col, row[i])
                    if v is None:
                        v = st["impute"]
                    X[r, j] = (v - st["mean"]) / st["std"]
                    j += 1
                elif col.kind == "nominal":
                    cats = self.nominal_categories[col.name]
                    v = row[i]
                    if v is not None:
                        if v in cats:
                            X[r, j + cats.index(v)] = 1.0
                        elif self.policy.unseen_category == "error":
                            raise DataError(f"nominal column {col.name!r}: unseen category {v!r}")
                    j += len(cats)
            name = mapped_label(lab_col, row[lab_idx])
            if name not in class_index:
                raise DataError(f"label {name!r} was not seen when the preprocessor was fitted")
            y[r] = class_index[name]
        return Dataset(X, y, feats, list(self.class_names))

    def fit_transform(self, table: RawTable, class_names: list[str] | None = None) -> Dataset:
        return self.fit(table, class_names=class_names).transform(table)

    # -- serialization ------------------------------------------------

    def to_dict(self) -> dict:
        cols = []
        for c in self.columns:
            e: dict = {"name": c.name, "kind": c.kind}
            if c.ordinal_order is not None:
                e["ordinal_order"] = list(c.ordinal_order)
            if c.label_map is not None:
                e["label_map"] = dict(c.label_map)
            if c.label_other is not None:
                e["label_other"] = c.label_other
            cols.append(e)
        return {
            "columns": cols,
            "policy": self.policy.to_dict(),
            "numeric_stats": self.numeric_stats,
            "nominal_categories": self.nominal_categories,
            "class_names": self.class_names,
            "feature_names": self.feature_names,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Preprocessor":
        columns = [
            ColumnSchema(
                name=e["name"],
                kind=e["kind"],
                ordinal_order=tuple(e["ordinal_order"]) if e.get("ordinal_order") else None,
                label_map=e.get("label_map"),
                label_other=e.get("label_other"),
            )
            for e in d["columns"]
        ]
        pre = cls(
            columns=columns,
            policy=PreprocessPolicy.from_dict(d["policy"]),
            numeric_stats=d["numeric_stats"],
            nominal_categories=d["nominal_categories"],
            class_names=list(d["class_names"]),
            fitted=True,
        )
        if pre.feature_names != list(d["feature_names"]):
            raise DataError("preprocessor file is inconsistent: feature names do not match")
        return pre


def kept_row_indices(table: RawTable, policy: PreprocessPolicy) -> list[int]:
    """Rows that survive the missing-data policy, in original order.

    A row is dropped when its label is missing or when its fraction of
    missing feature cells exceeds the policy threshold.
    """
    feat_idx = [
        i for i, c in enumerate(table.columns) if c.kind in ("numeric", "nominal", "ordinal")
    ]
    if not feat_idx:
        raise DataError("schema declares no feature columns")
    lab_idx = table.label_index
    kept = []
    for r, row in enumerate(table.rows):
        if row[lab_idx] is None:
            continue
        missing = sum(1 for i in feat_idx if row[i] is None)
        if missing / len(feat_idx) > policy.row_drop_threshold:
            continue
        kept.append(r)
    if not kept:
        raise DataError("every row was dropped by the missing-data policy")
    return kept


def class_names_from_table(table: RawTable) -> list[str]:
    """Sorted mapped label vocabulary of a whole table (rows with a label)."""
    col = table.columns[table.label_index]
    idx = table.label_index
    return sorted({mapped_label(col, row[idx]) for row in table.rows if row[idx] is not None})


def split_indices(y, train_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic stratified partition into (train, test) row indices.

    Per class, round(train_fraction * count) rows go to train, chosen by
    a seeded shuffle.  Both halves come back sorted and together they
    cover every row exactly once.
    """
    if not 0.0 < train_fraction < 1.0:
        raise UsageError("train_fraction must lie strictly between 0 and 1")
    y = np.asarray(y, dtype=np.int64)
    rng = np.random.default_rng(seed)
    train: list[int] = []
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        k = int(round(train_fraction * idx.size))
        perm = rng.permutation(idx.size)
        train.extend(idx[perm[:k]].tolist())
    train_idx = np.array(sorted(train), dtype=np.int64)
    mask = np.ones(y.size, dtype=bool)
    mask[train_idx] = False
    test_idx = np.flatnonzero(mask).astype(np.int64)
    if train_idx.size == 0 or test_idx.size == 0:
        raise DataError("split produced an empty train or test half")
    return train_idx, test_idx


def dataset_to_csv(dataset: Dataset, path) -> None:
    """Audit dump: encoded features plus the class name, one row per sample."""
    import csv
    from pathlib import Path

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(dataset.feature_names + ["label"])
        for r in range(dataset.n_rows):
            w.writerow(
                [repr(float(v)) for v in dataset.X[r]] + [dataset.class_names[dataset.y[r]]]
            )
