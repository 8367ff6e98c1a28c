"""Shared fixtures: tiny tables and a small trained pipeline."""

from __future__ import annotations

import pytest

from xids.pipeline import PipelineConfig, stage_run
from xids.synthetic import write_synthetic
from xids.tabular import ColumnSchema, RawTable

# acceptance tests append their PASS/FAIL lines here; echoed after the run
# so they survive output capture
ACCEPTANCE_VERDICTS: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.write_line(line)


def make_table(rows, kinds=None, names=None, **label_kwargs) -> RawTable:
    """Build a RawTable from literal row tuples.

    kinds defaults to numeric features plus a trailing label column.
    """
    width = len(rows[0])
    if kinds is None:
        kinds = ["numeric"] * (width - 1) + ["label"]
    if names is None:
        names = [f"c{i}" for i in range(width)]
    columns = []
    for name, kind in zip(names, kinds):
        extra = label_kwargs if kind == "label" else {}
        columns.append(ColumnSchema(name=name, kind=kind, **extra))
    return RawTable(columns, [list(r) for r in rows])


def small_config(tmp_path, seed=3, **extra) -> PipelineConfig:
    """A fast full-pipeline config over a fresh synthetic dataset."""
    csv_path, schema_path = write_synthetic(tmp_path / "data", n_rows=240, n_features=5, seed=11)
    doc = {
        "data": {"csv": str(csv_path), "schema": str(schema_path)},
        "seed": seed,
        "out": str(tmp_path / "artifacts"),
        "train_fraction": 0.25,
        "vae": {"hidden": [10], "latent_dim": 3, "epochs": 10, "batch_size": 16},
        "teacher": {"hidden": [12], "epochs": 40, "batch_size": 16},
        "student": {"hidden": [6], "epochs": 40, "batch_size": 16},
        "evaluate": {"repeats": 3, "warmup": 1},
        "explain": {"instances": [0, 1], "background_size": 30},
    }
    doc.update(extra)
    return PipelineConfig.from_doc(doc)


@pytest.fixture(scope="session")
def trained(tmp_path_factory):
    """One fully trained small pipeline shared across read-only tests."""
    tmp = tmp_path_factory.mktemp("trained")
    cfg = small_config(tmp)
    summary = stage_run(cfg)
    return cfg, summary
