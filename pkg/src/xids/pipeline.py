"""Stage orchestration: config, artifacts, hash chain, end-to-end run.

Stages communicate only through files in the output directory, so they
can run in one process, in separate invocations, or behind separate
HTTP requests and still agree.  Each artifact records the sha256 of the
artifacts it was derived from; consumers re-hash the files on disk and
refuse to mix stale pieces.

Artifacts:

  preprocessor.json     fitted encoding state plus the train/test split
  vae.json              representation model and its training log
  teacher.json          teacher classifier
  student.json          distilled student classifier
  metrics_teacher.json, metrics_student.json
  timing.json           wall-clock inference timing
  explanations/         per-instance attribution reports (.json and .csv)
  report.json, report.csv

Wall-clock numbers live only in timing.json; every other artifact is a
pure function of config, data, and seed, and reruns reproduce it
byte-for-byte.

Seed layout: the master seed drives the split; +1 the representation
model; +2 the teacher; +3 the student; +4 the explanation background.
"""

from __future__ import annotations

import csv
import importlib.resources
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attribution import explain_instance
from .distill import predict, predict_proba, train_student, train_teacher
from .errors import DataError, UsageError
from .evaluation import analytic_memory, metrics, time_inference
from .jsonio import file_hash, read_json, write_json
from .nets import DenseNet, count_parameters, net_from_dict, net_to_dict
from .preprocess import (
    Dataset,
    PreprocessPolicy,
    Preprocessor,
    class_names_from_table,
    kept_row_indices,
    mapped_label,
    split_indices,
)
from .reference import preset as load_preset
from .tabular import load_schema, load_table
from .vae import encode_dataset, train_vae, vae_from_dict, vae_to_dict

SEED_SPLIT = 0
SEED_VAE = 1
SEED_TEACHER = 2
SEED_STUDENT = 3
SEED_BACKGROUND = 4

THREADS_ENV = "LENS_THREADS"

BUILTIN_SCHEMAS = {
    "nsl-kdd-multiclass": "nsl_kdd_multiclass.json",
    "nsl-kdd-binary": "nsl_kdd_binary.json",
}

DEFAULTS: dict = {
    "seed": 0,
    "out": "artifacts",
    "train_fraction": 0.1,
    "split": "stratified",
    "features": "latent",
    "preprocess": {
        "impute_numeric": "mean",
        "row_drop_threshold": 0.5,
        "unseen_category": "all_zeros",
    },
    "vae": {
        "hidden": [64],
        "latent_dim": 16,
        "epochs": 50,
        "batch_size": 64,
        "lr": 0.001,
        "beta": 1.0,
        "optimizer": "adam",
    },
    "teacher": {
        "hidden": [64, 32],
        "epochs": 100,
        "batch_size": 64,
        "lr": 0.001,
        "optimizer": "adam",
    },
    "student": {
        "hidden": [32],
        "epochs": 100,
        "batch_size": 64,
        "lr": 0.001,
        "temperature": 2.0,
        "alpha": 0.5,
        "optimizer": "adam",
    },
    "evaluate": {"batch_size": 64, "repeats": 5, "warmup": 1},
    "explain": {
        "instances": [0],
        "model": "student",
        "background_size": 100,
        "target_class": None,
    },
}

_SECTION_KEYS = {
    "preprocess": set(DEFAULTS["preprocess"]),
    "vae": set(DEFAULTS["vae"]),
    "teacher": set(DEFAULTS["teacher"]),
    "student": set(DEFAULTS["student"]),
    "evaluate": set(DEFAULTS["evaluate"]),
    "explain": set(DEFAULTS["explain"]),
}
_TOP_KEYS = {"data", "preset"} | set(DEFAULTS)


def lens_threads() -> int:
    """Worker-thread cap for batch explanation, from the environment."""
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def resolve_schema_path(token: str) -> Path:
    if token in BUILTIN_SCHEMAS:
        return Path(str(importlib.resources.files("xids").joinpath("datasets", BUILTIN_SCHEMAS[token])))
    return Path(token)


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _check_keys(doc: dict, allowed: set, where: str) -> None:
    bad = set(doc) - allowed
    if bad:
        raise UsageError(f"unknown {where} options: {sorted(bad)}")


def _preset_overlay(name: str) -> dict:
    try:
        dataset, task = name.split("/", 1)
    except ValueError:
        raise UsageError(f"preset must look like 'dataset/task', got {name!r}") from None
    p = load_preset(dataset, task)
    return {
        "vae": {"latent_dim": p["latent_dim"], "epochs": p["epochs"]},
        "teacher": {"hidden": p["teacher_hidden"], "epochs": p["epochs"]},
        "student": {"hidden": p["student_hidden"], "epochs": p["epochs"]},
    }


@dataclass
class PipelineConfig:
    data_csv: list[str]
    schema: str
    out: Path
    seed: int
    train_fraction: float
    features: str
    policy: PreprocessPolicy
    vae: dict
    teacher: dict
    student: dict
    evaluate: dict
    explain: dict
    preset: str | None = None
    echo: dict = field(default_factory=dict)

    @classmethod
    def from_doc(cls, doc: dict, overrides: dict | None = None) -> "PipelineConfig":
        if not isinstance(doc, dict):
            raise UsageError("config must be a JSON object")
        _check_keys(doc, _TOP_KEYS, "config")
        for section, allowed in _SECTION_KEYS.items():
            if section in doc:
                if not isinstance(doc[section], dict):
                    raise UsageError(f"config section {section!r} must be an object")
                _check_keys(doc[section], allowed, section)

        merged = dict(DEFAULTS)
        if doc.get("preset"):
            merged = _merge(merged, _preset_overlay(doc["preset"]))
        merged = _merge(merged, {k: v for k, v in doc.items() if k != "data"})
        if overrides:
            merged = _merge(merged, overrides)

        data = doc.get("data")
        if not isinstance(data, dict) or "csv" not in data or "schema" not in data:
            raise UsageError("config needs a 'data' object with 'csv' and 'schema'")
        _check_keys(data, {"csv", "schema"}, "data")
        csv_paths = data["csv"] if isinstance(data["csv"], list) else [data["csv"]]
        if not csv_paths or not all(isinstance(p, str) for p in csv_paths):
            raise UsageError("data.csv must be a path or a list of paths")

        if merged["split"] != "stratified":
            raise UsageError("only the stratified split is supported")
        if merged["features"] not in ("latent", "raw"):
            raise UsageError("features must be 'latent' or 'raw'")
        if not isinstance(merged["seed"], int) or isinstance(merged["seed"], bool):
            raise UsageError("seed must be an integer")
        tf = merged["train_fraction"]
        if not isinstance(tf, (int, float)) or not 0.0 < tf < 1.0:
            raise UsageError("train_fraction must lie strictly between 0 and 1")

        echo = dict(merged)
        echo["data"] = {"csv": csv_paths, "schema": data["schema"]}
        echo["out"] = str(merged["out"])
        return cls(
            data_csv=csv_paths,
            schema=data["schema"],
            out=Path(merged["out"]),
            seed=merged["seed"],
            train_fraction=float(tf),
            features=merged["features"],
            policy=PreprocessPolicy.from_dict(merged["preprocess"]),
            vae=merged["vae"],
            teacher=merged["teacher"],
            student=merged["student"],
            evaluate=merged["evaluate"],
            explain=merged["explain"],
            preset=doc.get("preset"),
            echo=echo,
        )


def load_config(path: str | Path, overrides: dict | None = None) -> PipelineConfig:
    return PipelineConfig.from_doc(read_json(path), overrides)


# -- artifact access ----------------------------------------------------


def _artifact(cfg: PipelineConfig, name: str) -> tuple[dict, str]:
    path = cfg.out / name
    if not path.exists():
        raise DataError(f"missing artifact {path}; run the earlier stages first")
    return read_json(path), file_hash(path)


def _check_chain(doc: dict, key: str, expected_hash: str, name: str) -> None:
    if doc.get(key) != expected_hash:
        raise DataError(
            f"{name} was built against a different upstream artifact; rerun the pipeline"
        )


def _encoded_dataset(cfg: PipelineConfig, pre_doc: dict) -> tuple[Preprocessor, Dataset]:
    pre = Preprocessor.from_dict(pre_doc["preprocessor"])
    table = load_table(cfg.data_csv, pre.columns, has_header=pre_doc["has_header"])
    kept = kept_row_indices(table, pre.policy)
    ds = pre.transform(table.subset(kept))
    if ds.n_rows != pre_doc["n_kept"]:
        raise DataError("data files changed since preprocessing; rerun preprocess")
    return pre, ds


def _split_arrays(pre_doc: dict) -> tuple[np.ndarray, np.ndarray]:
    return (
        np.array(pre_doc["train_indices"], dtype=np.int64),
        np.array(pre_doc["test_indices"], dtype=np.int64),
    )


def _feature_space(cfg: PipelineConfig, ds: Dataset, pre_hash: str):
    """(features, feature_names, vae_hash) in the configured space."""
    if cfg.features == "raw":
        return ds.X, list(ds.feature_names), None
    vae_doc, vae_hash = _artifact(cfg, "vae.json")
    _check_chain(vae_doc, "preprocessor_hash", pre_hash, "vae.json")
    model = vae_from_dict(vae_doc["model"])
    Z = encode_dataset(model, ds.X)
    return Z, [f"z{i}" for i in range(Z.shape[1])], vae_hash


def _load_classifier(cfg: PipelineConfig, role: str) -> tuple[DenseNet, dict, str]:
    doc, h = _artifact(cfg, f"{role}.json")
    return net_from_dict(doc["model"]), doc, h


# -- stages ---------------------------------------------------------------


def stage_preprocess(cfg: PipelineConfig) -> dict:
    columns, has_header = load_schema(resolve_schema_path(cfg.schema))
    table = load_table(cfg.data_csv, columns, has_header=has_header)
    class_names = class_names_from_table(table)
    kept = kept_row_indices(table, cfg.policy)
    kept_table = table.subset(kept)

    lab_idx = kept_table.label_index
    name_to_idx = {n: i for i, n in enumerate(class_names)}
    y_raw = np.array(
        [name_to_idx[mapped_label(columns[lab_idx], row[lab_idx])] for row in kept_table.rows],
        dtype=np.int64,
    )
    train_idx, test_idx = split_indices(y_raw, cfg.train_fraction, cfg.seed + SEED_SPLIT)

    pre = Preprocessor(columns, cfg.policy)
    pre.fit(kept_table.subset(train_idx), class_names=class_names)
    ds = pre.transform(kept_table)

    artifact = {
        "kind": "preprocessor",
        "preprocessor": pre.to_dict(),
        "has_header": has_header,
        "seed": cfg.seed,
        "train_fraction": cfg.train_fraction,
        "n_raw": table.n_rows,
        "n_kept": ds.n_rows,
        "train_indices": train_idx.tolist(),
        "test_indices": test_idx.tolist(),
    }
    write_json(cfg.out / "preprocessor.json", artifact)
    return {
        "artifact": str(cfg.out / "preprocessor.json"),
        "n_raw": table.n_rows,
        "n_kept": ds.n_rows,
        "n_train": int(train_idx.size),
        "n_test": int(test_idx.size),
        "n_features": ds.n_features,
        "classes": class_names,
    }


def stage_train_vae(cfg: PipelineConfig) -> dict:
    pre_doc, pre_hash = _artifact(cfg, "preprocessor.json")
    _, ds = _encoded_dataset(cfg, pre_doc)
    train_idx, _ = _split_arrays(pre_doc)
    v = cfg.vae
    model, history = train_vae(
        ds.X[train_idx],
        hidden=list(v["hidden"]),
        latent_dim=int(v["latent_dim"]),
        epochs=int(v["epochs"]),
        batch_size=int(v["batch_size"]),
        lr=float(v["lr"]),
        beta=float(v["beta"]),
        optimizer=v["optimizer"],
        seed=cfg.seed + SEED_VAE,
    )
    artifact = {
        "kind": "vae",
        "model": vae_to_dict(model),
        "history": history,
        "config": v,
        "preprocessor_hash": pre_hash,
    }
    write_json(cfg.out / "vae.json", artifact)
    return {
        "artifact": str(cfg.out / "vae.json"),
        "latent_dim": model.latent_dim,
        "in_dim": model.in_dim,
        "final_loss": history[-1]["loss"],
        "epochs": len(history),
    }


def stage_train_teacher(cfg: PipelineConfig) -> dict:
    pre_doc, pre_hash = _artifact(cfg, "preprocessor.json")
    pre, ds = _encoded_dataset(cfg, pre_doc)
    train_idx, _ = _split_arrays(pre_doc)
    feats, _, vae_hash = _feature_space(cfg, ds, pre_hash)
    t = cfg.teacher
    net, history = train_teacher(
        feats[train_idx],
        ds.y[train_idx],
        hidden=list(t["hidden"]),
        n_classes=ds.n_classes,
        epochs=int(t["epochs"]),
        batch_size=int(t["batch_size"]),
        lr=float(t["lr"]),
        optimizer=t["optimizer"],
        seed=cfg.seed + SEED_TEACHER,
    )
    artifact = {
        "kind": "classifier",
        "role": "teacher",
        "model": net_to_dict(net),
        "history": history,
        "config": t,
        "features": cfg.features,
        "class_names": pre.class_names,
        "preprocessor_hash": pre_hash,
        "vae_hash": vae_hash,
    }
    write_json(cfg.out / "teacher.json", artifact)
    return {
        "artifact": str(cfg.out / "teacher.json"),
        "parameters": count_parameters(net),
        "final_loss": history[-1]["loss"],
        "epochs": len(history),
    }


def stage_distill(cfg: PipelineConfig) -> dict:
    pre_doc, pre_hash = _artifact(cfg, "preprocessor.json")
    pre, ds = _encoded_dataset(cfg, pre_doc)
    train_idx, _ = _split_arrays(pre_doc)
    feats, _, vae_hash = _feature_space(cfg, ds, pre_hash)
    teacher, teacher_doc, teacher_hash = _load_classifier(cfg, "teacher")
    _check_chain(teacher_doc, "preprocessor_hash", pre_hash, "teacher.json")
    if teacher_doc.get("features") != cfg.features:
        raise UsageError("teacher was trained in a different feature space")
    _check_chain(teacher_doc, "vae_hash", vae_hash, "teacher.json")
    s = cfg.student
    net, history = train_student(
        feats[train_idx],
        ds.y[train_idx],
        teacher,
        hidden=list(s["hidden"]),
        epochs=int(s["epochs"]),
        batch_size=int(s["batch_size"]),
        lr=float(s["lr"]),
        temperature=float(s["temperature"]),
        alpha=float(s["alpha"]),
        optimizer=s["optimizer"],
        seed=cfg.seed + SEED_STUDENT,
    )
    artifact = {
        "kind": "classifier",
        "role": "student",
        "model": net_to_dict(net),
        "history": history,
        "config": s,
        "features": cfg.features,
        "class_names": pre.class_names,
        "preprocessor_hash": pre_hash,
        "vae_hash": vae_hash,
        "teacher_hash": teacher_hash,
    }
    write_json(cfg.out / "student.json", artifact)
    return {
        "artifact": str(cfg.out / "student.json"),
        "parameters": count_parameters(net),
        "final_loss": history[-1]["loss"],
        "epochs": len(history),
    }


def _verify_classifier(cfg, doc, pre_hash, vae_hash, name):
    _check_chain(doc, "preprocessor_hash", pre_hash, name)
    if doc.get("features") != cfg.features:
        raise UsageError(f"{name} was trained in a different feature space")
    _check_chain(doc, "vae_hash", vae_hash, name)


def stage_evaluate(cfg: PipelineConfig) -> dict:
    pre_doc, pre_hash = _artifact(cfg, "preprocessor.json")
    pre, ds = _encoded_dataset(cfg, pre_doc)
    _, test_idx = _split_arrays(pre_doc)
    feats, _, vae_hash = _feature_space(cfg, ds, pre_hash)
    X_test, y_test = feats[test_idx], ds.y[test_idx]

    roles = [r for r in ("teacher", "student") if (cfg.out / f"{r}.json").exists()]
    if not roles:
        raise DataError("no trained classifiers found; run train-teacher (and distill) first")
    ev = cfg.evaluate
    if int(ev["repeats"]) < 3:
        raise UsageError("evaluate.repeats must be at least 3")
    summary: dict = {"roles": {}, "n_test": int(test_idx.size)}
    timing: dict = {}
    for role in roles:
        net, doc, model_hash = _load_classifier(cfg, role)
        _verify_classifier(cfg, doc, pre_hash, vae_hash, f"{role}.json")
        y_pred, _ = predict(net, X_test)
        m = metrics(y_test, y_pred, pre.class_names)
        artifact = {
            "kind": "metrics",
            "role": role,
            "features": cfg.features,
            "metrics": m,
            "parameters": count_parameters(net),
            "memory": analytic_memory(net),
            "preprocessor_hash": pre_hash,
            "model_hash": model_hash,
        }
        write_json(cfg.out / f"metrics_{role}.json", artifact)
        timing[role] = time_inference(
            net,
            X_test,
            batch_size=int(ev["batch_size"]),
            repeats=int(ev["repeats"]),
            warmup=int(ev["warmup"]),
        )
        summary["roles"][role] = {
            "accuracy": m["accuracy"],
            "weighted_f1": m["weighted"]["f1"],
            "parameters": count_parameters(net),
            "per_sample_ms": timing[role]["per_sample_ms"],
        }
    write_json(cfg.out / "timing.json", {"kind": "timing", "models": timing})
    summary["artifacts"] = [str(cfg.out / f"metrics_{r}.json") for r in roles] + [
        str(cfg.out / "timing.json")
    ]
    return summary


def _class_index(target, class_names: list[str]) -> int | None:
    if target is None:
        return None
    if isinstance(target, bool):
        raise UsageError("target_class must be a class name or index")
    if isinstance(target, int):
        idx = target
    elif isinstance(target, str):
        if target in class_names:
            return class_names.index(target)
        try:
            idx = int(target)
        except ValueError:
            raise UsageError(
                f"unknown class {target!r}; known: {', '.join(class_names)}"
            ) from None
    else:
        raise UsageError("target_class must be a class name or index")
    if not 0 <= idx < len(class_names):
        raise UsageError(f"class index {idx} out of range for {len(class_names)} classes")
    return idx


def _write_waterfall_csv(path: Path, report: dict) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["feature", "contribution", "cumulative"])
        w.writerow(["intercept", "", repr(report["intercept"])])
        for row in report["rows"]:
            w.writerow([row["feature"], repr(row["contribution"]), repr(row["cumulative"])])
        w.writerow(["prediction", "", repr(report["prediction"])])


def stage_explain(cfg: PipelineConfig) -> dict:
    pre_doc, pre_hash = _artifact(cfg, "preprocessor.json")
    pre, ds = _encoded_dataset(cfg, pre_doc)
    train_idx, test_idx = _split_arrays(pre_doc)
    feats, feature_names, vae_hash = _feature_space(cfg, ds, pre_hash)

    role = cfg.explain["model"]
    if role not in ("teacher", "student"):
        raise UsageError("explain.model must be 'teacher' or 'student'")
    net, doc, _ = _load_classifier(cfg, role)
    _verify_classifier(cfg, doc, pre_hash, vae_hash, f"{role}.json")

    rng = np.random.default_rng(cfg.seed + SEED_BACKGROUND)
    size = min(int(cfg.explain["background_size"]), train_idx.size)
    if size < 1:
        raise UsageError("background_size must be positive")
    bg_rows = np.sort(rng.choice(train_idx.size, size=size, replace=False))
    background = feats[train_idx][bg_rows]

    instances = cfg.explain["instances"]
    if not isinstance(instances, list) or not instances:
        raise UsageError("explain.instances must be a non-empty list of test row positions")
    for i in instances:
        if not isinstance(i, int) or isinstance(i, bool) or not 0 <= i < test_idx.size:
            raise UsageError(
                f"instance {i!r} out of range; the test split has {test_idx.size} rows"
            )
    target = _class_index(cfg.explain["target_class"], pre.class_names)

    def predict_fn(A):
        return predict_proba(net, A)

    out_dir = cfg.out / "explanations"
    out_dir.mkdir(parents=True, exist_ok=True)

    def explain_one(i: int) -> dict:
        x = feats[test_idx[i]]
        rep = explain_instance(predict_fn, background, x, feature_names, target_class=target)
        rep.update(
            {
                "instance": i,
                "model": role,
                "features": cfg.features,
                "target_class_name": pre.class_names[rep["target_class"]],
                "true_class": pre.class_names[int(ds.y[test_idx[i]])],
                "predicted_class": pre.class_names[
                    int(np.argmax(predict_fn(x[None, :])[0]))
                ],
            }
        )
        write_json(out_dir / f"instance_{i}_{role}.json", rep)
        _write_waterfall_csv(out_dir / f"instance_{i}_{role}.csv", rep)
        return rep

    workers = min(lens_threads(), len(instances))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(explain_one, instances))
    else:
        reports = [explain_one(i) for i in instances]

    return {
        "model": role,
        "background_rows": int(size),
        "instances": [
            {
                "instance": r["instance"],
                "target_class": r["target_class_name"],
                "prediction": r["prediction"],
                "local_accuracy_gap": r["local_accuracy_gap"],
                "artifact": str(out_dir / f"instance_{r['instance']}_{role}.json"),
            }
            for r in reports
        ],
    }


def stage_report(cfg: PipelineConfig) -> dict:
    pre_doc, _ = _artifact(cfg, "preprocessor.json")
    rows = []
    models: dict = {}
    for role in ("teacher", "student"):
        path = cfg.out / f"metrics_{role}.json"
        if not path.exists():
            continue
        doc = read_json(path)
        m = doc["metrics"]
        models[role] = {
            "accuracy": m["accuracy"],
            "macro_f1": m["macro"]["f1"],
            "weighted_f1": m["weighted"]["f1"],
            "parameters": doc["parameters"],
            "memory_bytes": doc["memory"]["total_bytes"],
        }
        rows.append(
            [
                role,
                repr(m["accuracy"]),
                repr(m["macro"]["f1"]),
                repr(m["weighted"]["f1"]),
                str(doc["parameters"]),
                str(doc["memory"]["total_bytes"]),
            ]
        )
    if not models:
        raise DataError("no metrics artifacts found; run evaluate first")

    report = {
        "kind": "report",
        "dataset": {
            "n_raw": pre_doc["n_raw"],
            "n_kept": pre_doc["n_kept"],
            "n_train": len(pre_doc["train_indices"]),
            "n_test": len(pre_doc["test_indices"]),
            "classes": pre_doc["preprocessor"]["class_names"],
        },
        "models": models,
        "config": cfg.echo,
    }
    write_json(cfg.out / "report.json", report)
    with open(cfg.out / "report.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "accuracy", "macro_f1", "weighted_f1", "parameters", "memory_bytes"])
        w.writerows(rows)
    return {
        "artifacts": [str(cfg.out / "report.json"), str(cfg.out / "report.csv")],
        "models": models,
    }


STAGES = {
    "preprocess": stage_preprocess,
    "train-vae": stage_train_vae,
    "train-teacher": stage_train_teacher,
    "distill": stage_distill,
    "evaluate": stage_evaluate,
    "explain": stage_explain,
    "report": stage_report,
}


def stage_run(cfg: PipelineConfig) -> dict:
    order = ["preprocess", "train-vae", "train-teacher", "distill", "evaluate", "explain", "report"]
    if cfg.features == "raw":
        order.remove("train-vae")
    summary = {}
    for name in order:
        summary[name] = STAGES[name](cfg)
    return summary


def run_stage(name: str, cfg: PipelineConfig) -> dict:
    if name == "run":
        return stage_run(cfg)
    if name not in STAGES:
        raise UsageError(f"unknown stage {name!r}")
    return STAGES[name](cfg)
