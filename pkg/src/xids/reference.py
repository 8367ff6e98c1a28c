"""Preset pipeline shapes for the benchmark intrusion datasets.

Each preset pins the latent width, the teacher and student stacks, and
the training length for one dataset/task pair, sized to a fixed
parameter budget so two runs of the same preset always build networks
of identical size.  Parameter counts follow sum(out*in + out) over the
dense layers.
"""

from __future__ import annotations

from .errors import UsageError

DATASETS = ("ctu-13", "ukm-ids20", "edge-iiotset", "nsl-kdd")
TASKS = ("binary", "multiclass")

# latent_dim is the width both classifiers consume; the budgets count
# classifier parameters only (the encoder is sized separately).
PRESETS: dict[tuple[str, str], dict] = {
    ("ctu-13", "binary"): {
        "latent_dim": 35,
        "teacher_hidden": [184, 32],
        "student_hidden": [112],
        "n_classes": 2,
        "epochs": 100,
        "teacher_params": 12610,
        "student_params": 4258,
    },
    ("ukm-ids20", "binary"): {
        "latent_dim": 35,
        "teacher_hidden": [184, 32],
        "student_hidden": [112],
        "n_classes": 2,
        "epochs": 200,
        "teacher_params": 12610,
        "student_params": 4258,
    },
    ("edge-iiotset", "binary"): {
        "latent_dim": 38,
        "teacher_hidden": [208, 21],
        "student_hidden": [103],
        "n_classes": 2,
        "epochs": 500,
        "teacher_params": 12545,
        "student_params": 4225,
    },
    ("nsl-kdd", "binary"): {
        "latent_dim": 38,
        "teacher_hidden": [208, 21],
        "student_hidden": [103],
        "n_classes": 2,
        "epochs": 100,
        "teacher_params": 12545,
        "student_params": 4225,
    },
    ("ukm-ids20", "multiclass"): {
        "latent_dim": 19,
        "teacher_hidden": [208, 41],
        "student_hidden": [70, 39],
        "n_classes": 8,
        "epochs": 200,
        "teacher_params": 13065,
        "student_params": 4489,
    },
    ("edge-iiotset", "multiclass"): {
        "latent_dim": 48,
        "teacher_hidden": [128, 112],
        "student_hidden": [143],
        "n_classes": 15,
        "epochs": 500,
        "teacher_params": 22415,
        "student_params": 9167,
    },
    ("nsl-kdd", "multiclass"): {
        "latent_dim": 58,
        "teacher_hidden": [140, 110],
        "student_hidden": [128],
        "n_classes": 5,
        "epochs": 100,
        "teacher_params": 24325,
        "student_params": 8197,
    },
}


def preset(dataset: str, task: str) -> dict:
    key = (dataset.lower(), task.lower())
    if key not in PRESETS:
        known = sorted(f"{d}/{t}" for d, t in PRESETS)
        raise UsageError(f"no preset for {dataset}/{task}; known: {', '.join(known)}")
    return dict(PRESETS[key])


def classifier_sizes(latent_dim: int, hidden: list[int], n_classes: int) -> list[int]:
    return [latent_dim] + list(hidden) + [n_classes]


def parameter_budget(sizes: list[int]) -> int:
    return sum(sizes[i + 1] * sizes[i] + sizes[i + 1] for i in range(len(sizes) - 1))
