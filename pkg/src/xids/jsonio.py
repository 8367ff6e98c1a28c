"""Canonical JSON helpers.

Artifacts are hashed and compared byte-for-byte across reruns, so every
JSON file is written the same way: sorted keys, newline at EOF, floats
via repr (Python's shortest round-trip form).
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .errors import DataError


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False)


def write_json(path: str | Path, obj) -> str:
    """Write canonically; returns the sha256 hex digest of the bytes written."""
    text = canonical_json(obj) + "\n"
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def read_json(path: str | Path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"{path} is not valid JSON: {e}") from e


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def file_hash(path: str | Path) -> str:
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    return hashlib.sha256(path.read_bytes()).hexdigest()


def json_hash(obj) -> str:
    """Hash of an object's canonical serialization (matches write_json)."""
    return sha256_text(canonical_json(obj) + "\n")
