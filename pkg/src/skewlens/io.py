"""JSONL and JSON helpers for the canonical dataset format."""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Iterable, Iterator

from .core import (Dataset, SkewError, dataset_from_scenes, load_vocab_manifest, record_to_scene,
                   scene_to_record)


def read_jsonl(path) -> Iterator[dict]:
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as e:
                raise SkewError(f"{path}:{lineno}: invalid JSON ({e.msg})") from None


def write_jsonl(path, rows: Iterable[dict]) -> None:
    path = Path(path)
    if path.parent != Path(""):
        os.makedirs(path.parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n")


def write_json(path, obj: Any) -> None:
    path = Path(path)
    if path.parent != Path(""):
        os.makedirs(path.parent, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def read_json(path) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SkewError(f"{path}: invalid JSON ({e.msg})") from None


def load_dataset(path, vocab_path=None) -> Dataset:
    """Read a canonical dataset JSONL, optionally against a vocabulary manifest."""
    scenes = [record_to_scene(r) for r in read_jsonl(path)]
    if vocab_path is not None:
        concepts, ling, vis = load_vocab_manifest(vocab_path)
        return Dataset(tuple(scenes), concepts, ling, vis)
    return dataset_from_scenes(scenes)


def save_dataset(path, dataset: Dataset) -> None:
    write_jsonl(path, (scene_to_record(s) for s in dataset.scenes))
