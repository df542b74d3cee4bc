"""Scoring generated two-glyph images against ground-truth scenes."""

from __future__ import annotations

import csv
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import kernels
from .core import AXIS_ROLES, VISUAL, SkewError, record_to_scene
from .io import read_jsonl
from .synthgen import LAYOUTS, GlyphAtlas, thread_count

BLANK = "BLANK"
DEFAULT_THRESHOLD = 0.5
ERROR_KINDS = ("flipped", "blank", "duplicate", "mixed", "wrong_object")


@dataclass(frozen=True)
class CropJudgment:
    crop: str
    predicted: str
    score: float


def classify_crops(crops: np.ndarray, atlas: GlyphAtlas, threshold: float = DEFAULT_THRESHOLD):
    """Best-matching glyph for each crop in a (n, cell, cell) stack."""
    crops = np.asarray(crops)
    if crops.ndim != 3 or crops.shape[1:] != (atlas.cell_size, atlas.cell_size):
        raise SkewError(f"crops must be {atlas.cell_size}x{atlas.cell_size}, got {crops.shape[1:]}")
    scores = kernels.ncc_scores(crops.astype(np.float64), atlas.bitmaps.astype(np.float64))
    best = np.argmax(scores, axis=1)
    top = scores[np.arange(len(crops)), best]
    preds = [atlas.names[b] if s >= threshold else BLANK for b, s in zip(best, top)]
    return preds, top


def classify_crop(crop: np.ndarray, atlas: GlyphAtlas, threshold: float = DEFAULT_THRESHOLD,
                  which: str = "first") -> CropJudgment:
    crop = np.asarray(crop)
    if crop.shape != (atlas.cell_size, atlas.cell_size):
        raise SkewError(f"crop must be {atlas.cell_size}x{atlas.cell_size}, got {crop.shape}")
    preds, top = classify_crops(crop[None], atlas, threshold)
    return CropJudgment(which, preds[0], float(top[0]))


def split_image(image: np.ndarray, layout: str, cell: int) -> tuple[np.ndarray, np.ndarray]:
    """Cut at the centre line into the first and second cell."""
    h, w = image.shape
    if layout == "vertical":
        if (h, w) != (2 * cell, cell):
            raise SkewError(f"vertical image must be {cell}x{2 * cell} (WxH), got {w}x{h}")
        return image[:cell], image[cell:]
    if layout == "horizontal":
        if (h, w) != (cell, 2 * cell):
            raise SkewError(f"horizontal image must be {2 * cell}x{cell} (WxH), got {w}x{h}")
        return image[:, :cell], image[:, cell:]
    raise SkewError(f"unknown layout {layout!r}")


def bucket(pred: tuple[str, str], truth: tuple[str, str]) -> str:
    """'correct' or one of ERROR_KINDS, checked in a fixed priority order."""
    p1, p2 = pred
    t1, t2 = truth
    if (p1, p2) == (t1, t2):
        return "correct"
    if BLANK in pred:
        return "blank"
    if (p1, p2) == (t2, t1):
        return "flipped"
    if p1 == p2:
        return "duplicate"
    if p1 == t1 or p2 == t2:
        return "mixed"
    return "wrong_object"


@dataclass
class EvalReport:
    total: int = 0
    both_correct: int = 0
    errors: Counter = field(default_factory=lambda: Counter({k: 0 for k in ERROR_KINDS}))
    confusion: dict = field(default_factory=lambda: defaultdict(Counter))

    @property
    def accuracy(self) -> float:
        return self.both_correct / self.total if self.total else 0.0

    def add(self, pred, truth):
        self.total += 1
        kind = bucket(pred, truth)
        if kind == "correct":
            self.both_correct += 1
        else:
            self.errors[kind] += 1
        for t, p in zip(truth, pred):
            self.confusion[t][p] += 1

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "both_correct": self.both_correct,
            "accuracy": self.accuracy,
            "errors": {k: self.errors[k] for k in ERROR_KINDS},
            "error_rates": {k: (self.errors[k] / self.total if self.total else 0.0) for k in ERROR_KINDS},
            "confusion": {t: dict(sorted(c.items())) for t, c in sorted(self.confusion.items())},
        }

    def write_confusion_csv(self, path) -> None:
        truths = sorted(self.confusion)
        preds = sorted({p for c in self.confusion.values() for p in c})
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(["truth"] + preds)
            for t in truths:
                w.writerow([t] + [self.confusion[t].get(p, 0) for p in preds])


def load_gray(path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("L"))
    except (OSError, ValueError) as e:
        raise SkewError(f"cannot read image {path}: {e}") from None


def truth_pair(record: dict, layout: str) -> tuple[str, str]:
    scene = record_to_scene(record)
    first, second = AXIS_ROLES[LAYOUTS[layout]]
    a, b = scene.filler_at(first, VISUAL), scene.filler_at(second, VISUAL)
    if a is None or b is None:
        raise SkewError(f"ground truth {scene.fillers} does not use the {layout} roles")
    return a, b


def evaluate_arrays(images, truths, atlas: GlyphAtlas, layout: str,
                    threshold: float = DEFAULT_THRESHOLD) -> EvalReport:
    """Score in-memory images against (first, second) ground-truth concept pairs."""
    if len(images) != len(truths):
        raise SkewError(f"{len(images)} images but {len(truths)} ground-truth records")
    firsts, seconds = [], []
    for img in images:
        a, b = split_image(np.asarray(img), layout, atlas.cell_size)
        firsts.append(a)
        seconds.append(b)
    report = EvalReport()
    if not images:
        return report
    p1, _ = classify_crops(np.stack(firsts), atlas, threshold)
    p2, _ = classify_crops(np.stack(seconds), atlas, threshold)
    for pred, truth in zip(zip(p1, p2), truths):
        report.add(pred, tuple(truth))
    return report


def evaluate_images(generated_manifest, truth_manifest, atlas: GlyphAtlas, layout: str = "vertical",
                    threshold: float = DEFAULT_THRESHOLD) -> EvalReport:
    """Evaluate index-aligned generated images ({"image", "caption"} JSONL) against ground truth."""
    gen_path = Path(generated_manifest)
    gen = list(read_jsonl(gen_path))
    truth = list(read_jsonl(truth_manifest))
    if len(gen) != len(truth):
        raise SkewError(f"manifest mismatch: {len(gen)} generated vs {len(truth)} ground-truth rows")
    paths = []
    for row in gen:
        if "image" not in row:
            raise SkewError("generated manifest row lacks an 'image' field")
        p = Path(row["image"])
        paths.append(p if p.is_absolute() else gen_path.parent / p)
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        images = list(pool.map(load_gray, paths))
    truths = [truth_pair(r.get("record", r), layout) for r in truth]
    return evaluate_arrays(images, truths, atlas, layout, threshold)


# -- learning curves -----------------------------------------------------------

@dataclass(frozen=True)
class AccuracyCurvePair:
    checkpoints: tuple[tuple[int, float, float], ...]

    def __post_init__(self):
        cps = tuple((int(s), float(a), float(b)) for s, a, b in self.checkpoints)
        steps = [c[0] for c in cps]
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise SkewError("checkpoint steps must be strictly increasing")
        for _, a, b in cps:
            if not (0.0 <= a <= 1.0 and 0.0 <= b <= 1.0):
                raise SkewError("accuracies must lie in [0, 1]")
        object.__setattr__(self, "checkpoints", cps)

    @classmethod
    def from_csv(cls, path) -> "AccuracyCurvePair":
        rows = []
        with open(path, newline="", encoding="utf-8") as f:
            for rec in csv.DictReader(f):
                try:
                    rows.append((int(rec["step"]), float(rec["train_acc"]), float(rec["test_acc"])))
                except (KeyError, ValueError, TypeError) as e:
                    raise SkewError(f"{path}: bad curve row {rec!r} ({e})") from None
        return cls(tuple(rows))

    def swapped(self) -> "AccuracyCurvePair":
        return AccuracyCurvePair(tuple((s, b, a) for s, a, b in self.checkpoints))


def accuracy_gap(curves: AccuracyCurvePair, total: bool = False) -> float:
    """Mean (or sum) over checkpoints of train minus test accuracy, in percentage points."""
    if not curves.checkpoints:
        raise SkewError("accuracy curve is empty")
    diffs = [100.0 * (a - b) for _, a, b in curves.checkpoints]
    return float(sum(diffs)) if total else float(sum(diffs) / len(diffs))
