"""Synthetic stacked-glyph images with template captions."""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import kernels
from .core import AXIS_ROLES, VISUAL, Scene, SkewError, scene_to_record
from .io import write_json, write_jsonl
from .metrics import skew_report
from .parser import DEFAULT_LEXICON, RelationLexicon, render_caption
from .sampler import SplitResult

BACKGROUND = 255
INK = 0
MAX_NCC = 0.95

LAYOUTS = {"vertical": "TB", "horizontal": "LR"}


def thread_count() -> int:
    try:
        cap = int(os.environ.get("SKEWLENS_THREADS", "0"))
    except ValueError:
        cap = 0
    n = os.cpu_count() or 1
    return max(1, min(cap, n) if cap > 0 else n)


def _check_distinct(names, bitmaps):
    if len(bitmaps) < 2:
        return
    scores = kernels.ncc_scores(bitmaps.astype(np.float64), bitmaps.astype(np.float64))
    np.fill_diagonal(scores, -1.0)
    i, j = np.unravel_index(np.argmax(scores), scores.shape)
    if scores[i, j] >= MAX_NCC:
        raise SkewError(f"glyphs {names[i]!r} and {names[j]!r} are near-identical (NCC {scores[i, j]:.3f})")


@dataclass(frozen=True)
class GlyphAtlas:
    cell_size: int
    names: tuple[str, ...]
    bitmaps: np.ndarray  # (n, cell, cell) uint8
    provenance: str = "procedural"

    def __post_init__(self):
        b = np.ascontiguousarray(self.bitmaps, dtype=np.uint8)
        if b.ndim != 3 or b.shape[1:] != (self.cell_size, self.cell_size):
            raise SkewError(f"glyph bitmaps must be {self.cell_size}x{self.cell_size}, got {b.shape[1:]}")
        if len(self.names) != b.shape[0]:
            raise SkewError("one name per glyph required")
        if len(set(self.names)) != len(self.names):
            raise SkewError("duplicate concept in atlas")
        b.setflags(write=False)
        object.__setattr__(self, "bitmaps", b)
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def glyphs(self) -> dict[str, np.ndarray]:
        return dict(zip(self.names, self.bitmaps))

    def glyph(self, name: str) -> np.ndarray:
        try:
            return self.bitmaps[self.names.index(name)]
        except ValueError:
            raise SkewError(f"no glyph for concept {name!r}") from None

    def sha256(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps([self.cell_size, list(self.names)]).encode())
        h.update(self.bitmaps.tobytes())
        return h.hexdigest()

    def save(self, sprite_path, manifest_path, columns: int = 10) -> None:
        """Write a sprite sheet plus a JSON manifest mapping names to cells."""
        n, c = len(self.names), self.cell_size
        cols = min(columns, n)
        rows = -(-n // cols)
        sheet = np.full((rows * c, cols * c), BACKGROUND, dtype=np.uint8)
        cells = {}
        for k, name in enumerate(self.names):
            r, q = divmod(k, cols)
            sheet[r * c:(r + 1) * c, q * c:(q + 1) * c] = self.bitmaps[k]
            cells[name] = [r, q]
        Image.fromarray(sheet).save(sprite_path, format="PNG")
        write_json(manifest_path, {"cell_size": c, "cells": cells})


def load_glyph_atlas(sprite_path, manifest_path) -> GlyphAtlas:
    manifest = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    cell = int(manifest.get("cell_size", 32))
    with Image.open(sprite_path) as im:
        sheet = np.asarray(im.convert("L"))
    if sheet.shape[0] % cell or sheet.shape[1] % cell:
        raise SkewError(f"sprite size {sheet.shape} is not a multiple of the {cell}px cell")
    rows, cols = sheet.shape[0] // cell, sheet.shape[1] // cell
    cells = manifest["cells"]
    if isinstance(cells, list):  # row-major list of names
        cells = {name: list(divmod(k, cols)) for k, name in enumerate(cells)}
    names, bitmaps = [], []
    for name, (r, q) in cells.items():
        if not (0 <= r < rows and 0 <= q < cols):
            raise SkewError(f"manifest cell ({r}, {q}) for {name!r} lies outside the {rows}x{cols} sprite")
        names.append(name)
        bitmaps.append(sheet[r * cell:(r + 1) * cell, q * cell:(q + 1) * cell])
    if len(names) < 2:
        raise SkewError("an atlas needs at least two glyphs")
    stack = np.stack(bitmaps)
    _check_distinct(names, stack)
    return GlyphAtlas(cell, tuple(names), stack, "atlas_file")


def procedural_glyphs(n: int, seed: int, cell_size: int = 32, names=None, pattern: int = 8) -> GlyphAtlas:
    """Seeded random binary patterns, upscaled to ``cell_size``."""
    if n < 2:
        raise SkewError("need at least two glyphs")
    if n > 10_000:
        raise SkewError("procedural atlas limited to 10,000 glyphs")
    if cell_size % pattern:
        raise SkewError(f"cell_size must be a multiple of {pattern}")
    names = tuple(names) if names is not None else tuple(f"glyph{k:03d}" for k in range(n))
    if len(names) != n:
        raise SkewError("names must match n")
    rng = np.random.default_rng(seed)
    scale = cell_size // pattern
    patterns = []
    flat = np.empty((0, pattern * pattern))
    attempts = 0
    while len(patterns) < n:
        attempts += 1
        if attempts > 50 * n + 1000:
            raise SkewError(f"could not draw {n} distinct glyphs")
        p = rng.random((pattern, pattern)) < 0.5
        ink = p.mean()
        if not 0.3 <= ink <= 0.7:
            continue
        v = p.ravel().astype(np.float64)
        if flat.shape[0]:
            s = kernels.ncc_scores(v[None], flat)[0]
            if s.max() >= MAX_NCC:
                continue
        patterns.append(p)
        flat = np.vstack([flat, v])
    bitmaps = np.stack([np.where(np.kron(p, np.ones((scale, scale), dtype=bool)), INK, BACKGROUND)
                        for p in patterns]).astype(np.uint8)
    return GlyphAtlas(cell_size, names, bitmaps, "procedural")


@dataclass(frozen=True)
class RenderedScene:
    image: np.ndarray
    scene: Scene
    layout: str


def render_scene(scene: Scene, atlas: GlyphAtlas, layout: str = "vertical") -> RenderedScene:
    """Place the first-role glyph in the top/left cell and the other in the second."""
    if layout not in LAYOUTS:
        raise SkewError(f"unknown layout {layout!r}")
    first, second = AXIS_ROLES[LAYOUTS[layout]]
    a = scene.filler_at(first, VISUAL)
    b = scene.filler_at(second, VISUAL)
    if scene.K != 2 or a is None or b is None:
        raise SkewError(f"scene roles {scene.roles(VISUAL)} do not match the {layout} layout")
    ga, gb = atlas.glyph(a), atlas.glyph(b)
    img = np.concatenate([ga, gb], axis=0 if layout == "vertical" else 1)
    return RenderedScene(np.ascontiguousarray(img), scene, layout)


def save_png(path, image: np.ndarray) -> None:
    Image.fromarray(np.ascontiguousarray(image, dtype=np.uint8)).save(path, format="PNG")


def emit_dataset(split, atlas: GlyphAtlas, layout: str, out_dir, *,
                 lexicon: RelationLexicon = DEFAULT_LEXICON, seed: int | None = None,
                 config: dict | None = None, render_test: bool = False) -> dict:
    """Render the training scenes to PNGs and write JSONL indices plus a manifest."""
    train = split.train if isinstance(split, SplitResult) else split
    test = split.test if isinstance(split, SplitResult) else None
    if len(train) == 0:
        raise SkewError("training split is empty")
    out = Path(out_dir)
    try:
        (out / "images").mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise SkewError(f"cannot write to {out}: {e}") from None

    def write_part(name, scenes):
        def work(k):
            s = scenes[k]
            rel = f"images/{name}_{k:05d}.png"
            save_png(out / rel, render_scene(s, atlas, layout).image)
            return {"image": rel, "caption": render_caption(s, lexicon), "record": scene_to_record(s)}
        with ThreadPoolExecutor(max_workers=thread_count()) as pool:
            rows = list(pool.map(work, range(len(scenes))))
        write_jsonl(out / f"{name}.jsonl", rows)
        write_jsonl(out / f"{name}_truth.jsonl", (r["record"] | {"caption": r["caption"]} for r in rows))
        return rows

    train_rows = write_part("train", list(train.scenes))
    n_test = 0
    if test is not None:
        if render_test:
            n_test = len(write_part("test", list(test.scenes)))
        else:
            write_jsonl(out / "test.jsonl",
                        (scene_to_record(s) | {"caption": render_caption(s, lexicon)} for s in test.scenes))
            n_test = len(test)
    atlas.save(out / "atlas.png", out / "atlas.json")
    manifest = {
        "seed": seed,
        "layout": layout,
        "atlas_sha256": atlas.sha256(),
        "atlas_provenance": atlas.provenance,
        "cell_size": atlas.cell_size,
        "n_train": len(train_rows),
        "n_test": n_test,
        "train_metrics": {
            "visual": skew_report(train, None, "visual").to_dict(),
            "linguistic": skew_report(train, None, "linguistic").to_dict(),
        },
        "config": config or {},
    }
    write_json(out / "manifest.json", manifest)
    return manifest
