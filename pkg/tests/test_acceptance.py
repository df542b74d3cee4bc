"""Acceptance suite: one test per criterion, each logging a PASS/FAIL line.

Run under pytest (lines appear in the terminal summary) or directly with
``python3 tests/test_acceptance.py``.
"""

import os
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import oracle  # noqa: E402
from conftest import as_tuples, make_dataset, random_dataset, small_universe  # noqa: E402
from skewlens.cli import main as cli_main  # noqa: E402
from skewlens.core import ConceptVocabulary, Dataset, Pair, Scene  # noqa: E402
from skewlens.evaluator import (AccuracyCurvePair, accuracy_gap, classify_crop,  # noqa: E402
                                evaluate_images, load_gray)
from skewlens.io import read_jsonl, write_jsonl  # noqa: E402
from skewlens.metrics import balance, completeness, completeness_at, coverage, skew_report  # noqa: E402
from skewlens.sampler import (PatternSpec, TargetSpec, assign_phrasings,  # noqa: E402
                              extract_complete_subsample, generate_pattern_mask, split_from_mask,
                              subsample_to_targets)
from skewlens.synthgen import emit_dataset, procedural_glyphs, save_png  # noqa: E402

RESULTS: list[str] = []

VISUAL_ROWS = [(100, 50, 63, 47), (80, 73, 77, 50), (87, 87, 75, 49),
               (100, 100, 73, 44), (100, 100, 88, 49), (100, 100, 100, 48)]
LINGUISTIC_ROWS = [(50, 100, 63, 47), (100, 100, 88, 49)]


def record(n: int, title: str, ok: bool, detail: str = ""):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:>2}: {title}" + (f" ({detail})" if detail else "")
    RESULTS.append(line)
    print(line)
    assert ok, line


# -- 1 -------------------------------------------------------------------------

def test_c1_oracle_equivalence():
    rng = np.random.default_rng(20240601)
    worst = 0.0
    t0 = time.perf_counter()
    for _ in range(200):
        d = random_dataset(rng, max_n=6, max_scenes=40)
        concepts, scenes = d.concept_vocab.concepts, as_tuples(d)
        for persp in ("visual", "linguistic"):
            pos = d.role_vocab(persp).positions
            worst = max(worst,
                        abs(completeness(d, persp) - oracle.completeness(scenes, concepts, pos, persp)),
                        abs(balance(d, persp) - oracle.balance(scenes, concepts, pos, persp)),
                        *(abs(completeness_at(p, d, persp) - oracle.completeness_at(scenes, concepts, p, persp))
                          for p in pos))
        worst = max(worst, abs(coverage(d) - oracle.coverage(scenes, concepts, d.vis_vocab.positions)))
    dt = time.perf_counter() - t0
    record(1, "metric oracle equivalence", worst <= 1e-9 and dt < 5.0,
           f"200 datasets, max |diff| {worst:.1e}, {dt:.2f}s")


# -- 2 -------------------------------------------------------------------------

def regime_reports(n: int) -> dict:
    u = small_universe(n)

    def rep(kind, seed=None, **params):
        return split_from_mask(u, generate_pattern_mask(u, PatternSpec(kind, params, seed))).achieved

    return {
        "a": rep("block_incomplete_both", block=2 * n // 3),
        "b": rep("block_incomplete_one", block=n // 2),
        "c": rep("banded_unbalanced", reverse=1),
        "d": rep("banded_unbalanced", reverse=n // 10),
        "e": rep("banded_unbalanced", reverse=n // 5),
        "f": rep("latin_complete_balanced", seed=1, quota=n // 3),
        "g": rep("random_complete_balanced", seed=2, quota=n // 3),
        "h": rep("latin_complete_balanced", seed=3, quota=n // 6),
    }


def test_c2_pattern_regimes():
    t0 = time.perf_counter()
    failures, blc = [], {}
    for n in (30, 90):
        r = regime_reports(n)
        cpl_a = list(r["a"].completeness_per_position.values())
        cpl_b = list(r["b"].completeness_per_position.values())
        if not all(v < 1.0 for v in cpl_a):
            failures.append(f"N={n} (a)")
        if sum(v < 1.0 for v in cpl_b) != 1:
            failures.append(f"N={n} (b)")
        for k in "fgh":
            if not (r[k].completeness == 1.0 and r[k].balance >= 0.99):
                failures.append(f"N={n} ({k})")
        ce = [r[k] for k in "cde"]
        if not (all(x.completeness == 1.0 for x in ce) and ce[0].balance < ce[1].balance < ce[2].balance):
            failures.append(f"N={n} (c-e)")
        blc[n] = "/".join(f"{x.balance:.3f}" for x in ce)
    dt = time.perf_counter() - t0
    record(2, "grid-pattern skew regimes", not failures and dt < 10.0,
           f"BLC(c-e) N=30 {blc[30]}, N=90 {blc[90]}, {dt:.2f}s" + (f", failed {failures}" if failures else ""))


# -- 3 -------------------------------------------------------------------------

def test_c3_visual_targets(u15, u15_data):
    t0 = time.perf_counter()
    got, bad = [], []
    for row in VISUAL_ROWS:
        res = subsample_to_targets(u15_data, TargetSpec.from_percent(*row), seed=0, universe=u15)
        tr = res.report.table_row()
        vals = (tr["CPL(left)"], tr["CPL(right)"], tr["BLC"], tr["Cov"])
        got.append(vals)
        if any(abs(v - t) > 3 for v, t in zip(vals, row)):
            bad.append((row, vals))
    dt = time.perf_counter() - t0
    record(3, "visual property tuples by subsampling", not bad and dt < 30.0,
           f"achieved {got}, {dt:.2f}s" + (f", off {bad}" if bad else ""))


# -- 4 -------------------------------------------------------------------------

def hub_pool(data: Dataset, n_core=8, n_hub=4) -> Dataset:
    """Scenes inside the first ``n_core`` concepts, plus core-outside scenes anchored on a hub concept."""
    concepts = data.concept_vocab.concepts
    core, hub = set(concepts[:n_core]), set(concepts[:n_hub])
    keep = []
    for s in data.scenes:
        inside = [f for f in s.fillers if f in core]
        if len(inside) == 2 or (len(inside) == 1 and inside[0] in hub):
            keep.append(s)
    return data.replace(keep)


def test_c4_linguistic_targets(u15, u15_data):
    visual_targets = {
        LINGUISTIC_ROWS[0]: (hub_pool(u15_data), TargetSpec.from_percent(100, 100, 100, 47)),
        LINGUISTIC_ROWS[1]: (u15_data, TargetSpec.from_percent(100, 100, 100, 49)),
    }
    got, bad = [], []
    for row, (pool, vt) in visual_targets.items():
        train = subsample_to_targets(pool, vt, seed=0, universe=u15).dataset
        before = skew_report(train, u15, "visual")
        res = assign_phrasings(train, TargetSpec.from_percent(*row[:3]), seed=0)
        after = skew_report(res.dataset, u15, "visual")
        ling = skew_report(res.dataset, u15, "linguistic").table_row()
        vals = (ling["CPL(subject)"], ling["CPL(object)"], ling["BLC"], ling["Cov"])
        got.append(vals)
        visual_ok = after == before and before.completeness == 1.0 and before.balance >= 0.99
        if not visual_ok or any(abs(v - t) > 3 for v, t in zip(vals, row)):
            bad.append((row, vals, visual_ok))
    record(4, "linguistic property tuples by phrasing, visual report unchanged", not bad,
           f"achieved {got}" + (f", off {bad}" if bad else ""))


# -- 5 -------------------------------------------------------------------------

def test_c5_extraction():
    rng = np.random.default_rng(5)
    problems = 0
    empties = 0
    for _ in range(100):
        d = random_dataset(rng, max_n=10, max_scenes=30)
        out = extract_complete_subsample(d, "visual")
        again = extract_complete_subsample(out, "visual")
        ok = again.scenes == out.scenes and set(out.scenes) <= set(d.scenes)
        if len(out):
            ok &= all(completeness_at(r, out) == 1.0 for r in out.vis_vocab.positions)
        else:
            empties += 1
        problems += not ok
    pruned = extract_complete_subsample(make_dataset([("a", "b"), ("b", "a"), ("a", "c")]), "visual")
    chain = extract_complete_subsample(make_dataset([("a", "b"), ("b", "c"), ("c", "d")]), "visual")
    fixtures_ok = ([s.fillers for s in pruned] == [("a", "b"), ("b", "a")] and len(chain) == 0)
    record(5, "complete-subsample extraction", problems == 0 and fixtures_ok,
           f"100 corpora, {empties} empty, {problems} violations, fixtures {'ok' if fixtures_ok else 'WRONG'}")


# -- 6 -------------------------------------------------------------------------

def test_c6_render_round_trip(tmp_path):
    t0 = time.perf_counter()
    summary = []
    ok = True
    for layout, axis in (("vertical", "TB"), ("horizontal", "LR")):
        u = small_universe(30, axis)
        atlas = procedural_glyphs(30, seed=11, names=u.concept_vocab.concepts)
        split = split_from_mask(u, generate_pattern_mask(u, PatternSpec("latin_complete_balanced", {"quota": 5}, 1)))
        out = tmp_path / layout
        emit_dataset(split, atlas, layout, out, seed=11)
        truth = out / "train_truth.jsonl"
        clean = evaluate_images(out / "train.jsonl", truth, atlas, layout)

        rows = list(read_jsonl(out / "train.jsonl"))
        for variant in ("swapped", "blanked"):
            (out / variant).mkdir()
            vrows = []
            for k, row in enumerate(rows):
                img = load_gray(out / row["image"]).copy()
                if variant == "swapped":
                    img = np.concatenate([img[32:], img[:32]]) if layout == "vertical" else \
                        np.concatenate([img[:, 32:], img[:, :32]], axis=1)
                elif layout == "vertical":
                    img[32:] = 255
                else:
                    img[:, 32:] = 255
                rel = f"{variant}/{k:05d}.png"
                save_png(out / rel, img)
                vrows.append({"image": rel, "caption": row["caption"]})
            write_jsonl(out / f"{variant}.jsonl", vrows)
        swapped = evaluate_images(out / "swapped.jsonl", truth, atlas, layout)
        blanked = evaluate_images(out / "blanked.jsonl", truth, atlas, layout)
        n = clean.total
        ok &= (clean.both_correct == n and swapped.errors["flipped"] == n
               and blanked.errors["blank"] == n and n == len(split.train))
        summary.append(f"{layout}: {clean.both_correct}/{n} correct, {swapped.errors['flipped']} flipped, "
                       f"{blanked.errors['blank']} blank")
    dt = time.perf_counter() - t0
    record(6, "render/evaluate round trip", ok and dt < 10.0, "; ".join(summary) + f", {dt:.2f}s")


# -- 7 -------------------------------------------------------------------------

def test_c7_noise_robustness():
    atlas = procedural_glyphs(30, seed=7)
    rng = np.random.default_rng(77)
    hits = 0
    for _ in range(1000):
        k = int(rng.integers(30))
        img = atlas.bitmaps[k].copy()
        mask = rng.random(img.shape) < 0.05
        img[mask] = np.where(rng.random(mask.sum()) < 0.5, 0, 255)
        hits += classify_crop(img, atlas).predicted == atlas.names[k]
    record(7, "noise robustness (5% salt-and-pepper)", hits >= 990, f"{hits}/1000 top-1")


# -- 8 -------------------------------------------------------------------------

def test_c8_gap_cases():
    same = AccuracyCurvePair(tuple((k, 0.1 * k, 0.1 * k) for k in range(1, 10)))
    const = AccuracyCurvePair(tuple((k, 1.0, 0.0) for k in range(1, 13)))
    step = AccuracyCurvePair(tuple((k, float(k >= 5), float(k >= 8)) for k in range(1, 11)))
    vals = (accuracy_gap(same), accuracy_gap(const), accuracy_gap(step))
    record(8, "accuracy_gap analytic cases", vals == (0.0, 100.0, 30.0), f"got {vals}")


# -- 9 -------------------------------------------------------------------------

PIPELINE = [
    ["sample", "--pattern", "latin", "--n", "30", "--quota", "10", "--seed", "1", "--out", "s"],
    ["sample", "--spec", "spec.json", "--seed", "3", "--out", "t"],
    ["phrase", "--input", "s/train.jsonl", "--vocab", "s/vocab.json", "--cpl", "0.7", "1", "--blc", "0.8",
     "--seed", "4", "--out", "p"],
    ["gen", "--input", "p/phrased.jsonl", "--vocab", "s/vocab.json", "--test", "s/test.jsonl",
     "--seed", "9", "--out", "g"],
    ["eval", "--generated", "g/train.jsonl", "--truth", "g/train_truth.jsonl", "--out", "e"],
    ["audit", "--input", "p/phrased.jsonl", "--vocab", "s/vocab.json", "--format", "json", "--out", "audit.json"],
    ["report", "--input", "s/train.jsonl", "--vocab", "s/vocab.json", "--out", "r"],
]
SPEC = '{"targets": {"cpl": [1.0, 0.5], "blc": 0.63, "coverage": 0.47}, "n": 15, "axis": "LR"}\n'


def run_pipeline(root: Path, capsys) -> dict[str, bytes]:
    root.mkdir()
    (root / "spec.json").write_text(SPEC)
    cwd = os.getcwd()
    os.chdir(root)
    try:
        for argv in PIPELINE:
            if cli_main(argv) != 0:
                raise AssertionError(f"{argv} failed: {capsys.readouterr().err}")
    finally:
        os.chdir(cwd)
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_c9_determinism(tmp_path, capsys):
    a = run_pipeline(tmp_path / "run1", capsys)
    b = run_pipeline(tmp_path / "run2", capsys)
    diff = sorted(k for k in a.keys() | b.keys() if a.get(k) != b.get(k))
    pngs = sum(k.endswith(".png") for k in a)
    record(9, "determinism across identical runs", not diff and pngs > 0,
           f"{len(a)} files ({pngs} PNG) compared" + (f", differing {diff[:5]}" if diff else ""))


# -- 10 ------------------------------------------------------------------------

def aggregates(d: Dataset):
    out = []
    for p in ("visual", "linguistic"):
        r = skew_report(d, None, p)
        out += [r.completeness, r.balance, *r.completeness_per_position.values()]
    out.append(coverage(d))
    return np.array(out)


def test_c10_invariance():
    rng = np.random.default_rng(10)
    violations = 0
    for _ in range(100):
        d = random_dataset(rng, max_n=8, max_scenes=40)
        base = aggregates(d)
        doubled = d.replace(d.scenes + d.scenes)
        permuted = d.replace([d.scenes[i] for i in rng.permutation(len(d))])
        concepts = d.concept_vocab.concepts
        new_names = [f"x{k}" for k in rng.permutation(len(concepts))]
        rename = dict(zip(concepts, new_names))
        renamed = Dataset(
            tuple(Scene(tuple(Pair(rename[p.filler], p.linguistic_role, p.visual_role) for p in s.pairs),
                        s.relation_phrase) for s in d.scenes),
            ConceptVocabulary(tuple(rng.permutation(new_names))))
        for variant in (doubled, permuted, renamed):
            violations += not np.allclose(aggregates(variant), base, rtol=0, atol=1e-12)
    record(10, "metric invariance (duplication, permutation, renaming)", violations == 0,
           f"100 datasets x 3 transforms, {violations} violations")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
