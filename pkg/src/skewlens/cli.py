"""Command-line entry point: ``skewlens <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import (AXIS_ROLES, LINGUISTIC, VISUAL, ConceptVocabulary, Dataset, RoleVocabulary, SkewError,
                   Universe, load_vocab_manifest, universe_of, vocab_manifest)
from .evaluator import AccuracyCurvePair, accuracy_gap, evaluate_images
from .io import load_dataset, read_json, read_jsonl, save_dataset, write_json
from .metrics import pmd, skew_report
from .parser import DEFAULT_LEXICON, RelationLexicon, parse_corpus
from .plots import pmd_svgs
from .sampler import (PatternSpec, SplitResult, TargetSpec, assign_phrasings, extract_complete_subsample,
                      generate_pattern_mask, split_from_mask, split_from_train, subsample_to_targets,
                      universe_dataset)
from .synthgen import emit_dataset, load_glyph_atlas, procedural_glyphs

log = logging.getLogger("skewlens")

AUDIT_COLUMNS = ["dataset", "pairs", "unique_images", "unique_captions", "unique_concepts",
                 "CPL_V", "CPL_L", "BLC_V", "BLC_L", "Cov",
                 "CPL_V(r1)", "CPL_V(r2)", "CPL_L(r1)", "CPL_L(r2)"]

PATTERN_ALIASES = {
    "block-both": "block_incomplete_both",
    "block-one": "block_incomplete_one",
    "banded": "banded_unbalanced",
    "quota": "quota_unbalanced",
    "latin": "latin_complete_balanced",
    "random": "random_complete_balanced",
}


def _config(args) -> dict:
    # the output location is left out so a relocated rerun is byte-identical
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items())
            if k not in ("func", "out")}


def _lexicon(args) -> RelationLexicon:
    return RelationLexicon.from_file(args.lexicon) if getattr(args, "lexicon", None) else DEFAULT_LEXICON


def _load(args) -> Dataset:
    return load_dataset(args.input, getattr(args, "vocab", None))


def _emit(args, text: str):
    out = getattr(args, "out", None)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _pct(x: float) -> int:
    return int(np.floor(100 * x + 0.5))


# -- subcommands -------------------------------------------------------------------

def cmd_parse(args) -> int:
    concepts = load_vocab_manifest(args.vocab)[0] if args.vocab else None
    dataset, report = parse_corpus(read_jsonl(args.input), _lexicon(args), args.axis, concepts)
    out = Path(args.out)
    save_dataset(out / "dataset.jsonl", dataset)
    write_json(out / "vocab.json", vocab_manifest(dataset))
    write_json(out / "parse_report.json", report.to_dict() | {"config": _config(args)})
    print(json.dumps(report.to_dict(), sort_keys=True))
    return 0


def audit_row(name: str, dataset: Dataset, uniform: bool = False) -> tuple[dict, dict]:
    u = universe_of(dataset, allow_repeat=False)
    vis = skew_report(dataset, u, VISUAL, uniform)
    ling = skew_report(dataset, u, LINGUISTIC, uniform)
    v_cpl = list(vis.completeness_per_position.values())
    l_cpl = list(ling.completeness_per_position.values())
    row = {
        "dataset": name,
        "pairs": len(dataset),
        # records without a source id count one image per distinct visual tuple
        "unique_images": len({s.source_id if s.source_id is not None else s.visual_key(dataset.vis_vocab)
                              for s in dataset.scenes}),
        "unique_captions": len({s.caption for s in dataset.scenes if s.caption is not None}),
        "unique_concepts": len({f for s in dataset.scenes for f in s.fillers}),
        "CPL_V": _pct(vis.completeness), "CPL_L": _pct(ling.completeness),
        "BLC_V": _pct(vis.balance), "BLC_L": _pct(ling.balance),
        "Cov": _pct(vis.coverage),
        "CPL_V(r1)": _pct(v_cpl[0]), "CPL_V(r2)": _pct(v_cpl[1]),
        "CPL_L(r1)": _pct(l_cpl[0]), "CPL_L(r2)": _pct(l_cpl[1]),
    }
    if uniform:
        row["BLC_V_uniform"] = _pct(vis.balance_uniform)
        row["BLC_L_uniform"] = _pct(ling.balance_uniform)
    return row, {"visual": vis.to_dict(), "linguistic": ling.to_dict()}


def _csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def cmd_audit(args) -> int:
    dataset = _load(args)
    row, reports = audit_row(args.name or Path(args.input).stem, dataset, args.uniform_weights)
    if args.format == "csv":
        cols = AUDIT_COLUMNS + (["BLC_V_uniform", "BLC_L_uniform"] if args.uniform_weights else [])
        _emit(args, _csv([row], cols))
    else:
        _emit(args, json.dumps({"table": row, "reports": reports, "config": _config(args)},
                               indent=2, sort_keys=True) + "\n")
    return 0


def cmd_extract(args) -> int:
    dataset = _load(args)
    sub = extract_complete_subsample(dataset, args.perspective)
    save_dataset(args.out, sub)
    write_json(Path(args.out).with_suffix(".vocab.json"), vocab_manifest(sub))
    summary = {"input_scenes": len(dataset), "output_scenes": len(sub), "output_concepts": sub.concept_vocab.N}
    if len(sub) == 0:
        sys.stderr.write(json.dumps({"warning": "complete subsample is empty"} | summary) + "\n")
    print(json.dumps(summary, sort_keys=True))
    return 0


def _concepts(args, n: int | None) -> ConceptVocabulary:
    if getattr(args, "vocab", None):
        return load_vocab_manifest(args.vocab)[0]
    if not n:
        raise SkewError("need --n or --vocab to define the concept set")
    return ConceptVocabulary(tuple(f"c{i:03d}" for i in range(n)))


def _write_split(out: Path, split, extra: dict):
    save_dataset(out / "train.jsonl", split.train)
    save_dataset(out / "test.jsonl", split.test)
    write_json(out / "vocab.json", vocab_manifest(split.train))
    (out / "mask.txt").write_text("\n".join("".join("1" if v else "0" for v in row) for row in split.mask) + "\n")
    write_json(out / "report.json", {"achieved": split.achieved.to_dict(),
                                     "table": split.achieved.table_row()} | extra)


def cmd_sample(args) -> int:
    spec = read_json(args.spec) if args.spec else {}
    out = Path(args.out)
    axis = spec.get("axis", args.axis)
    if "targets" in spec or args.cpl is not None:
        t = spec.get("targets") or {"cpl": args.cpl, "blc": args.blc, "coverage": args.coverage}
        targets = TargetSpec.from_dict(t)
        if args.input:
            dataset = _load(args)
        else:
            u = Universe(_concepts(args, spec.get("n", args.n)), RoleVocabulary.visual(axis))
            dataset = universe_dataset(u, _lexicon(args))
        u = universe_of(dataset)
        res = subsample_to_targets(dataset, targets, args.seed, max_swaps=args.max_swaps)
        split = split_from_train(u, res.dataset)
        _write_split(out, split, {"config": _config(args), "spec": spec, "seed": args.seed,
                                  "targets": targets.to_dict(),
                                  "converged": res.converged, "swaps": res.swaps, "objective": res.objective})
        if not res.converged:
            sys.stderr.write(json.dumps({"warning": "targets not reached within tolerance"}) + "\n")
        return 0

    pat = spec.get("pattern") or {}
    kind = PATTERN_ALIASES.get(pat.get("kind") or args.pattern, pat.get("kind") or args.pattern)
    if kind is None:
        raise SkewError("sample needs --pattern, --cpl/--blc targets, or --spec")
    params = dict(pat.get("params") or {})
    for name in ("block", "band", "reverse", "quota"):
        if getattr(args, name) is not None:
            params.setdefault(name, getattr(args, name))
    seed = pat.get("seed", args.seed)
    u = Universe(_concepts(args, spec.get("n", args.n)), RoleVocabulary.visual(axis))
    pspec = PatternSpec(kind, params, seed)
    mask = generate_pattern_mask(u, pspec)
    split = split_from_mask(u, mask, _lexicon(args))
    _write_split(out, split, {"config": _config(args), "spec": spec, "seed": seed, "pattern": pspec.to_dict()})
    print(json.dumps(split.achieved.table_row(), sort_keys=True))
    return 0


def cmd_phrase(args) -> int:
    dataset = _load(args)
    spec = read_json(args.spec) if args.spec else {}
    t = spec.get("targets") or {"cpl": args.cpl or [1.0, 1.0], "blc": 1.0 if args.blc is None else args.blc}
    targets = TargetSpec.from_dict(t)
    res = assign_phrasings(dataset, targets, args.seed, lexicon=_lexicon(args))
    out = Path(args.out)
    save_dataset(out / "phrased.jsonl", res.dataset)
    write_json(out / "vocab.json", vocab_manifest(res.dataset))
    write_json(out / "report.json", {
        "linguistic": res.report.to_dict(), "table": res.report.table_row(),
        "visual": skew_report(res.dataset, None, VISUAL).to_dict(),
        "converged": res.converged, "flips": res.swaps, "seed": args.seed,
        "targets": targets.to_dict(), "config": _config(args)})
    print(json.dumps(res.report.table_row(), sort_keys=True))
    return 0


def _atlas(args, concepts):
    if args.atlas:
        if not args.atlas_manifest:
            raise SkewError("--atlas needs --atlas-manifest")
        return load_glyph_atlas(args.atlas, args.atlas_manifest)
    return procedural_glyphs(len(concepts), args.glyph_seed, args.cell_size, names=concepts)


def cmd_gen(args) -> int:
    train = _load(args)
    axis = {"vertical": "TB", "horizontal": "LR"}[args.layout]
    if train.vis_vocab.positions != AXIS_ROLES[axis]:
        raise SkewError(f"dataset roles {train.vis_vocab.positions} do not match layout {args.layout}")
    split = train
    if args.test:
        test = load_dataset(args.test, args.vocab)
        split = SplitResult(train, test, np.zeros((0, 0), dtype=bool), skew_report(train, None, VISUAL))
    atlas = _atlas(args, list(train.concept_vocab.concepts))
    manifest = emit_dataset(split, atlas, args.layout, args.out, lexicon=_lexicon(args),
                            seed=args.glyph_seed, config=_config(args), render_test=args.render_test)
    print(json.dumps({"n_train": manifest["n_train"], "n_test": manifest["n_test"],
                      "atlas_sha256": manifest["atlas_sha256"]}, sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    # gen writes atlas.png/atlas.json next to its manifests
    sprite = args.atlas or Path(args.generated).parent / "atlas.png"
    manifest = args.atlas_manifest or sprite.with_suffix(".json")
    if not sprite.exists():
        raise SkewError(f"no atlas at {sprite}; pass --atlas and --atlas-manifest")
    atlas = load_glyph_atlas(sprite, manifest)
    report = evaluate_images(args.generated, args.truth, atlas, args.layout, args.threshold)
    payload = report.to_dict() | {"config": _config(args)}
    if args.out:
        out = Path(args.out)
        write_json(out / "eval_report.json", payload)
        report.write_confusion_csv(out / "confusion.csv")
    print(json.dumps({"total": report.total, "accuracy": report.accuracy,
                      "errors": payload["errors"]}, sort_keys=True))
    return 0


def cmd_gap(args) -> int:
    curves = AccuracyCurvePair.from_csv(args.curves)
    gap = accuracy_gap(curves, total=args.sum)
    print(json.dumps({"gap": gap, "mode": "sum" if args.sum else "mean",
                      "checkpoints": len(curves.checkpoints)}, sort_keys=True))
    return 0


def cmd_report(args) -> int:
    dataset = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    row, reports = audit_row(args.name or Path(args.input).stem, dataset)
    (out / "audit.csv").write_text(_csv([row], AUDIT_COLUMNS), encoding="utf-8")
    table_rows = []
    for persp in (VISUAL, LINGUISTIC):
        rep = skew_report(dataset, None, persp)
        table_rows.append({"perspective": persp, **{k: v for k, v in
                           zip(["CPL(r1)", "CPL(r2)"], [_pct(x) for x in rep.completeness_per_position.values()])},
                           "BLC": _pct(rep.balance), "Cov": _pct(rep.coverage)})
        for name, svg in pmd_svgs(pmd(dataset, persp), persp).items():
            (out / f"pmd_{persp}_{name}.svg").write_text(svg, encoding="utf-8")
    (out / "table.csv").write_text(_csv(table_rows, ["perspective", "CPL(r1)", "CPL(r2)", "BLC", "Cov"]),
                                   encoding="utf-8")
    write_json(out / "reports.json", reports | {"config": _config(args)})
    print(json.dumps({"out": str(out), "files": sorted(p.name for p in out.iterdir())}))
    return 0


# -- argument parsing -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="skewlens", description=__doc__)
    p.add_argument("--version", action="version", version=f"skewlens {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=func)
        return sp

    axis_choices = sorted(AXIS_ROLES)

    sp = add("parse", cmd_parse, "parse a caption corpus into the canonical dataset format")
    sp.add_argument("--input", required=True, type=Path)
    sp.add_argument("--out", required=True, type=Path)
    sp.add_argument("--axis", choices=axis_choices)
    sp.add_argument("--lexicon", type=Path)
    sp.add_argument("--vocab", type=Path)

    sp = add("audit", cmd_audit, "completeness/balance/coverage under both perspectives")
    sp.add_argument("--input", required=True, type=Path)
    sp.add_argument("--vocab", type=Path)
    sp.add_argument("--name")
    sp.add_argument("--format", choices=["json", "csv"], default="csv")
    sp.add_argument("--uniform-weights", action="store_true")
    sp.add_argument("--out", type=Path)

    sp = add("extract-complete", cmd_extract, "prune to the largest complete subsample")
    sp.add_argument("--input", required=True, type=Path)
    sp.add_argument("--vocab", type=Path)
    sp.add_argument("--perspective", choices=["visual", "linguistic", "both"], default="both")
    sp.add_argument("--out", required=True, type=Path)

    sp = add("sample", cmd_sample, "build a train/test split from a pattern or from targets")
    sp.add_argument("--pattern", choices=sorted(PATTERN_ALIASES))
    sp.add_argument("--spec", type=Path)
    sp.add_argument("--n", type=int)
    sp.add_argument("--vocab", type=Path)
    sp.add_argument("--input", type=Path)
    sp.add_argument("--axis", choices=axis_choices, default="TB")
    sp.add_argument("--block", type=int)
    sp.add_argument("--band", type=int)
    sp.add_argument("--reverse", type=int)
    sp.add_argument("--quota", type=int)
    sp.add_argument("--cpl", type=float, nargs=2, help="per-position completeness targets, fractions in [0, 1]")
    sp.add_argument("--blc", type=float, help="balance target, fraction in [0, 1]")
    sp.add_argument("--coverage", type=float, default=1.0, help="coverage target, fraction in [0, 1]")
    sp.add_argument("--max-swaps", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--lexicon", type=Path)
    sp.add_argument("--out", required=True, type=Path)

    sp = add("phrase", cmd_phrase, "choose caption phrasings to hit linguistic targets")
    sp.add_argument("--input", required=True, type=Path)
    sp.add_argument("--vocab", type=Path)
    sp.add_argument("--spec", type=Path)
    sp.add_argument("--cpl", type=float, nargs=2, help="per-position completeness targets, fractions in [0, 1]")
    sp.add_argument("--blc", type=float, help="balance target, fraction in [0, 1]")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--lexicon", type=Path)
    sp.add_argument("--out", required=True, type=Path)

    sp = add("gen", cmd_gen, "render a training set to images and captions")
    sp.add_argument("--input", required=True, type=Path)
    sp.add_argument("--test", type=Path)
    sp.add_argument("--vocab", type=Path)
    sp.add_argument("--layout", choices=["vertical", "horizontal"], default="vertical")
    sp.add_argument("--atlas", type=Path)
    sp.add_argument("--atlas-manifest", type=Path)
    sp.add_argument("--glyph-seed", "--seed", dest="glyph_seed", type=int, default=0)
    sp.add_argument("--cell-size", type=int, default=32)
    sp.add_argument("--render-test", action="store_true")
    sp.add_argument("--lexicon", type=Path)
    sp.add_argument("--out", required=True, type=Path)

    sp = add("eval", cmd_eval, "score generated images against ground truth")
    sp.add_argument("--generated", required=True, type=Path)
    sp.add_argument("--truth", required=True, type=Path)
    sp.add_argument("--atlas", type=Path)
    sp.add_argument("--atlas-manifest", type=Path)
    sp.add_argument("--layout", choices=["vertical", "horizontal"], default="vertical")
    sp.add_argument("--threshold", type=float, default=0.5)
    sp.add_argument("--out", type=Path)

    sp = add("gap", cmd_gap, "accumulated train-test accuracy gap from a curve CSV")
    sp.add_argument("--curves", required=True, type=Path)
    sp.add_argument("--sum", action="store_true")

    sp = add("report", cmd_report, "CSV tables and SVG PMD plots for a dataset")
    sp.add_argument("--input", required=True, type=Path)
    sp.add_argument("--vocab", type=Path)
    sp.add_argument("--name")
    sp.add_argument("--out", required=True, type=Path)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (SkewError, OSError, KeyError) as e:
        err = {"error": str(e), "type": type(e).__name__, "command": args.command}
        sys.stderr.write(json.dumps(err) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
