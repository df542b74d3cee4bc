"""Controlled-skew training sets.

Three ways to build a training set over a concept-pair universe:

* grid masks from parameterised generators (``generate_pattern_mask``),
* a seeded first-improvement hill-climb that swaps scenes in and out of a
  fixed-size subsample until completeness/balance reach given targets
  (``subsample_to_targets``),
* a second hill-climb that only flips caption phrasings, moving the
  linguistic metrics while leaving the visual layout untouched
  (``assign_phrasings``).

``extract_complete_subsample`` prunes a corpus down to the concepts that are
observed in every position.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import (LINGUISTIC, OBJECT, PERSPECTIVES, SUBJECT, VISUAL, ConceptVocabulary, Dataset,
                   Pair, RoleVocabulary, Scene, SkewError, Universe, deduplicate, universe_of)
from .metrics import SkewReport, skew_report
from .parser import DEFAULT_LEXICON, RelationLexicon

log = logging.getLogger(__name__)

PATTERN_KINDS = (
    "block_incomplete_both",
    "block_incomplete_one",
    "banded_unbalanced",
    "quota_unbalanced",
    "latin_complete_balanced",
    "random_complete_balanced",
)
STOCHASTIC_KINDS = ("latin_complete_balanced", "random_complete_balanced")


@dataclass(frozen=True)
class PatternSpec:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in PATTERN_KINDS:
            raise SkewError(f"unknown pattern kind {self.kind!r}; expected one of {PATTERN_KINDS}")
        if self.kind in STOCHASTIC_KINDS and self.seed is None:
            raise SkewError(f"pattern {self.kind!r} requires a seed")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "seed": self.seed}


class InfeasibleError(SkewError):
    pass


def _param(spec: PatternSpec, name: str, lo: int, hi: int) -> int:
    if name not in spec.params:
        raise InfeasibleError(f"pattern {spec.kind!r} needs parameter {name!r}")
    v = int(spec.params[name])
    if not lo <= v <= hi:
        raise InfeasibleError(f"{spec.kind}: {name}={v} outside [{lo}, {hi}]")
    return v


def _circulant(n: int, offsets) -> np.ndarray:
    mask = np.zeros((n, n), dtype=bool)
    rows = np.arange(n)
    for d in offsets:
        mask[rows, (rows + d) % n] = True
    return mask


def generate_pattern_mask(universe: Universe, spec: PatternSpec) -> np.ndarray:
    """Boolean (N, N) grid; cell (i, j) means concept i in the first position, j in the second."""
    n = universe.N
    kind = spec.kind
    if kind == "block_incomplete_both":
        b = _param(spec, "block", 2, n - 1)
        mask = np.zeros((n, n), dtype=bool)
        mask[:b, :b] = True
    elif kind == "block_incomplete_one":
        b = _param(spec, "block", 2, n - 1)
        mask = np.zeros((n, n), dtype=bool)
        mask[:b, :] = True
    elif kind == "banded_unbalanced":
        # forward band above the diagonal (whole upper triangle by default) plus a
        # narrower reverse band below it; low-index concepts skew to the first
        # position, high-index ones to the second, and a wider reverse band evens them out
        w = _param(spec, "band", 1, n - 1) if "band" in spec.params else n - 1
        r = _param(spec, "reverse", 1, w)
        i, j = np.indices((n, n))
        mask = ((j - i >= 1) & (j - i <= w)) | ((i - j >= 1) & (i - j <= r))
    elif kind == "quota_unbalanced":
        # high group H sits in the first position against all of L; L gets q
        # circulant first-position slots against H, plus one cycle inside each group
        h = n // 2
        q = _param(spec, "quota", 1, h)
        lo_size = n - h
        if lo_size * q < h:
            raise InfeasibleError(f"quota_unbalanced: quota {q} too small to cover {h} concepts")
        mask = np.zeros((n, n), dtype=bool)
        mask[:h, h:] = True
        for k in range(lo_size):
            for d in range(q):
                mask[h + k, (k + d) % h] = True
        for lo, size in ((0, h), (h, lo_size)):
            if size >= 2:
                idx = np.arange(size)
                mask[lo + idx, lo + (idx + 1) % size] = True
    elif kind == "latin_complete_balanced":
        q = _param(spec, "quota", 1, n - 1)
        rng = np.random.default_rng(spec.seed)
        offsets = np.sort(rng.choice(np.arange(1, n), size=q, replace=False))
        mask = _circulant(n, offsets)
    elif kind == "random_complete_balanced":
        q = _param(spec, "quota", 1, n - 1)
        rng = np.random.default_rng(spec.seed)
        offsets = rng.choice(np.arange(1, n), size=q, replace=False)
        perm = rng.permutation(n)
        base = _circulant(n, offsets)
        mask = np.zeros_like(base)
        mask[np.ix_(perm, perm)] = base
    else:  # pragma: no cover - guarded by PatternSpec
        raise SkewError(kind)
    if not universe.allow_repeated_concept:
        np.fill_diagonal(mask, False)
    if not mask.any():
        raise InfeasibleError(f"pattern {kind!r} produced an empty mask")
    return mask


def scene_for_cell(universe: Universe, i: int, j: int,
                   lexicon: RelationLexicon = DEFAULT_LEXICON) -> Scene:
    """Canonical scene for a grid cell: first-position concept is the subject."""
    c = universe.concept_vocab.concepts
    r1, r2 = universe.role_vocab.positions
    return Scene((Pair(c[i], SUBJECT, r1), Pair(c[j], OBJECT, r2)),
                 relation_phrase=lexicon.phrase_for(r1, r2))


def universe_dataset(universe: Universe, lexicon: RelationLexicon = DEFAULT_LEXICON) -> Dataset:
    """Every tuple of the universe once, in row-major cell order."""
    scenes = [scene_for_cell(universe, i, j, lexicon) for i, j in universe.cells()]
    return Dataset(tuple(scenes), universe.concept_vocab, RoleVocabulary.linguistic(), universe.role_vocab)


@dataclass(frozen=True)
class SplitResult:
    train: Dataset
    test: Dataset
    mask: np.ndarray
    achieved: SkewReport

    def __post_init__(self):
        self.mask.setflags(write=False)


def split_from_mask(universe: Universe, mask, lexicon: RelationLexicon = DEFAULT_LEXICON) -> SplitResult:
    mask = np.asarray(mask, dtype=bool)
    n = universe.N
    if mask.shape != (n, n):
        raise SkewError(f"mask shape {mask.shape} does not match universe ({n}, {n})")
    if not universe.allow_repeated_concept and np.diagonal(mask).any():
        raise SkewError("mask marks repeated-concept cells the universe excludes")
    train, test = [], []
    for i, j in universe.cells():
        (train if mask[i, j] else test).append(scene_for_cell(universe, i, j, lexicon))
    if not train:
        raise SkewError("mask selects no training scenes")
    if not test:
        raise SkewError("mask leaves no test scenes")
    mk = lambda s: Dataset(tuple(s), universe.concept_vocab, RoleVocabulary.linguistic(), universe.role_vocab)
    train_ds, test_ds = mk(train), mk(test)
    return SplitResult(train_ds, test_ds, mask.copy(), skew_report(train_ds, universe, VISUAL))


def split_from_train(universe: Universe, train: Dataset) -> SplitResult:
    """Split whose training half is an arbitrary dataset inside the universe."""
    mask = np.zeros((universe.N, universe.N), dtype=bool)
    for s in train.scenes:
        mask[universe.cell_of(s)] = True
    test = [scene_for_cell(universe, i, j) for i, j in universe.cells() if not mask[i, j]]
    if not test:
        raise SkewError("training set covers the whole universe; no test scenes")
    test_ds = Dataset(tuple(test), universe.concept_vocab, RoleVocabulary.linguistic(), universe.role_vocab)
    return SplitResult(train, test_ds, mask, skew_report(train, universe, VISUAL))


# -- complete subsamples ------------------------------------------------------

def extract_complete_subsample(dataset: Dataset, perspective: str = "both") -> Dataset:
    """Iteratively drop concepts missing from any position until none remain.

    ``perspective`` may be "visual", "linguistic" or "both". The result's
    concept vocabulary shrinks to the surviving concepts.
    """
    persp = PERSPECTIVES if perspective == "both" else (perspective,)
    for p in persp:
        if p not in PERSPECTIVES:
            raise SkewError(f"unknown perspective {perspective!r}")
    alive = set(dataset.concept_vocab.concepts)
    scenes = list(dataset.scenes)
    while True:
        complete = set(alive)
        for p in persp:
            positions = dataset.role_vocab(p).positions
            seen = {r: set() for r in positions}
            for s in scenes:
                for pair in s.pairs:
                    seen[pair.role(p)].add(pair.filler)
            for r in positions:
                complete &= seen[r]
        if complete == alive:
            break
        alive = complete
        scenes = [s for s in scenes if all(f in alive for f in s.fillers)]
    if not scenes:
        log.warning("complete subsample is empty")
    vocab = ConceptVocabulary(tuple(c for c in dataset.concept_vocab.concepts if c in alive))
    return Dataset(tuple(scenes), vocab, dataset.ling_vocab, dataset.vis_vocab)


# -- target-driven subsampling --------------------------------------------------

@dataclass(frozen=True)
class TargetSpec:
    target_cpl_per_position: tuple[float, ...]
    target_blc: float
    target_coverage: float = 1.0
    tolerance: float = 0.03

    def __post_init__(self):
        object.__setattr__(self, "target_cpl_per_position", tuple(float(x) for x in self.target_cpl_per_position))
        vals = (*self.target_cpl_per_position, self.target_blc, self.target_coverage, self.tolerance)
        if any(not 0.0 <= v <= 1.0 for v in vals):
            raise SkewError(f"targets must lie in [0, 1]: {vals}")

    @classmethod
    def from_percent(cls, cpl1, cpl2, blc, cov=100, tolerance=0.03) -> "TargetSpec":
        return cls((cpl1 / 100, cpl2 / 100), blc / 100, cov / 100, tolerance)

    @classmethod
    def from_dict(cls, d: dict) -> "TargetSpec":
        return cls(tuple(d["cpl"]), d["blc"], d.get("coverage", 1.0), d.get("tolerance", 0.03))

    def to_dict(self) -> dict:
        return {"cpl": list(self.target_cpl_per_position), "blc": self.target_blc,
                "coverage": self.target_coverage, "tolerance": self.tolerance}


@dataclass(frozen=True)
class SubsampleResult:
    dataset: Dataset
    report: SkewReport
    objective: float
    swaps: int
    converged: bool

    @property
    def warning(self) -> bool:
        return not self.converged


def _within(report: SkewReport, targets: TargetSpec) -> bool:
    tol = targets.tolerance + 1e-12
    cpl = list(report.completeness_per_position.values())
    return (all(abs(a - t) <= tol for a, t in zip(cpl, targets.target_cpl_per_position))
            and abs(report.balance - targets.target_blc) <= tol)


def _check_arity(targets: TargetSpec, roles: RoleVocabulary):
    if len(targets.target_cpl_per_position) != roles.M:
        raise SkewError(f"need {roles.M} completeness targets, got {len(targets.target_cpl_per_position)}")


def _support_sets(n: int, targets: TargetSpec, rng: np.random.Generator) -> list[np.ndarray]:
    sets = []
    for t in targets.target_cpl_per_position:
        size = max(1, min(n, int(np.floor(t * n + 0.5))))
        allowed = np.zeros(n, dtype=bool)
        allowed[rng.choice(n, size=size, replace=False)] = True
        sets.append(allowed)
    return sets


def subsample_to_targets(dataset: Dataset, targets: TargetSpec, seed: int, *,
                         max_swaps: int = 10_000, w_cpl: float = 1.0, w_blc: float = 1.0,
                         perspective: str = VISUAL, universe: Universe | None = None) -> SubsampleResult:
    """Fixed-size subsample whose completeness/balance approach the targets.

    The sample size is set by the coverage target, so every swap keeps
    coverage constant. The initial sample is drawn at random from scenes whose
    concepts fall inside randomly chosen per-position support sets sized to
    the completeness targets; the climb then accepts the first improving
    (removal, addition) swap in seeded-shuffled order.
    """
    roles = dataset.role_vocab(perspective)
    _check_arity(targets, roles)
    if universe is None:
        universe = universe_of(dataset)
    pool = deduplicate(dataset)
    size = int(np.floor(targets.target_coverage * len(universe) + 0.5))
    if size > len(pool):
        raise SkewError(f"coverage target needs {size} unique scenes, dataset has {len(pool)}")
    if size == 0:
        raise SkewError("coverage target selects no scenes")
    if abs(size / len(universe) - targets.target_coverage) > targets.tolerance:
        raise SkewError("coverage target not attainable within tolerance on this universe")

    fill, role = pool.encode(perspective)
    n = pool.concept_vocab.N
    t_cpl = np.asarray(targets.target_cpl_per_position, dtype=np.float64)
    t_blc = float(targets.target_blc)
    rng = np.random.default_rng(seed)

    if size == len(pool):
        chosen = np.arange(len(pool))
    else:
        support = _support_sets(n, targets, rng)
        ok = np.ones(len(pool), dtype=bool)
        for k in range(fill.shape[1]):
            for m in range(roles.M):
                at_m = role[:, k] == m
                ok &= ~at_m | support[m][fill[:, k]]
        preferred = rng.permutation(np.flatnonzero(ok))
        rest = rng.permutation(np.flatnonzero(~ok))
        chosen = np.concatenate([preferred, rest])[:size]

    in_sample = np.zeros(len(pool), dtype=bool)
    in_sample[chosen] = True
    counts = kernels.count_matrix(fill[in_sample], role[in_sample], n, roles.M)
    obj = kernels.objective(counts, t_cpl, t_blc, w_cpl, w_blc)

    swaps = 0
    while swaps < max_swaps and obj > 1e-12:
        ins = np.flatnonzero(in_sample)
        outs = np.flatnonzero(~in_sample)
        if outs.size == 0:
            break
        improved = False
        for r in rng.permutation(ins):
            cand = kernels.swap_objectives(counts, fill[r], role[r], fill[outs], role[outs],
                                           t_cpl, t_blc, w_cpl, w_blc)
            order = rng.permutation(outs.size)
            better = np.flatnonzero(cand[order] < obj - 1e-12)
            if better.size:
                a = outs[order[better[0]]]
                in_sample[r] = False
                in_sample[a] = True
                np.subtract.at(counts, (fill[r], role[r]), 1)
                np.add.at(counts, (fill[a], role[a]), 1)
                obj = float(cand[order[better[0]]])
                swaps += 1
                improved = True
                break
        if not improved:
            break

    keep = np.flatnonzero(in_sample)
    sample = pool.replace(pool.scenes[i] for i in keep)
    if size == len(pool) and len(pool) == len(dataset):
        sample = dataset
    report = skew_report(sample, universe, perspective)
    converged = _within(report, targets)
    if not converged:
        log.warning("subsample_to_targets: targets not reached (objective %.4f after %d swaps)", obj, swaps)
    return SubsampleResult(sample, report, obj, swaps, converged)


# -- phrasing assignment ----------------------------------------------------------

def _greedy_supports(n: int, fill: np.ndarray, targets: TargetSpec, rng: np.random.Generator):
    """Shrink subject/object support sets while every scene keeps a valid phrasing."""
    sizes = [max(1, min(n, int(np.floor(t * n + 0.5)))) for t in targets.target_cpl_per_position]
    allowed = [np.ones(n, dtype=bool), np.ones(n, dtype=bool)]
    a, b = fill[:, 0], fill[:, 1]
    degree = np.bincount(fill.ravel(), minlength=n)
    tiebreak = rng.permutation(n)

    def feasible(subj, obj):
        return bool(np.all((subj[a] & obj[b]) | (subj[b] & obj[a])))

    for role_idx in (0, 1):
        order = sorted(range(n), key=lambda c: (degree[c], tiebreak[c]))
        for c in order:
            if allowed[role_idx].sum() <= sizes[role_idx]:
                break
            trial = allowed[role_idx].copy()
            trial[c] = False
            pair = (trial, allowed[1]) if role_idx == 0 else (allowed[0], trial)
            if feasible(*pair):
                allowed[role_idx] = trial
    return allowed


def assign_phrasings(split, targets: TargetSpec, seed: int, *,
                     lexicon: RelationLexicon = DEFAULT_LEXICON, max_flips: int = 10_000,
                     w_cpl: float = 1.0, w_blc: float = 1.0) -> SubsampleResult:
    """Choose one of the two equivalent phrasings per training scene.

    Only grammatical roles and relation phrases change; visual bindings are
    never touched. ``split`` may be a SplitResult or a Dataset.
    """
    train = split.train if isinstance(split, SplitResult) else split
    _check_arity(targets, train.ling_vocab)
    if len(train) == 0:
        raise SkewError("cannot phrase an empty training set")
    for s in train.scenes:
        if s.K != 2:
            raise SkewError("phrasing assignment needs binary scenes")
        lexicon.partner(s.relation_phrase or lexicon.phrase_for(s.pairs[0].visual_role, s.pairs[1].visual_role))

    n = train.concept_vocab.N
    fill, _ = train.encode(VISUAL)
    rng = np.random.default_rng(seed)
    subj_ok, obj_ok = _greedy_supports(n, fill, targets, rng)
    a, b = fill[:, 0], fill[:, 1]
    can_keep = subj_ok[a] & obj_ok[b]    # first pair stays subject
    can_swap = subj_ok[b] & obj_ok[a]
    coin = rng.random(len(train)) < 0.5
    # orientation: 0 -> first pair is subject, 1 -> second pair is subject
    orient = np.where(can_keep & can_swap, coin.astype(np.int64),
                      np.where(can_keep, 0, np.where(can_swap, 1, coin.astype(np.int64))))
    lrole = np.stack([orient, 1 - orient], axis=1).astype(np.int64)

    t_cpl = np.asarray(targets.target_cpl_per_position, dtype=np.float64)
    t_blc = float(targets.target_blc)
    counts = kernels.count_matrix(fill, lrole, n, 2)
    obj = kernels.objective(counts, t_cpl, t_blc, w_cpl, w_blc)
    flips = 0
    while flips < max_flips and obj > 1e-12:
        cand = kernels.flip_objectives(counts, fill, lrole, t_cpl, t_blc, w_cpl, w_blc)
        order = rng.permutation(len(train))
        better = np.flatnonzero(cand[order] < obj - 1e-12)
        if not better.size:
            break
        s = order[better[0]]
        fa, fb = fill[s]
        ra, rb = lrole[s]
        counts[fa, ra] -= 1
        counts[fb, rb] -= 1
        counts[fa, rb] += 1
        counts[fb, ra] += 1
        lrole[s] = (rb, ra)
        obj = float(cand[s])
        flips += 1

    ling = train.ling_vocab.positions
    scenes = []
    for s, (ra, rb) in zip(train.scenes, lrole):
        p0, p1 = s.pairs
        new0 = Pair(p0.filler, ling[ra], p0.visual_role)
        new1 = Pair(p1.filler, ling[rb], p1.visual_role)
        subj, obj_pair = (new0, new1) if ling[ra] == SUBJECT else (new1, new0)
        phrase = lexicon.phrase_for(subj.visual_role, obj_pair.visual_role)
        scenes.append(Scene((new0, new1), relation_phrase=phrase, source_id=s.source_id))
    phrased = train.replace(scenes)
    report = skew_report(phrased, None, LINGUISTIC)
    converged = _within(report, targets)
    if not converged:
        log.warning("assign_phrasings: targets not reached (objective %.4f after %d flips)", obj, flips)
    return SubsampleResult(phrased, report, obj, flips, converged)
