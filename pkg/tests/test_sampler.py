import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_dataset, random_dataset, small_universe
from skewlens.core import Pair, Scene, SkewError
from skewlens.metrics import completeness_at, position_counts, skew_report
from skewlens.sampler import (PATTERN_KINDS, InfeasibleError, PatternSpec, SplitResult, TargetSpec,
                              assign_phrasings, extract_complete_subsample, generate_pattern_mask,
                              split_from_mask, split_from_train, subsample_to_targets)


def split_for(n, kind, seed=0, **params):
    u = small_universe(n)
    return split_from_mask(u, generate_pattern_mask(u, PatternSpec(kind, params, seed)))


def test_latin_n9_q3():
    split = split_for(9, "latin_complete_balanced", seed=4, quota=3)
    assert split.mask.sum(axis=0).tolist() == [3] * 9
    assert split.mask.sum(axis=1).tolist() == [3] * 9
    assert split.achieved.completeness == 1.0
    assert split.achieved.balance >= 0.99


def test_block_both_n9():
    split = split_for(9, "block_incomplete_both", block=6)
    assert split.achieved.completeness_per_position == pytest.approx({"top": 6 / 9, "bottom": 6 / 9})
    counts = position_counts(split.train)
    assert counts[6:].sum() == 0


def test_block_one():
    r = split_for(10, "block_incomplete_one", block=5).achieved
    assert r.completeness_per_position == pytest.approx({"top": 0.5, "bottom": 1.0})


def test_banded_balance_grows_with_reverse_band():
    blc = [split_for(30, "banded_unbalanced", reverse=r).achieved for r in (1, 3, 6)]
    assert all(r.completeness == 1.0 for r in blc)
    assert blc[0].balance < blc[1].balance < blc[2].balance


def test_quota_balance_grows_with_quota():
    lo = split_for(30, "quota_unbalanced", quota=2).achieved
    hi = split_for(30, "quota_unbalanced", quota=8).achieved
    assert lo.completeness == hi.completeness == 1.0
    assert lo.balance < hi.balance


def test_random_complete_balanced():
    r = split_for(12, "random_complete_balanced", seed=3, quota=4).achieved
    assert r.completeness == 1.0 and r.balance >= 0.99


def test_pattern_errors():
    u = small_universe(9)
    with pytest.raises(InfeasibleError):
        generate_pattern_mask(u, PatternSpec("latin_complete_balanced", {"quota": 0}, 1))
    with pytest.raises(InfeasibleError):
        generate_pattern_mask(u, PatternSpec("latin_complete_balanced", {"quota": 9}, 1))
    with pytest.raises(InfeasibleError):
        generate_pattern_mask(u, PatternSpec("block_incomplete_both", {}))
    with pytest.raises(SkewError):
        PatternSpec("latin_complete_balanced", {"quota": 2})
    with pytest.raises(SkewError):
        PatternSpec("spiral")


@pytest.mark.parametrize("kind", PATTERN_KINDS)
def test_patterns_deterministic_and_diagonal_free(kind):
    params = {"block": 4, "reverse": 2, "quota": 3}
    u = small_universe(10)
    a = generate_pattern_mask(u, PatternSpec(kind, params, 11))
    b = generate_pattern_mask(u, PatternSpec(kind, params, 11))
    assert np.array_equal(a, b)
    assert not np.diagonal(a).any()


def test_split_full_mask_rejected():
    u = small_universe(3)
    full = ~np.eye(3, dtype=bool)
    with pytest.raises(SkewError, match="no test"):
        split_from_mask(u, full)
    with pytest.raises(SkewError, match="no training"):
        split_from_mask(u, np.zeros((3, 3), dtype=bool))


def test_split_single_cell():
    u = small_universe(3)
    mask = np.zeros((3, 3), dtype=bool)
    mask[0, 1] = True
    split = split_from_mask(u, mask)
    assert len(split.train) == 1 and len(split.test) == 5
    assert split.train.scenes[0].fillers == ("c00", "c01")


def test_split_from_train_round_trip():
    split = split_for(8, "latin_complete_balanced", seed=2, quota=2)
    again = split_from_train(small_universe(8), split.train)
    assert np.array_equal(again.mask, split.mask)
    assert again.test.scenes == split.test.scenes


# -- extraction ----------------------------------------------------------------

def test_extract_prunes_concept():
    d = make_dataset([("a", "b"), ("b", "a"), ("a", "c")])
    out = extract_complete_subsample(d, "visual")
    assert [s.fillers for s in out] == [("a", "b"), ("b", "a")]
    assert out.concept_vocab.concepts == ("a", "b")
    assert completeness_at("top", out) == completeness_at("bottom", out) == 1.0


def test_extract_chain_cascades_to_empty():
    d = make_dataset([("a", "b"), ("b", "c"), ("c", "d")])
    out = extract_complete_subsample(d, "visual")
    assert len(out) == 0 and out.concept_vocab.N == 0


def test_extract_fixpoint_identity():
    d = make_dataset([("a", "b"), ("b", "a")])
    out = extract_complete_subsample(d, "visual")
    assert out.scenes == d.scenes


def test_extract_both_perspectives_stricter():
    # a/b swap top/bottom, but a is always the subject
    s1 = Scene((Pair("a", "subject", "top"), Pair("b", "object", "bottom")), "on top of")
    s2 = Scene((Pair("a", "subject", "bottom"), Pair("b", "object", "top")), "at the bottom of")
    d = make_dataset([("a", "b")]).replace([s1, s2])
    assert len(extract_complete_subsample(d, "visual")) == 2
    assert len(extract_complete_subsample(d, "both")) == 0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_extract_properties(seed):
    d = random_dataset(np.random.default_rng(seed), max_n=8, max_scenes=30)
    out = extract_complete_subsample(d, "visual")
    assert set(out.scenes) <= set(d.scenes)
    assert extract_complete_subsample(out, "visual").scenes == out.scenes
    if len(out):
        for r in out.vis_vocab.positions:
            assert completeness_at(r, out) == 1.0


# -- target-driven subsampling -------------------------------------------------------

def test_subsample_identity_at_full_coverage(u15, u15_data):
    r = skew_report(u15_data, u15)
    t = TargetSpec((1.0, 1.0), r.balance, 1.0)
    res = subsample_to_targets(u15_data, t, seed=0, universe=u15)
    assert res.dataset is u15_data and res.swaps == 0 and res.converged


@pytest.mark.parametrize("row", [(100, 100, 100, 48), (100, 50, 63, 47), (87, 87, 75, 49)])
def test_subsample_hits_table_rows(u15, u15_data, row):
    res = subsample_to_targets(u15_data, TargetSpec.from_percent(*row), seed=0, universe=u15)
    got = res.report.table_row()
    assert abs(got["CPL(left)"] - row[0]) <= 3
    assert abs(got["CPL(right)"] - row[1]) <= 3
    assert abs(got["BLC"] - row[2]) <= 3
    assert abs(got["Cov"] - row[3]) <= 3


def test_subsample_deterministic(u15, u15_data):
    t = TargetSpec.from_percent(80, 73, 77, 50)
    a = subsample_to_targets(u15_data, t, seed=5, universe=u15)
    b = subsample_to_targets(u15_data, t, seed=5, universe=u15)
    assert a.dataset.scenes == b.dataset.scenes and a.swaps == b.swaps


def test_subsample_errors(u15, u15_data):
    small = u15_data.replace(u15_data.scenes[:10])
    with pytest.raises(SkewError, match="coverage"):
        subsample_to_targets(small, TargetSpec.from_percent(100, 100, 100, 50), seed=0, universe=u15)
    with pytest.raises(SkewError):
        subsample_to_targets(u15_data, TargetSpec((1.0, 1.0, 1.0), 1.0), seed=0)
    with pytest.raises(SkewError):
        TargetSpec((1.2, 1.0), 1.0)


def test_subsample_reports_unconverged(u15, u15_data):
    # balanced and complete cannot coexist with a single-role concept pattern at 10% coverage
    res = subsample_to_targets(u15_data, TargetSpec.from_percent(100, 20, 100, 10), seed=0, universe=u15)
    assert not res.converged and res.warning


# -- phrasing ---------------------------------------------------------------------

def visual_split(n=12, q=4, seed=1) -> SplitResult:
    return split_for(n, "latin_complete_balanced", seed=seed, quota=q)


def test_phrasing_leaves_visual_untouched():
    split = visual_split()
    before = skew_report(split.train, None, "visual")
    res = assign_phrasings(split, TargetSpec.from_percent(50, 100, 60), seed=0)
    assert skew_report(res.dataset, None, "visual") == before
    for old, new in zip(split.train.scenes, res.dataset.scenes):
        assert old.roles("visual") == new.roles("visual") and old.fillers == new.fillers


def test_phrasing_complete_balanced_within_two_points():
    res = assign_phrasings(visual_split(), TargetSpec.from_percent(100, 100, 100), seed=3)
    row = res.report.table_row()
    assert row["CPL(subject)"] >= 98 and row["CPL(object)"] >= 98 and row["BLC"] >= 98


def test_phrasing_captions_follow_roles():
    res = assign_phrasings(visual_split(), TargetSpec.from_percent(50, 100, 60), seed=0)
    for s in res.dataset.scenes:
        subj = s.filler_at("subject", "linguistic")
        assert s.relation_phrase == ("on top of" if s.filler_at("top", "visual") == subj else "at the bottom of")


def test_subject_at_top_phrasing_limits_subject_completeness():
    d = make_dataset([("a", "b"), ("a", "c"), ("b", "c")])
    r = skew_report(d, perspective="linguistic")
    tops = {s.filler_at("top", "visual") for s in d}
    assert r.completeness_per_position["subject"] == pytest.approx(len(tops) / 3)


def test_random_phrasing_large_sample_balanced():
    rng = np.random.default_rng(0)
    split = visual_split(30, 17, seed=2)
    scenes = [s.swapped_phrasing() if rng.random() < 0.5 else s for s in split.train.scenes]
    d = split.train.replace(scenes)
    assert len(d) >= 500
    assert skew_report(d, perspective="linguistic").balance >= 0.95


def test_phrasing_deterministic():
    t = TargetSpec.from_percent(70, 100, 80)
    a = assign_phrasings(visual_split(), t, seed=9)
    b = assign_phrasings(visual_split(), t, seed=9)
    assert [s.pairs for s in a.dataset] == [s.pairs for s in b.dataset]
