import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from skewlens.core import (ConceptVocabulary, Dataset, Pair, RoleVocabulary, Scene, bind,
                           universe)
from skewlens.sampler import universe_dataset


def tb(a, b, phrase="on top of"):
    """a on top of b, a is the subject."""
    return bind([a, b], ["top", "bottom"], phrase)


def make_dataset(pairs, concepts=None):
    scenes = [tb(a, b) for a, b in pairs]
    if concepts is None:
        concepts = sorted({c for p in pairs for c in p})
    return Dataset(tuple(scenes), ConceptVocabulary(tuple(concepts)))


def random_dataset(rng: np.random.Generator, max_n=6, max_scenes=40, min_scenes=1):
    """Random binary TB dataset with random phrasing; every concept in the vocab, maybe unobserved."""
    n = int(rng.integers(2, max_n + 1))
    concepts = tuple(f"c{k}" for k in range(n))
    scenes = []
    for _ in range(int(rng.integers(min_scenes, max_scenes + 1))):
        a, b = rng.choice(n, size=2, replace=False)
        subj_first = bool(rng.integers(2))
        ling = ("subject", "object") if subj_first else ("object", "subject")
        phrase = "on top of" if subj_first else "at the bottom of"
        scenes.append(Scene((Pair(concepts[a], ling[0], "top"), Pair(concepts[b], ling[1], "bottom")), phrase))
    return Dataset(tuple(scenes), ConceptVocabulary(concepts))


def as_tuples(dataset):
    return [tuple(tuple(p) for p in s.pairs) for s in dataset.scenes]


@pytest.fixture
def abc():
    """D = {(a,b),(b,c),(a,c)} stacked top/bottom."""
    return make_dataset([("a", "b"), ("b", "c"), ("a", "c")])


def small_universe(n=3, axis="TB", repeat=False):
    vocab = ConceptVocabulary(tuple(f"c{k:02d}" for k in range(n)))
    return universe(vocab, RoleVocabulary.visual(axis), repeat)


@pytest.fixture
def u15():
    return small_universe(15, "LR")


@pytest.fixture
def u15_data(u15):
    return universe_dataset(u15)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    lines = getattr(acceptance, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
