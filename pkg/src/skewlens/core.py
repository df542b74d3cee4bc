"""Role-filler binding primitives: vocabularies, scenes, datasets, universes."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

LINGUISTIC = "linguistic"
VISUAL = "visual"
PERSPECTIVES = (LINGUISTIC, VISUAL)

SUBJECT = "subject"
OBJECT = "object"
LINGUISTIC_ROLES = (SUBJECT, OBJECT)

# Visual role pairs per axis, first role is the one drawn first (top / left / front).
AXIS_ROLES = {
    "TB": ("top", "bottom"),
    "LR": ("left", "right"),
    "FB": ("front", "behind"),
}


class SkewError(ValueError):
    """Base error for invalid inputs to skewlens operations."""


class BindingError(SkewError):
    pass


class UnknownConceptError(SkewError):
    pass


class UnknownRoleError(SkewError):
    pass


def check_perspective(perspective: str) -> str:
    if perspective not in PERSPECTIVES:
        raise SkewError(f"unknown perspective {perspective!r}; expected one of {PERSPECTIVES}")
    return perspective


def axis_of_roles(roles: Iterable[str]) -> str | None:
    roles = set(roles)
    for axis, pair in AXIS_ROLES.items():
        if roles <= set(pair):
            return axis
    return None


@dataclass(frozen=True)
class ConceptVocabulary:
    concepts: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "concepts", tuple(self.concepts))
        if len(set(self.concepts)) != len(self.concepts):
            dupes = sorted({c for c in self.concepts if self.concepts.count(c) > 1})
            raise SkewError(f"duplicate concepts in vocabulary: {dupes}")
        # An empty vocabulary is allowed only as the vocabulary of an empty dataset.
        if len(self.concepts) == 1:
            raise SkewError("a concept vocabulary needs at least 2 concepts")

    @property
    def N(self) -> int:
        return len(self.concepts)

    @cached_property
    def index(self) -> dict[str, int]:
        return {c: i for i, c in enumerate(self.concepts)}

    def __contains__(self, concept) -> bool:
        return concept in self.index

    def __len__(self) -> int:
        return len(self.concepts)

    def __iter__(self):
        return iter(self.concepts)


@dataclass(frozen=True)
class RoleVocabulary:
    perspective: str
    positions: tuple[str, ...]

    def __post_init__(self):
        check_perspective(self.perspective)
        object.__setattr__(self, "positions", tuple(self.positions))
        if len(set(self.positions)) != len(self.positions):
            raise SkewError(f"duplicate roles in vocabulary: {self.positions}")
        if len(self.positions) < 2:
            raise SkewError("a role vocabulary needs at least 2 positions")
        if self.perspective == LINGUISTIC and set(self.positions) != set(LINGUISTIC_ROLES):
            raise SkewError(f"linguistic roles must be {LINGUISTIC_ROLES}, got {self.positions}")

    @property
    def M(self) -> int:
        return len(self.positions)

    @cached_property
    def index(self) -> dict[str, int]:
        return {r: i for i, r in enumerate(self.positions)}

    def __contains__(self, role) -> bool:
        return role in self.index

    @classmethod
    def linguistic(cls) -> "RoleVocabulary":
        return cls(LINGUISTIC, LINGUISTIC_ROLES)

    @classmethod
    def visual(cls, axis: str = "TB") -> "RoleVocabulary":
        try:
            return cls(VISUAL, AXIS_ROLES[axis])
        except KeyError:
            raise SkewError(f"unknown axis {axis!r}; expected one of {sorted(AXIS_ROLES)}") from None


class Pair(NamedTuple):
    filler: str
    linguistic_role: str
    visual_role: str

    def role(self, perspective: str) -> str:
        return self.linguistic_role if perspective == LINGUISTIC else self.visual_role


@dataclass(frozen=True)
class Scene:
    """One image: its role-filler pairs under both role vocabularies."""

    pairs: tuple[Pair, ...]
    relation_phrase: str = ""
    source_id: str | None = field(default=None, compare=False)
    caption: str | None = field(default=None, compare=False)

    def __post_init__(self):
        pairs = tuple(Pair(*p) for p in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        for perspective in PERSPECTIVES:
            roles = [p.role(perspective) for p in pairs]
            if len(set(roles)) != len(roles):
                raise BindingError(f"duplicate {perspective} role in scene: {roles}")

    @property
    def K(self) -> int:
        return len(self.pairs)

    @property
    def fillers(self) -> tuple[str, ...]:
        return tuple(p.filler for p in self.pairs)

    def roles(self, perspective: str) -> tuple[str, ...]:
        return tuple(p.role(perspective) for p in self.pairs)

    def filler_at(self, role: str, perspective: str) -> str | None:
        for p in self.pairs:
            if p.role(perspective) == role:
                return p.filler
        return None

    def visual_key(self, vis_vocab: RoleVocabulary) -> tuple:
        """(f_1, r_1, ..., f_K, r_K) ordered by visual role index."""
        ordered = sorted(self.pairs, key=lambda p: vis_vocab.index.get(p.visual_role, len(vis_vocab.positions)))
        return tuple(itertools.chain.from_iterable((p.filler, p.visual_role) for p in ordered))

    def swapped_phrasing(self) -> "Scene":
        """Same visual layout with the two grammatical roles exchanged."""
        if self.K != 2:
            raise BindingError("phrasing swaps are defined for binary scenes only")
        a, b = self.pairs
        return Scene(
            (Pair(a.filler, b.linguistic_role, a.visual_role), Pair(b.filler, a.linguistic_role, b.visual_role)),
            relation_phrase=self.relation_phrase,
            source_id=self.source_id,
        )


def bind(fillers: Sequence[str], roles: Sequence[str], phrase: str = "", *,
         linguistic_roles: Sequence[str] | None = None,
         vocab: ConceptVocabulary | None = None,
         source_id: str | None = None) -> Scene:
    """Pair fillers with visual roles by index.

    Linguistic roles default to caption order: the first filler is the subject.
    """
    fillers, roles = list(fillers), list(roles)
    if len(fillers) != len(roles):
        raise BindingError(f"length mismatch: {len(fillers)} fillers, {len(roles)} roles")
    if len(set(roles)) != len(roles):
        raise BindingError(f"duplicate role in {roles}")
    if vocab is not None:
        for f in fillers:
            if f not in vocab:
                raise UnknownConceptError(f"unknown concept {f!r}")
    if linguistic_roles is None:
        if len(fillers) != 2:
            raise BindingError("linguistic roles must be given for non-binary scenes")
        linguistic_roles = LINGUISTIC_ROLES
    linguistic_roles = list(linguistic_roles)
    if len(linguistic_roles) != len(fillers):
        raise BindingError("length mismatch between fillers and linguistic roles")
    return Scene(tuple(Pair(f, lr, vr) for f, lr, vr in zip(fillers, linguistic_roles, roles)),
                 relation_phrase=phrase, source_id=source_id)


def unbind(scene: Scene, filler: str, perspective: str = VISUAL) -> str | None:
    for p in scene.pairs:
        if p.filler == filler:
            return p.role(perspective)
    return None


@dataclass(frozen=True)
class Dataset:
    scenes: tuple[Scene, ...]
    concept_vocab: ConceptVocabulary
    ling_vocab: RoleVocabulary = field(default_factory=RoleVocabulary.linguistic)
    vis_vocab: RoleVocabulary = field(default_factory=RoleVocabulary.visual)

    def __post_init__(self):
        object.__setattr__(self, "scenes", tuple(self.scenes))
        for i, s in enumerate(self.scenes):
            for p in s.pairs:
                if p.filler not in self.concept_vocab:
                    raise UnknownConceptError(f"scene {i}: unknown concept {p.filler!r}")
                if p.linguistic_role not in self.ling_vocab:
                    raise UnknownRoleError(f"scene {i}: unknown linguistic role {p.linguistic_role!r}")
                if p.visual_role not in self.vis_vocab:
                    raise UnknownRoleError(f"scene {i}: unknown visual role {p.visual_role!r}")

    def __len__(self) -> int:
        return len(self.scenes)

    def __iter__(self) -> Iterator[Scene]:
        return iter(self.scenes)

    def role_vocab(self, perspective: str) -> RoleVocabulary:
        return self.ling_vocab if check_perspective(perspective) == LINGUISTIC else self.vis_vocab

    def replace(self, scenes: Iterable[Scene], concept_vocab: ConceptVocabulary | None = None) -> "Dataset":
        return Dataset(tuple(scenes), concept_vocab or self.concept_vocab, self.ling_vocab, self.vis_vocab)

    @cached_property
    def _encoded(self) -> dict:
        return {}

    def encode(self, perspective: str) -> tuple[np.ndarray, np.ndarray]:
        """Integer (scenes, K) arrays of concept and role indices."""
        check_perspective(perspective)
        cache = self._encoded
        if perspective not in cache:
            cidx = self.concept_vocab.index
            ridx = self.role_vocab(perspective).index
            k = max((s.K for s in self.scenes), default=0)
            if any(s.K != k for s in self.scenes):
                raise SkewError("encoding requires every scene to have the same arity")
            fill = np.array([[cidx[p.filler] for p in s.pairs] for s in self.scenes], dtype=np.int64)
            role = np.array([[ridx[p.role(perspective)] for p in s.pairs] for s in self.scenes], dtype=np.int64)
            cache[perspective] = (fill.reshape(len(self.scenes), k), role.reshape(len(self.scenes), k))
        return cache[perspective]


def unbind_dataset(dataset: Dataset, concept: str, perspective: str = VISUAL) -> set[str]:
    if concept not in dataset.concept_vocab:
        raise UnknownConceptError(f"unknown concept {concept!r}")
    roles = set()
    for scene in dataset.scenes:
        r = unbind(scene, concept, perspective)
        if r is not None:
            roles.add(r)
    return roles


def deduplicate(dataset: Dataset) -> Dataset:
    """Keep the first scene for every distinct visual tuple, in order."""
    seen = set()
    kept = []
    for s in dataset.scenes:
        key = s.visual_key(dataset.vis_vocab)
        if key not in seen:
            seen.add(key)
            kept.append(s)
    if len(kept) == len(dataset.scenes):
        return dataset
    return dataset.replace(kept)


@dataclass(frozen=True)
class Universe:
    """All ordered assignments of concepts to the two positions of a role vocabulary."""

    concept_vocab: ConceptVocabulary
    role_vocab: RoleVocabulary
    allow_repeated_concept: bool = False

    def __post_init__(self):
        if self.role_vocab.M != 2:
            raise SkewError(f"only binary relations are supported (M=2), got M={self.role_vocab.M}")

    @property
    def N(self) -> int:
        return self.concept_vocab.N

    def __len__(self) -> int:
        n = self.N
        return n * n if self.allow_repeated_concept else n * (n - 1)

    def __iter__(self) -> Iterator[tuple[str, str]]:
        c = self.concept_vocab.concepts
        for i, j in self.cells():
            yield c[i], c[j]

    def cells(self) -> Iterator[tuple[int, int]]:
        n = self.N
        for i in range(n):
            for j in range(n):
                if i != j or self.allow_repeated_concept:
                    yield i, j

    def cell_of(self, scene: Scene, perspective: str = VISUAL) -> tuple[int, int]:
        first, second = self.role_vocab.positions
        a = scene.filler_at(first, perspective)
        b = scene.filler_at(second, perspective)
        if scene.K != 2 or a is None or b is None:
            raise SkewError(f"scene {scene.fillers} does not bind both positions {self.role_vocab.positions}")
        idx = self.concept_vocab.index
        if a not in idx or b not in idx:
            raise UnknownConceptError(f"scene {scene.fillers} uses concepts outside the universe")
        if a == b and not self.allow_repeated_concept:
            raise SkewError(f"scene repeats concept {a!r} but the universe excludes repeats")
        return idx[a], idx[b]

    def __contains__(self, scene) -> bool:
        try:
            self.cell_of(scene)
        except SkewError:
            return False
        return True


def universe(concept_vocab: ConceptVocabulary, role_vocab: RoleVocabulary,
             allow_repeat: bool = False) -> Universe:
    return Universe(concept_vocab, role_vocab, allow_repeat)


def universe_of(dataset: Dataset, allow_repeat: bool = False) -> Universe:
    return Universe(dataset.concept_vocab, dataset.vis_vocab, allow_repeat)


# -- canonical records -------------------------------------------------------

def article(noun: str) -> str:
    return "an" if noun[:1].lower() in "aeiou" else "a"


def scene_to_record(scene: Scene) -> dict:
    subj = scene.filler_at(SUBJECT, LINGUISTIC)
    obj = scene.filler_at(OBJECT, LINGUISTIC)
    caption = scene.caption
    if caption is None and subj is not None and obj is not None and scene.relation_phrase:
        caption = f"{article(subj)} {subj} is {scene.relation_phrase} {article(obj)} {obj}"
    rec = {
        "caption": caption,
        "subject": subj,
        "object": obj,
        "relation": scene.relation_phrase,
        "visual": {p.filler: p.visual_role for p in scene.pairs},
    }
    if scene.source_id is not None:
        rec["source_id"] = scene.source_id
    return rec


def record_to_scene(rec: dict) -> Scene:
    try:
        subj, obj, visual = rec["subject"], rec["object"], rec["visual"]
    except KeyError as e:
        raise SkewError(f"record missing field {e.args[0]!r}") from None
    if subj == obj:
        raise BindingError(f"record binds {subj!r} to both grammatical roles")
    missing = [c for c in (subj, obj) if c not in visual]
    if missing:
        raise BindingError(f"record has no visual role for {missing}")
    return Scene(
        (Pair(subj, SUBJECT, visual[subj]), Pair(obj, OBJECT, visual[obj])),
        relation_phrase=rec.get("relation", "") or "",
        source_id=rec.get("source_id"),
        caption=rec.get("caption"),
    )


def load_vocab_manifest(path) -> tuple[ConceptVocabulary, RoleVocabulary, RoleVocabulary]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    concepts = ConceptVocabulary(tuple(data["concepts"]))
    vis = RoleVocabulary(VISUAL, tuple(data.get("visual_roles", AXIS_ROLES["TB"])))
    ling = RoleVocabulary(LINGUISTIC, tuple(data.get("linguistic_roles", LINGUISTIC_ROLES)))
    return concepts, ling, vis


def vocab_manifest(dataset: Dataset) -> dict:
    return {
        "concepts": list(dataset.concept_vocab.concepts),
        "visual_roles": list(dataset.vis_vocab.positions),
        "linguistic_roles": list(dataset.ling_vocab.positions),
    }


def dataset_from_scenes(scenes: Sequence[Scene], concept_vocab: ConceptVocabulary | None = None,
                        vis_vocab: RoleVocabulary | None = None) -> Dataset:
    """Build a dataset, inferring vocabularies from the scenes when not given."""
    scenes = tuple(scenes)
    if concept_vocab is None:
        concept_vocab = ConceptVocabulary(tuple(sorted({f for s in scenes for f in s.fillers})))
    if vis_vocab is None:
        roles = {p.visual_role for s in scenes for p in s.pairs}
        axis = axis_of_roles(roles)
        if axis is not None:
            vis_vocab = RoleVocabulary.visual(axis)
        elif roles:
            vis_vocab = RoleVocabulary(VISUAL, tuple(sorted(roles)))
        else:
            vis_vocab = RoleVocabulary.visual()
    return Dataset(scenes, concept_vocab, RoleVocabulary.linguistic(), vis_vocab)
