"""Caption to scene conversion.

Two entry points: strict parsing of template captions
("a(n) X is <relation> a(n) Y") and lexicon-based phrase matching for
free-form corpora, where a caption is accepted only if it contains exactly
one known spatial phrase.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .core import (AXIS_ROLES, LINGUISTIC, OBJECT, SUBJECT, ConceptVocabulary, Dataset, Pair,
                   RoleVocabulary, Scene, SkewError, UnknownConceptError, article)


class ParseError(SkewError):
    pass


@dataclass(frozen=True)
class LexiconEntry:
    phrase: str
    axis: str
    subject_role: str
    object_role: str


DEFAULT_ENTRIES = (
    LexiconEntry("on top of", "TB", "top", "bottom"),
    LexiconEntry("at the bottom of", "TB", "bottom", "top"),
    LexiconEntry("to the left of", "LR", "left", "right"),
    LexiconEntry("to the right of", "LR", "right", "left"),
    LexiconEntry("in front of", "FB", "front", "behind"),
    LexiconEntry("behind", "FB", "behind", "front"),
)


def _norm(text: str) -> str:
    return " ".join(text.lower().split())


class RelationLexicon:
    def __init__(self, entries: Iterable[LexiconEntry] = DEFAULT_ENTRIES):
        self.entries = tuple(entries)
        self._by_phrase = {}
        for e in self.entries:
            if e.axis not in AXIS_ROLES:
                raise SkewError(f"lexicon entry {e.phrase!r}: unknown axis {e.axis!r}")
            if e.subject_role == e.object_role:
                raise SkewError(f"lexicon entry {e.phrase!r} maps both nouns to {e.subject_role!r}")
            key = _norm(e.phrase)
            if key in self._by_phrase:
                raise SkewError(f"duplicate lexicon phrase {e.phrase!r}")
            self._by_phrase[key] = e
        # longest phrase first so "in front of" wins over any shorter overlap
        alts = sorted(self._by_phrase, key=len, reverse=True)
        self._pattern = re.compile(r"\b(" + "|".join(re.escape(a) for a in alts) + r")\b") if alts else None

    @classmethod
    def from_file(cls, path) -> "RelationLexicon":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(LexiconEntry(d["phrase"], d["axis"], d["subject_visual_role"], d["object_visual_role"])
                   for d in data)

    def to_json(self) -> list[dict]:
        return [{"phrase": e.phrase, "axis": e.axis, "subject_visual_role": e.subject_role,
                 "object_visual_role": e.object_role} for e in self.entries]

    def __contains__(self, phrase: str) -> bool:
        return _norm(phrase) in self._by_phrase

    def entry(self, phrase: str) -> LexiconEntry:
        try:
            return self._by_phrase[_norm(phrase)]
        except KeyError:
            raise ParseError(f"unknown relation phrase {phrase!r}") from None

    def partner(self, phrase: str) -> LexiconEntry:
        """The phrase describing the same layout with subject and object swapped."""
        e = self.entry(phrase)
        for other in self.entries:
            if (other.axis == e.axis and other.subject_role == e.object_role
                    and other.object_role == e.subject_role):
                return other
        raise ParseError(f"no symmetric partner for {phrase!r}")

    def phrase_for(self, subject_role: str, object_role: str) -> str:
        for e in self.entries:
            if e.subject_role == subject_role and e.object_role == object_role:
                return e.phrase
        raise ParseError(f"no phrase maps subject to {subject_role!r} and object to {object_role!r}")

    def find(self, text: str) -> list[re.Match]:
        if self._pattern is None:
            return []
        return list(self._pattern.finditer(text))


DEFAULT_LEXICON = RelationLexicon()


def visual_bindings_for(relation_phrase: str, subject: str, object_: str,
                        lexicon: RelationLexicon = DEFAULT_LEXICON) -> dict[str, str]:
    e = lexicon.entry(relation_phrase)
    return {subject: e.subject_role, object_: e.object_role}


def _make_scene(subject: str, obj: str, entry: LexiconEntry, caption: str, source_id=None) -> Scene:
    return Scene((Pair(subject, SUBJECT, entry.subject_role), Pair(obj, OBJECT, entry.object_role)),
                 relation_phrase=entry.phrase, source_id=source_id, caption=caption)


_TEMPLATE = re.compile(r"^an? (?P<subj>.+?) is (?P<rel>.+) an? (?P<obj>.+?)\.?$")


def parse_template_caption(text: str, lexicon: RelationLexicon = DEFAULT_LEXICON,
                           concept_vocab: ConceptVocabulary | None = None) -> Scene:
    norm = _norm(text)
    matches = lexicon.find(norm)
    if not matches:
        raise ParseError(f"no relation phrase in {text!r}")
    m = _TEMPLATE.match(norm)
    if m is None:
        raise ParseError(f"caption does not follow the template: {text!r}")
    rel = m.group("rel")
    if rel not in lexicon:
        raise ParseError(f"malformed template, relation {rel!r} not in lexicon: {text!r}")
    subj, obj = m.group("subj"), m.group("obj")
    if concept_vocab is not None:
        for noun in (subj, obj):
            if noun not in concept_vocab:
                raise UnknownConceptError(f"noun {noun!r} not in vocabulary")
    if subj == obj:
        raise ParseError(f"caption repeats concept {subj!r}")
    return _make_scene(subj, obj, lexicon.entry(rel), text)


def render_caption(scene: Scene, lexicon: RelationLexicon = DEFAULT_LEXICON) -> str:
    """Template caption for a binary scene, using its recorded phrase when set."""
    subj = scene.filler_at(SUBJECT, LINGUISTIC)
    obj = scene.filler_at(OBJECT, LINGUISTIC)
    if subj is None or obj is None:
        raise ParseError("scene lacks a subject or an object")
    phrase = scene.relation_phrase
    if not phrase:
        phrase = lexicon.phrase_for(unbind_visual(scene, subj), unbind_visual(scene, obj))
    return f"{article(subj)} {subj} is {phrase} {article(obj)} {obj}"


def unbind_visual(scene: Scene, filler: str) -> str:
    for p in scene.pairs:
        if p.filler == filler:
            return p.visual_role
    raise ParseError(f"{filler!r} not in scene")


@dataclass
class ParseReport:
    total: int = 0
    parsed: int = 0
    skipped: int = 0
    reasons: Counter = field(default_factory=Counter)

    def skip(self, reason: str):
        self.skipped += 1
        self.reasons[reason] += 1

    def to_dict(self) -> dict:
        return {"total": self.total, "parsed": self.parsed, "skipped": self.skipped,
                "reasons": dict(sorted(self.reasons.items()))}


NO_PHRASE = "no_spatial_phrase"
MULTIPLE = "multiple_phrases"
UNKNOWN_STRUCTURE = "unknown_structure"
AXIS_FILTERED = "axis_filtered"
UNKNOWN_CONCEPT = "unknown_concept"
INVALID_RECORD = "invalid_record"

_ARTICLES = ("a", "an", "the")
_COPULAS = ("is", "are", "was", "were", "sits", "sit", "stands", "stand")
_TOKEN = re.compile(r"[a-z0-9][a-z0-9'\-]*")


def _clean_np(span: str, leading_copula: bool) -> str | None:
    tokens = _TOKEN.findall(span)
    if leading_copula:
        while tokens and tokens[-1] in _COPULAS:
            tokens.pop()
    while tokens and tokens[0] in _ARTICLES:
        tokens.pop(0)
    if not tokens or any(t in _ARTICLES for t in tokens):
        return None
    return " ".join(tokens)


def parse_wild_caption(text: str, lexicon: RelationLexicon = DEFAULT_LEXICON, source_id=None):
    """Return (scene, None) or (None, skip_reason) for a free-form caption."""
    norm = _norm(text)
    matches = lexicon.find(norm)
    if not matches:
        return None, NO_PHRASE
    if len(matches) > 1:
        return None, MULTIPLE
    m = matches[0]
    subj = _clean_np(norm[:m.start()], leading_copula=True)
    obj = _clean_np(norm[m.end():], leading_copula=False)
    if subj is None or obj is None or subj == obj:
        return None, UNKNOWN_STRUCTURE
    return _make_scene(subj, obj, lexicon.entry(m.group(1)), text, source_id), None


def parse_corpus(records: Iterable[dict], lexicon: RelationLexicon = DEFAULT_LEXICON,
                 axis: str | None = None,
                 concept_vocab: ConceptVocabulary | None = None) -> tuple[Dataset, ParseReport]:
    """Parse a stream of {"caption", "image_id"?} records into a dataset."""
    report = ParseReport()
    scenes = []
    for rec in records:
        report.total += 1
        caption = rec.get("caption") if isinstance(rec, dict) else None
        if not isinstance(caption, str):
            report.skip(INVALID_RECORD)
            continue
        image_id = rec.get("image_id")
        scene, reason = parse_wild_caption(caption, lexicon,
                                           None if image_id is None else str(image_id))
        if scene is None:
            report.skip(reason)
            continue
        if axis is not None and lexicon.entry(scene.relation_phrase).axis != axis:
            report.skip(AXIS_FILTERED)
            continue
        if concept_vocab is not None and any(f not in concept_vocab for f in scene.fillers):
            report.skip(UNKNOWN_CONCEPT)
            continue
        report.parsed += 1
        scenes.append(scene)

    if concept_vocab is None:
        concept_vocab = ConceptVocabulary(tuple(sorted({f for s in scenes for f in s.fillers})))
    if axis is not None:
        vis = RoleVocabulary.visual(axis)
    else:
        used = []
        for s in scenes:
            for p in s.pairs:
                if p.visual_role not in used:
                    used.append(p.visual_role)
        # keep the lexicon's role order
        order = [r for e in lexicon.entries for r in (e.subject_role, e.object_role)]
        roles = sorted(set(used), key=order.index)
        vis = RoleVocabulary("visual", tuple(roles)) if len(roles) >= 2 else RoleVocabulary.visual()
    return Dataset(tuple(scenes), concept_vocab, RoleVocabulary.linguistic(), vis), report
