"""Completeness, balance, coverage and probability-mass distributions.

All position/concept statistics derive from one (concepts x positions)
occurrence matrix, so every metric in a report is computed from the same
counting pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import (VISUAL, Dataset, SkewError, UnknownConceptError, UnknownRoleError, Universe,
                   check_perspective, deduplicate, universe_of)


def position_counts(dataset: Dataset, perspective: str = VISUAL) -> np.ndarray:
    """Occurrence matrix: counts[n, m] = times concept n was bound to position m."""
    fill, role = dataset.encode(perspective)
    return kernels.count_matrix(fill, role, dataset.concept_vocab.N, dataset.role_vocab(perspective).M)


def _require_nonempty(dataset: Dataset):
    if len(dataset) == 0:
        raise SkewError("metric undefined on an empty dataset")


def completeness_at(position: str, dataset: Dataset, perspective: str = VISUAL) -> float:
    roles = dataset.role_vocab(perspective)
    if position not in roles:
        raise UnknownRoleError(f"unknown position {position!r}")
    if dataset.concept_vocab.N == 0:
        return 0.0
    counts = position_counts(dataset, perspective)
    return float((counts[:, roles.index[position]] > 0).sum() / dataset.concept_vocab.N)


def _completeness_vector(counts: np.ndarray, n_concepts: int) -> np.ndarray:
    return (counts > 0).sum(axis=0) / n_concepts


def completeness(dataset: Dataset, perspective: str = VISUAL) -> float:
    _require_nonempty(dataset)
    counts = position_counts(dataset, perspective)
    weights = counts.sum(axis=0) / counts.sum()
    return float(weights @ _completeness_vector(counts, dataset.concept_vocab.N))


def balance_of(concept: str, dataset: Dataset, perspective: str = VISUAL) -> float:
    """Entropy of the concept's positions, normalised by log M; 0 when never observed."""
    if concept not in dataset.concept_vocab:
        raise UnknownConceptError(f"unknown concept {concept!r}")
    counts = position_counts(dataset, perspective)
    row = counts[dataset.concept_vocab.index[concept]][None, :]
    return float(kernels.normalized_entropy_rows(row)[0])


def balance(dataset: Dataset, perspective: str = VISUAL, uniform_weights: bool = False) -> float:
    _require_nonempty(dataset)
    counts = position_counts(dataset, perspective)
    return _balance_from_counts(counts, uniform_weights)


def _balance_from_counts(counts: np.ndarray, uniform_weights: bool = False) -> float:
    ent = kernels.normalized_entropy_rows(counts)
    rowsum = counts.sum(axis=1)
    if uniform_weights:
        observed = rowsum > 0
        return float(ent[observed].mean()) if observed.any() else 0.0
    return float(rowsum @ ent / rowsum.sum())


def coverage(dataset: Dataset, universe: Universe | None = None) -> float:
    if universe is None:
        universe = universe_of(dataset)
    unique = deduplicate(dataset)
    for scene in unique.scenes:
        universe.cell_of(scene)  # raises for scenes outside the universe
    return len(unique) / len(universe)


@dataclass(frozen=True)
class PMD:
    macro: dict[str, float]
    per_role: dict[str, dict[str, float]]


def pmd(dataset: Dataset, perspective: str = VISUAL) -> PMD:
    _require_nonempty(dataset)
    counts = position_counts(dataset, perspective)
    concepts = dataset.concept_vocab.concepts
    roles = dataset.role_vocab(perspective).positions
    rowsum = counts.sum(axis=1)
    # stable order: descending macro mass, ties by vocabulary order
    order = sorted(range(len(concepts)), key=lambda i: (-rowsum[i], i))
    macro = {concepts[i]: float(rowsum[i] / rowsum.sum()) for i in order}
    per_role = {}
    for m, r in enumerate(roles):
        col = counts[:, m]
        tot = col.sum()
        per_role[r] = {concepts[i]: float(col[i] / tot) for i in order} if tot else {}
    return PMD(macro, per_role)


@dataclass(frozen=True)
class SkewReport:
    perspective: str
    completeness_per_position: dict[str, float]
    completeness: float
    balance_per_concept: dict[str, float]
    balance: float
    coverage: float
    position_weights: dict[str, float]
    concept_weights: dict[str, float]
    unobserved_concepts: tuple[str, ...] = ()
    balance_uniform: float | None = None
    n_scenes: int = 0
    n_concepts: int = 0

    def percent(self, value: float) -> int:
        return int(math.floor(100 * value + 0.5))

    def table_row(self) -> dict[str, int]:
        """Integer-percent columns: CPL(r1), CPL(r2), ..., BLC, Cov."""
        row = {f"CPL({r})": self.percent(v) for r, v in self.completeness_per_position.items()}
        row["CPL"] = self.percent(self.completeness)
        row["BLC"] = self.percent(self.balance)
        row["Cov"] = self.percent(self.coverage)
        return row

    def to_dict(self) -> dict:
        d = {
            "perspective": self.perspective,
            "completeness_per_position": dict(self.completeness_per_position),
            "completeness": self.completeness,
            "balance_per_concept": dict(self.balance_per_concept),
            "balance": self.balance,
            "coverage": self.coverage,
            "position_weights": dict(self.position_weights),
            "concept_weights": dict(self.concept_weights),
            "unobserved_concepts": list(self.unobserved_concepts),
            "n_scenes": self.n_scenes,
            "n_concepts": self.n_concepts,
        }
        if self.balance_uniform is not None:
            d["balance_uniform"] = self.balance_uniform
        return d


def skew_report(dataset: Dataset, universe: Universe | None = None, perspective: str = VISUAL,
                uniform_weights: bool = False) -> SkewReport:
    check_perspective(perspective)
    _require_nonempty(dataset)
    counts = position_counts(dataset, perspective)
    concepts = dataset.concept_vocab.concepts
    roles = dataset.role_vocab(perspective).positions
    colsum = counts.sum(axis=0)
    rowsum = counts.sum(axis=1)
    total = counts.sum()
    cpl = _completeness_vector(counts, len(concepts))
    pos_w = colsum / total
    ent = kernels.normalized_entropy_rows(counts)
    return SkewReport(
        perspective=perspective,
        completeness_per_position={r: float(cpl[m]) for m, r in enumerate(roles)},
        completeness=float(pos_w @ cpl),
        balance_per_concept={c: float(ent[n]) for n, c in enumerate(concepts)},
        balance=_balance_from_counts(counts),
        coverage=coverage(dataset, universe),
        position_weights={r: float(pos_w[m]) for m, r in enumerate(roles)},
        concept_weights={c: float(rowsum[n] / total) for n, c in enumerate(concepts)},
        unobserved_concepts=tuple(c for n, c in enumerate(concepts) if rowsum[n] == 0),
        balance_uniform=_balance_from_counts(counts, True) if uniform_weights else None,
        n_scenes=len(dataset),
        n_concepts=len(concepts),
    )
