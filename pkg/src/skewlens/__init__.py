"""Skew metrics, controlled splits and synthetic renders for relational image-caption data."""

from .core import (AXIS_ROLES, LINGUISTIC, VISUAL, ConceptVocabulary, Dataset, Pair, RoleVocabulary, Scene,
                   SkewError, Universe, bind, deduplicate, unbind, unbind_dataset, universe)
from .kernels import BACKEND_NAME
from .metrics import (PMD, SkewReport, balance, balance_of, completeness, completeness_at, coverage, pmd,
                      skew_report)

__version__ = "0.1.0"

__all__ = [
    "AXIS_ROLES", "BACKEND_NAME", "ConceptVocabulary", "Dataset", "LINGUISTIC", "PMD", "Pair",
    "RoleVocabulary", "Scene", "SkewError", "SkewReport", "Universe", "VISUAL", "balance", "balance_of",
    "bind", "completeness", "completeness_at", "coverage", "deduplicate", "pmd", "skew_report", "unbind",
    "unbind_dataset", "universe",
]
