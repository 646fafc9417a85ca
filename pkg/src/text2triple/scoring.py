"""Strict triple-level scoring and the error taxonomy.

A prediction counts only if subject, predicate and object are all correct.
Precision runs over emitted predictions (abstentions excluded from the
denominator), recall over gold triples, F1 is their harmonic mean; when
every example has exactly one prediction this reduces to accuracy.
"""

from __future__ import annotations

import enum
import statistics
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .corpus import KnowledgeGraph, Triple
from .vocab import TripleVocab

__all__ = [
    "ErrorCategory",
    "EvalReport",
    "error_taxonomy",
    "evaluate",
    "exact_match",
    "format_ablation_grid",
    "format_report",
    "report_records",
]


class ErrorCategory(enum.Enum):
    OOV_ENTITY = "OOV_ENTITY"
    OOV_PREDICATE = "OOV_PREDICATE"
    OVERLAPPING_RELATION = "OVERLAPPING_RELATION"
    WRONG_SUBJECT = "WRONG_SUBJECT"
    WRONG_PREDICATE = "WRONG_PREDICATE"
    WRONG_OBJECT = "WRONG_OBJECT"
    MULTIPLE_WRONG = "MULTIPLE_WRONG"


@dataclass
class EvalReport:
    n_gold: int
    n_predicted: int
    n_correct: int
    precision: float
    recall: float
    f1: float
    error_counts: dict[ErrorCategory, int] = field(default_factory=dict)


def exact_match(pred: Triple, gold: Triple) -> bool:
    """True iff all three components are equal as symbols."""
    return (
        pred.subject == gold.subject
        and pred.predicate == gold.predicate
        and pred.object == gold.object
    )


def evaluate(preds: Sequence[Triple | None], golds: Sequence[Triple]) -> EvalReport:
    """All-or-nothing P/R/F1 over aligned predictions and golds.

    A None prediction is an abstention: it cannot be correct and does not
    count toward the precision denominator. 0/0 ratios are defined as 0.
    """
    if len(preds) != len(golds):
        raise ValueError(f"{len(preds)} predictions vs {len(golds)} golds")
    n_predicted = sum(1 for p in preds if p is not None)
    n_correct = sum(
        1 for p, g in zip(preds, golds) if p is not None and exact_match(p, g)
    )
    n_gold = len(golds)
    precision = n_correct / n_predicted if n_predicted else 0.0
    recall = n_correct / n_gold if n_gold else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return EvalReport(n_gold, n_predicted, n_correct, precision, recall, f1)


def _pair_overlaps(pred: Triple, kg: KnowledgeGraph | None) -> bool:
    """Does the predicted entity pair participate in >1 KG triple?"""
    if kg is None:
        return False
    pair = (pred.subject, pred.object)
    flipped = (pred.object, pred.subject)
    n = sum(
        1 for t in kg.triples if (t.subject, t.object) in (pair, flipped)
    )
    return n >= 2


def error_taxonomy(
    preds: Sequence[Triple | None],
    golds: Sequence[Triple],
    tvocab: TripleVocab,
    kg: KnowledgeGraph | None = None,
) -> dict[ErrorCategory, int]:
    """Assign each incorrect example exactly one category.

    Precedence: out-of-vocabulary gold symbols first, then overlapping
    relations (right entity pair, wrong predicate, and the pair holds more
    than one KG relation), then single-slot errors, then MULTIPLE_WRONG.
    """
    if len(preds) != len(golds):
        raise ValueError(f"{len(preds)} predictions vs {len(golds)} golds")
    counts = {cat: 0 for cat in ErrorCategory}
    for pred, gold in zip(preds, golds):
        if pred is not None and exact_match(pred, gold):
            continue
        if not (tvocab.has_entity(gold.subject) and tvocab.has_entity(gold.object)):
            counts[ErrorCategory.OOV_ENTITY] += 1
            continue
        if not tvocab.has_predicate(gold.predicate):
            counts[ErrorCategory.OOV_PREDICATE] += 1
            continue
        if pred is None:
            counts[ErrorCategory.MULTIPLE_WRONG] += 1
            continue
        wrong = [
            pred.subject != gold.subject,
            pred.predicate != gold.predicate,
            pred.object != gold.object,
        ]
        if wrong[1] and not wrong[0] and not wrong[2] and _pair_overlaps(pred, kg):
            counts[ErrorCategory.OVERLAPPING_RELATION] += 1
        elif sum(wrong) == 1:
            slot = wrong.index(True)
            counts[
                (
                    ErrorCategory.WRONG_SUBJECT,
                    ErrorCategory.WRONG_PREDICATE,
                    ErrorCategory.WRONG_OBJECT,
                )[slot]
            ] += 1
        else:
            counts[ErrorCategory.MULTIPLE_WRONG] += 1
    return counts


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def format_report(report: EvalReport) -> str:
    """Human-readable summary table."""
    lines = [
        f"{'gold triples':<22}{report.n_gold}",
        f"{'predictions':<22}{report.n_predicted}",
        f"{'correct':<22}{report.n_correct}",
        f"{'precision':<22}{report.precision:.6f}",
        f"{'recall':<22}{report.recall:.6f}",
        f"{'F1':<22}{report.f1:.6f}",
    ]
    if report.error_counts:
        lines.append("errors by category:")
        for cat in ErrorCategory:
            lines.append(f"  {cat.value:<22}{report.error_counts.get(cat, 0)}")
    return "\n".join(lines)


def report_records(report: EvalReport) -> list[str]:
    """Line-oriented machine records, fixed key order."""
    recs = [
        f"n_gold\t{report.n_gold}",
        f"n_predicted\t{report.n_predicted}",
        f"n_correct\t{report.n_correct}",
        f"precision\t{report.precision:.6f}",
        f"recall\t{report.recall:.6f}",
        f"f1\t{report.f1:.6f}",
    ]
    for cat in ErrorCategory:
        recs.append(f"error.{cat.value}\t{report.error_counts.get(cat, 0)}")
    return recs


def format_ablation_grid(
    results: Mapping[str, Mapping[str, Sequence[float]]]
) -> str:
    """Matrix of median F1 per (configuration row, dataset column).

    ``results[config_label][dataset] -> per-seed F1 values``. Medians render
    in the grid; per-seed values follow underneath when any cell has more
    than one run.
    """
    rows = list(results)
    columns: list[str] = []
    for per_dataset in results.values():
        for ds in per_dataset:
            if ds not in columns:
                columns.append(ds)
    width = max([len(r) for r in rows] + [10])
    header = "config".ljust(width) + "".join(f"{c:>14}" for c in columns)
    lines = [header]
    for label in rows:
        cells = []
        for ds in columns:
            vals = results[label].get(ds)
            cells.append(f"{statistics.median(vals):>14.4f}" if vals else f"{'-':>14}")
        lines.append(label.ljust(width) + "".join(cells))
    if any(len(vals) > 1 for per in results.values() for vals in per.values()):
        lines.append("")
        lines.append("per-seed values:")
        for label in rows:
            for ds in columns:
                vals = results[label].get(ds)
                if vals:
                    joined = ", ".join(f"{v:.4f}" for v in vals)
                    lines.append(f"  {label} / {ds}: [{joined}]")
    return "\n".join(lines)
