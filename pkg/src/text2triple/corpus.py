"""Dataset ingestion and distant-supervision alignment.

A dataset is a JSONL file: one record per line with ``tokens`` (array of
strings) and ``triple`` (array of exactly 3 strings). Knowledge graphs are
TSV ``subject<TAB>predicate<TAB>object`` files plus a surface-form file
``entity<TAB>alias`` mapping entities to textual aliases. Distant
supervision pairs a sentence with a KG triple when aliases of both its
entities occur as non-overlapping token subsequences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .vocab import tokenize

__all__ = [
    "AmbiguousSentence",
    "AnnotatedExample",
    "DataError",
    "Dataset",
    "KnowledgeGraph",
    "Triple",
    "distant_supervise",
    "kfold",
    "load_dataset",
    "load_examples",
    "load_kg_file",
    "load_surface_forms",
    "save_examples",
    "split_dataset",
]


class DataError(ValueError):
    """A data file failed validation; the message names the file and line."""


class Triple(NamedTuple):
    """One fact: (subject, predicate, object) in KG vocabulary symbols."""

    subject: str
    predicate: str
    object: str


@dataclass(frozen=True)
class AnnotatedExample:
    """A tokenized sentence paired with exactly one gold triple."""

    tokens: tuple[str, ...]
    gold: Triple
    source_id: str

    def __post_init__(self):
        if not self.tokens:
            raise ValueError(f"{self.source_id}: example has no tokens")


@dataclass
class KnowledgeGraph:
    """Deduplicated triple set plus entity surface forms (token tuples)."""

    triples: frozenset[Triple]
    surface_forms: dict[str, tuple[tuple[str, ...], ...]] = field(default_factory=dict)

    def __post_init__(self):
        self.triples = frozenset(self.triples)
        for ent, aliases in self.surface_forms.items():
            if any(len(a) == 0 for a in aliases):
                raise ValueError(f"entity {ent!r} has an empty alias")

    def entity_list(self) -> tuple[str, ...]:
        ents = {t.subject for t in self.triples} | {t.object for t in self.triples}
        return tuple(sorted(ents))


@dataclass
class Dataset:
    """Train/dev/test splits, disjoint by source_id."""

    train: list[AnnotatedExample] = field(default_factory=list)
    dev: list[AnnotatedExample] = field(default_factory=list)
    test: list[AnnotatedExample] = field(default_factory=list)

    def __post_init__(self):
        seen: dict[str, str] = {}
        for split_name in ("train", "dev", "test"):
            for ex in getattr(self, split_name):
                if ex.source_id in seen and seen[ex.source_id] != split_name:
                    raise ValueError(
                        f"source_id {ex.source_id!r} appears in both "
                        f"{seen[ex.source_id]} and {split_name}"
                    )
                seen[ex.source_id] = split_name


# ---------------------------------------------------------------------------
# File loaders
# ---------------------------------------------------------------------------


def _validate_record(rec, where: str) -> tuple[tuple[str, ...], Triple]:
    if not isinstance(rec, dict):
        raise DataError(f"{where}: record is not an object")
    tokens = rec.get("tokens")
    triple = rec.get("triple")
    if not isinstance(tokens, list) or not tokens or not all(
        isinstance(t, str) and t for t in tokens
    ):
        raise DataError(f"{where}: 'tokens' must be a non-empty array of strings")
    if not isinstance(triple, list) or len(triple) != 3:
        n = len(triple) if isinstance(triple, list) else "missing"
        raise DataError(f"{where}: 'triple' must have exactly 3 elements, got {n}")
    if not all(isinstance(s, str) and s for s in triple):
        raise DataError(f"{where}: 'triple' elements must be non-empty strings")
    return tuple(tokens), Triple(*triple)


def load_examples(path) -> list[AnnotatedExample]:
    """Read one JSONL dataset file. Malformed lines are reported by number."""
    path = Path(path)
    examples = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{where}: invalid JSON ({exc.msg})") from exc
            tokens, triple = _validate_record(rec, where)
            source_id = rec.get("id") or f"{path.name}:{lineno}"
            examples.append(AnnotatedExample(tokens, triple, str(source_id)))
    return examples


def save_examples(examples: Iterable[AnnotatedExample], path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for ex in examples:
            rec = {"id": ex.source_id, "tokens": list(ex.tokens), "triple": list(ex.gold)}
            fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")


def load_dataset(path) -> Dataset:
    """Load a dataset.

    A directory is read as train.jsonl/dev.jsonl/test.jsonl (missing files
    give empty splits); a single file becomes the train split.
    """
    path = Path(path)
    if path.is_dir():
        splits = {}
        for name in ("train", "dev", "test"):
            f = path / f"{name}.jsonl"
            splits[name] = load_examples(f) if f.exists() else []
        return Dataset(**splits)
    return Dataset(train=load_examples(path))


def load_kg_file(path) -> frozenset[Triple]:
    """TSV subject<TAB>predicate<TAB>object, one triple per line."""
    path = Path(path)
    triples = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3 or not all(parts):
                raise DataError(
                    f"{path}:{lineno}: expected 3 tab-separated non-empty fields"
                )
            triples.add(Triple(*parts))
    return frozenset(triples)


def load_surface_forms(path) -> dict[str, tuple[tuple[str, ...], ...]]:
    """TSV entity<TAB>alias; aliases are tokenized, multiple lines per entity."""
    path = Path(path)
    forms: dict[str, list[tuple[str, ...]]] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not all(parts):
                raise DataError(f"{path}:{lineno}: expected entity<TAB>alias")
            alias = tuple(tokenize(parts[1]))
            if not alias:
                raise DataError(f"{path}:{lineno}: alias has no tokens")
            forms.setdefault(parts[0], [])
            if alias not in forms[parts[0]]:
                forms[parts[0]].append(alias)
    return {ent: tuple(aliases) for ent, aliases in forms.items()}


# ---------------------------------------------------------------------------
# Distant supervision
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AmbiguousSentence:
    """A sentence whose entity mentions match more than one KG triple."""

    index: int
    tokens: tuple[str, ...]
    triples: tuple[Triple, ...]


def _find_mentions(
    tokens: list[str], alias_index: list[tuple[tuple[str, ...], str]]
) -> dict[str, list[tuple[int, int]]]:
    """Greedy longest-alias-first matching over non-overlapping spans."""
    taken = [False] * len(tokens)
    mentions: dict[str, list[tuple[int, int]]] = {}
    for alias, entity in alias_index:
        width = len(alias)
        if width > len(tokens):
            continue
        for start in range(len(tokens) - width + 1):
            if any(taken[start:start + width]):
                continue
            if tuple(tokens[start:start + width]) == alias:
                for j in range(start, start + width):
                    taken[j] = True
                mentions.setdefault(entity, []).append((start, start + width))
    return mentions


def match_sentence(
    kg: KnowledgeGraph, tokens: Sequence[str]
) -> list[Triple]:
    """KG triples supported by this sentence's entity mentions."""
    alias_index = [
        (tuple(t.lower() for t in alias), entity)
        for entity, aliases in sorted(kg.surface_forms.items())
        for alias in aliases
    ]
    alias_index.sort(key=lambda pair: (-len(pair[0]), pair[0], pair[1]))
    lowered = [t.lower() for t in tokens]
    mentions = _find_mentions(lowered, alias_index)
    matched = []
    for tr in sorted(kg.triples):
        if tr.subject == tr.object:
            ok = len(mentions.get(tr.subject, ())) >= 2
        else:
            ok = tr.subject in mentions and tr.object in mentions
        if ok:
            matched.append(tr)
    return matched


def distant_supervise(
    kg: KnowledgeGraph,
    sentences: Iterable[Sequence[str]],
    keep_ambiguous: bool = False,
    matches: Iterable[list[Triple]] | None = None,
) -> tuple[list[AnnotatedExample], list[AmbiguousSentence]]:
    """Pair sentences with KG triples via surface-form co-occurrence.

    A sentence matching exactly one triple becomes an example; sentences
    matching several go to the ambiguity report and are excluded unless
    keep_ambiguous re-includes them as one example per matching triple.
    No-match sentences are silently dropped. ``matches`` allows callers to
    precompute match_sentence results (e.g. in parallel).
    """
    examples: list[AnnotatedExample] = []
    report: list[AmbiguousSentence] = []
    sentences = list(sentences)
    if matches is None:
        matches = (match_sentence(kg, sent) for sent in sentences)
    for i, (sent, matched) in enumerate(zip(sentences, matches)):
        toks = tuple(t.lower() for t in sent)
        if len(matched) == 1:
            examples.append(AnnotatedExample(toks, matched[0], f"ds:{i}"))
        elif len(matched) > 1:
            report.append(AmbiguousSentence(i, toks, tuple(matched)))
            if keep_ambiguous:
                for j, tr in enumerate(matched):
                    examples.append(AnnotatedExample(toks, tr, f"ds:{i}:{j}"))
    return examples, report


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------


def split_dataset(
    examples: Sequence[AnnotatedExample],
    ratios: tuple[float, float, float],
    rng: np.random.Generator,
) -> Dataset:
    """Deterministic shuffled split into train/dev/test by ratio."""
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError("ratios must be 3 positive numbers")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    n = len(examples)
    perm = rng.permutation(n)
    c1 = min(n, round(ratios[0] * n))
    c2 = min(n, max(c1, round((ratios[0] + ratios[1]) * n)))
    pick = lambda idx: [examples[j] for j in idx]  # noqa: E731
    return Dataset(train=pick(perm[:c1]), dev=pick(perm[c1:c2]), test=pick(perm[c2:]))


def kfold(
    examples: Sequence[AnnotatedExample], k: int, rng: np.random.Generator
) -> list[list[AnnotatedExample]]:
    """k disjoint folds covering the input exactly once, shuffled by seed."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(examples) < k:
        raise ValueError(f"cannot make {k} folds from {len(examples)} examples")
    perm = rng.permutation(len(examples))
    return [[examples[j] for j in chunk] for chunk in np.array_split(perm, k)]
