"""Token and knowledge-graph symbol tables.

The word vocabulary maps source tokens to ids with PAD/UNK/BOS reserved. The
triple vocabulary unifies entity and predicate symbols into one target-id
space and hands the decoder a per-step mask: step 1 and 3 may only emit
entities, step 2 only predicates. Subjects and objects share one entity
table, so the step-1 and step-3 masks are identical.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from collections import Counter
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "BOS_ID",
    "BOS_TOKEN",
    "PAD_ID",
    "PAD_TOKEN",
    "RESERVED_TOKENS",
    "TripleVocab",
    "UNK_ID",
    "UNK_TOKEN",
    "WordVocab",
    "build_kg_vocab",
    "build_word_vocab",
    "decode_triple",
    "encode_sentence",
    "load_triple_vocab",
    "load_word_vocab",
    "save_triple_vocab",
    "save_word_vocab",
    "tokenize",
]

PAD_ID, UNK_ID, BOS_ID = 0, 1, 2
PAD_TOKEN, UNK_TOKEN, BOS_TOKEN = "<pad>", "<unk>", "<bos>"
RESERVED_TOKENS = (PAD_TOKEN, UNK_TOKEN, BOS_TOKEN)

# Lowercase word runs; punctuation separates tokens and is dropped, internal
# apostrophes survive ("don't" stays one token).
_TOKEN_RE = re.compile(r"[^\W_]+(?:'[^\W_]+)*", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace/punctuation boundaries."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class WordVocab:
    """token <-> id bijection with PAD=0, UNK=1, BOS=2 reserved."""

    tokens: tuple[str, ...]
    min_count: int = 1
    _ids: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if tuple(self.tokens[:3]) != RESERVED_TOKENS:
            raise ValueError(f"word vocab must start with {RESERVED_TOKENS}")
        self._ids = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self._ids) != len(self.tokens):
            raise ValueError("word vocab contains duplicate tokens")

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def id_of(self, token: str) -> int:
        return self._ids.get(token, UNK_ID)

    def token_of(self, idx: int) -> str:
        return self.tokens[idx]


def build_word_vocab(corpus: Iterable[Sequence[str]], min_count: int = 1) -> WordVocab:
    """Tokens with frequency >= min_count, ids by frequency desc then lexicographic."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts = Counter()
    for sent in corpus:
        counts.update(t for t in sent if t not in RESERVED_TOKENS)
    kept = sorted(
        (tok for tok, n in counts.items() if n >= min_count),
        key=lambda tok: (-counts[tok], tok),
    )
    return WordVocab(RESERVED_TOKENS + tuple(kept), min_count=min_count)


def encode_sentence(tokens: Sequence[str], vocab: WordVocab) -> list[int]:
    """Per-token id lookup; unknown tokens map to UNK. Length preserved."""
    return [vocab.id_of(t) for t in tokens]


@dataclass
class TripleVocab:
    """Entity and predicate tables sharing one target-id space.

    Target ids: 0 is BOS, 1..E are entities, E+1..E+P are predicates. The
    entity and predicate ranges are disjoint and together cover every
    non-BOS id; masks 1 and 3 both select the entity range.
    """

    entities: tuple[str, ...]
    predicates: tuple[str, ...]
    _eids: dict[str, int] = field(init=False, repr=False, compare=False)
    _pids: dict[str, int] = field(init=False, repr=False, compare=False)

    BOS = BOS_TOKEN

    def __post_init__(self):
        for name, syms in (("entity", self.entities), ("predicate", self.predicates)):
            if any(not s for s in syms):
                raise ValueError(f"empty {name} symbol")
            if len(set(syms)) != len(syms):
                raise ValueError(f"duplicate {name} symbols")
        self._eids = {s: i for i, s in enumerate(self.entities)}
        self._pids = {s: i for i, s in enumerate(self.predicates)}

    @property
    def n_targets(self) -> int:
        return 1 + len(self.entities) + len(self.predicates)

    @property
    def bos_id(self) -> int:
        return 0

    def entity_id(self, symbol: str) -> int:
        if symbol not in self._eids:
            raise KeyError(f"unknown entity symbol: {symbol!r}")
        return 1 + self._eids[symbol]

    def predicate_id(self, symbol: str) -> int:
        if symbol not in self._pids:
            raise KeyError(f"unknown predicate symbol: {symbol!r}")
        return 1 + len(self.entities) + self._pids[symbol]

    def has_entity(self, symbol: str) -> bool:
        return symbol in self._eids

    def has_predicate(self, symbol: str) -> bool:
        return symbol in self._pids

    def is_entity_id(self, idx: int) -> bool:
        return 1 <= idx <= len(self.entities)

    def is_predicate_id(self, idx: int) -> bool:
        return len(self.entities) < idx < self.n_targets

    def target_symbol(self, idx: int) -> str:
        if idx == 0:
            return BOS_TOKEN
        if self.is_entity_id(idx):
            return self.entities[idx - 1]
        if self.is_predicate_id(idx):
            return self.predicates[idx - 1 - len(self.entities)]
        raise IndexError(f"target id {idx} out of range [0, {self.n_targets})")

    def step_mask(self, step: int) -> np.ndarray:
        """Boolean mask over target ids allowed at decoding step 1, 2 or 3."""
        if step not in (1, 2, 3):
            raise ValueError(f"decoding step must be 1, 2 or 3, got {step}")
        mask = np.zeros(self.n_targets, dtype=bool)
        if step == 2:
            mask[1 + len(self.entities):] = True
        else:
            mask[1:1 + len(self.entities)] = True
        return mask

    def encode_triple(self, subject: str, predicate: str, obj: str) -> tuple[int, int, int]:
        return (self.entity_id(subject), self.predicate_id(predicate), self.entity_id(obj))

    def has_triple_symbols(self, subject: str, predicate: str, obj: str) -> bool:
        return subject in self._eids and obj in self._eids and predicate in self._pids


def build_kg_vocab(triples) -> TripleVocab:
    """Entity/predicate tables from a set of (subject, predicate, object).

    Accepts any iterable of 3-tuples (corpus.Triple unpacks as one). Symbol
    order is lexicographic, which makes vocab construction deterministic.
    """
    entities: set[str] = set()
    predicates: set[str] = set()
    n = 0
    for t in triples:
        s, p, o = t
        if not (s and p and o):
            raise ValueError(f"triple with empty symbol: {(s, p, o)!r}")
        entities.add(s)
        entities.add(o)
        predicates.add(p)
        n += 1
    if n == 0:
        raise ValueError("cannot build a KG vocabulary from an empty triple set")
    return TripleVocab(tuple(sorted(entities)), tuple(sorted(predicates)))


def decode_triple(ids: Sequence[int], vocab: TripleVocab) -> tuple[str, str, str]:
    """Map three target ids back to (subject, predicate, object) symbols.

    Rejects ids in the wrong partition: that signals a masking bug upstream,
    not bad user input.
    """
    if len(ids) != 3:
        raise ValueError(f"expected exactly 3 target ids, got {len(ids)}")
    for slot, want_entity in ((0, True), (1, False), (2, True)):
        idx = ids[slot]
        ok = vocab.is_entity_id(idx) if want_entity else vocab.is_predicate_id(idx)
        if not ok:
            kind = "an entity" if want_entity else "a predicate"
            raise ValueError(f"target id {idx} in slot {slot} is not {kind} id")
    return (
        vocab.target_symbol(ids[0]),
        vocab.target_symbol(ids[1]),
        vocab.target_symbol(ids[2]),
    )


# ---------------------------------------------------------------------------
# Serialization: one symbol per line, line number = id offset, UTF-8
# ---------------------------------------------------------------------------


def _write_symbols(path, symbols: Iterable[str]) -> None:
    path = Path(path)
    lines = []
    for s in symbols:
        if not s or any(ch in s for ch in ("\n", "\t", " ")):
            raise ValueError(f"symbol not serializable one-per-line: {s!r}")
        lines.append(s)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_symbols(path) -> list[str]:
    text = Path(path).read_text(encoding="utf-8")
    return [line for line in text.splitlines() if line]


def save_word_vocab(vocab: WordVocab, path) -> None:
    _write_symbols(path, vocab.tokens)


def load_word_vocab(path) -> WordVocab:
    return WordVocab(tuple(_read_symbols(path)))


def save_triple_vocab(vocab: TripleVocab, entities_path, predicates_path) -> None:
    _write_symbols(entities_path, vocab.entities)
    _write_symbols(predicates_path, vocab.predicates)


def load_triple_vocab(entities_path, predicates_path) -> TripleVocab:
    return TripleVocab(
        tuple(_read_symbols(entities_path)),
        tuple(_read_symbols(predicates_path)),
    )
