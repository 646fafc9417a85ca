"""Embedding-table initialization: TransE for the decoder, word vectors for
the encoder.

TransE represents a relation as a vector translation and scores a triple by
the dissimilarity ||h + r - t|| (L1 or L2). Training minimizes the margin
ranking loss sum(max(0, margin + score(pos) - score(neg))) with filtered
uniform corruption and renormalizes entity rows to the unit sphere after
every batch. Word vectors are loaded from a textual file; vocabulary rows
the file does not cover fall back to uniform random init.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import KnowledgeGraph, Triple
from .numerics import make_rng, uniform_init
from .vocab import RESERVED_TOKENS, TripleVocab, WordVocab, build_kg_vocab

__all__ = [
    "KgEmbeddings",
    "TransEConfig",
    "decoder_init_table",
    "link_prediction_eval",
    "load_kg_embeddings",
    "load_word_vectors",
    "negative_sample",
    "save_kg_embeddings",
    "transe_score",
    "transe_train",
]

logger = logging.getLogger(__name__)

_NORMS = ("L1", "L2")


@dataclass
class TransEConfig:
    dim: int = 64
    margin: float = 1.0
    lr: float = 0.01
    epochs: int = 200
    batch_size: int = 32
    norm: str = "L2"
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        if self.norm not in _NORMS:
            raise ValueError(f"norm must be one of {_NORMS}")


@dataclass
class KgEmbeddings:
    """Entity and relation vector tables, row order = TripleVocab id order."""

    entity_symbols: tuple[str, ...]
    relation_symbols: tuple[str, ...]
    entity_table: np.ndarray
    relation_table: np.ndarray
    dim: int
    norm: str
    _eidx: dict[str, int] = field(init=False, repr=False, compare=False)
    _ridx: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.entity_table.shape != (len(self.entity_symbols), self.dim):
            raise ValueError("entity table shape does not match symbols/dim")
        if self.relation_table.shape != (len(self.relation_symbols), self.dim):
            raise ValueError("relation table shape does not match symbols/dim")
        self._eidx = {s: i for i, s in enumerate(self.entity_symbols)}
        self._ridx = {s: i for i, s in enumerate(self.relation_symbols)}

    def entity_vec(self, symbol: str) -> np.ndarray:
        return self.entity_table[self._eidx[symbol]]

    def relation_vec(self, symbol: str) -> np.ndarray:
        return self.relation_table[self._ridx[symbol]]


def transe_score(h: np.ndarray, r: np.ndarray, t: np.ndarray, norm: str = "L2") -> float:
    """Dissimilarity ||h + r - t|| under the given norm; 0 means exact fit."""
    if norm not in _NORMS:
        raise ValueError(f"norm must be one of {_NORMS}")
    h, r, t = (np.asarray(v, dtype=np.float64) for v in (h, r, t))
    if not (h.shape == r.shape == t.shape) or h.ndim != 1:
        raise ValueError(f"vector shapes differ: {h.shape}, {r.shape}, {t.shape}")
    diff = h + r - t
    if norm == "L1":
        return float(np.abs(diff).sum())
    return float(np.linalg.norm(diff))


def _score_rows(rows: np.ndarray, norm: str) -> np.ndarray:
    if norm == "L1":
        return np.abs(rows).sum(axis=1)
    return np.sqrt((rows * rows).sum(axis=1))


def _norm_grad(diff: np.ndarray, norm: str) -> np.ndarray:
    if norm == "L1":
        return np.sign(diff)
    return diff / max(float(np.linalg.norm(diff)), 1e-12)


def negative_sample(
    triple: Triple, kg: KnowledgeGraph, rng: np.random.Generator
) -> Triple:
    """Corrupt head or tail (fair coin) with a uniform entity, filtered.

    Resamples while the corrupted triple is a KG member, so no negative is
    ever a true fact. The predicate is never altered.
    """
    entities = kg.entity_list()
    if len(entities) < 2:
        raise ValueError("negative sampling needs at least 2 entities")
    for _ in range(100):
        head_side = bool(rng.integers(2) == 0)
        ent = entities[int(rng.integers(len(entities)))]
        cand = (
            Triple(ent, triple.predicate, triple.object)
            if head_side
            else Triple(triple.subject, triple.predicate, ent)
        )
        if cand not in kg.triples:
            return cand
    # Dense KG: enumerate the valid corruptions instead of resampling.
    valid = [
        cand
        for ent in entities
        for cand in (
            Triple(ent, triple.predicate, triple.object),
            Triple(triple.subject, triple.predicate, ent),
        )
        if cand not in kg.triples
    ]
    if not valid:
        raise ValueError(f"no valid corruption exists for {triple}")
    return valid[int(rng.integers(len(valid)))]


def transe_train(
    kg: KnowledgeGraph, config: TransEConfig, init: KgEmbeddings | None = None
) -> KgEmbeddings:
    """Margin-ranking SGD over the KG; deterministic given config.seed.

    Entity rows touched in a batch are renormalized to unit L2 afterwards,
    so a batch with no active hinge leaves the tables bit-identical. Passing
    ``init`` warm-starts from existing tables instead of random init (the
    uniform(-6/sqrt(d), 6/sqrt(d)) scheme with rows normalized once).
    """
    if not kg.triples:
        raise ValueError("cannot train TransE on an empty KG")
    tv = build_kg_vocab(kg.triples)
    ents, rels = tv.entities, tv.predicates
    rng = make_rng(config.seed)
    if init is not None:
        missing = (set(ents) - set(init.entity_symbols)) | (
            set(rels) - set(init.relation_symbols)
        )
        if missing or init.dim != config.dim:
            raise ValueError("init tables do not cover this KG at the configured dim")
        ents, rels = init.entity_symbols, init.relation_symbols
        ent_table = init.entity_table.copy()
        rel_table = init.relation_table.copy()
    else:
        bound = 6.0 / math.sqrt(config.dim)
        ent_table = rng.uniform(-bound, bound, (len(ents), config.dim))
        rel_table = rng.uniform(-bound, bound, (len(rels), config.dim))
        rel_table /= np.maximum(np.linalg.norm(rel_table, axis=1, keepdims=True), 1e-12)
        ent_table /= np.maximum(np.linalg.norm(ent_table, axis=1, keepdims=True), 1e-12)
    eidx = {s: i for i, s in enumerate(ents)}
    ridx = {s: i for i, s in enumerate(rels)}

    triples = sorted(kg.triples)
    n = len(triples)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            ent_upd: dict[int, np.ndarray] = {}
            rel_upd: dict[int, np.ndarray] = {}

            def bump(upd, idx, vec):
                if idx in upd:
                    upd[idx] = upd[idx] + vec
                else:
                    upd[idx] = vec

            for j in batch:
                pos = triples[j]
                neg = negative_sample(pos, kg, rng)
                h, r, t = eidx[pos.subject], ridx[pos.predicate], eidx[pos.object]
                hn, tn = eidx[neg.subject], eidx[neg.object]
                v_pos = ent_table[h] + rel_table[r] - ent_table[t]
                v_neg = ent_table[hn] + rel_table[r] - ent_table[tn]
                s_pos = float(_score_rows(v_pos[None, :], config.norm)[0])
                s_neg = float(_score_rows(v_neg[None, :], config.norm)[0])
                hinge = config.margin + s_pos - s_neg
                if hinge <= 0.0:
                    continue
                epoch_loss += hinge
                g_pos = _norm_grad(v_pos, config.norm)
                g_neg = _norm_grad(v_neg, config.norm)
                bump(ent_upd, h, g_pos)
                bump(ent_upd, t, -g_pos)
                bump(rel_upd, r, g_pos - g_neg)
                bump(ent_upd, hn, -g_neg)
                bump(ent_upd, tn, g_neg)
            for idx, g in rel_upd.items():
                rel_table[idx] -= config.lr * g
            for idx, g in sorted(ent_upd.items()):
                row = ent_table[idx] - config.lr * g
                ent_table[idx] = row / max(float(np.linalg.norm(row)), 1e-12)
        if not math.isfinite(epoch_loss):
            raise RuntimeError(f"TransE loss became non-finite at epoch {epoch + 1}")
        if (epoch + 1) % 50 == 0 or epoch == 0:
            logger.debug("transe epoch %d loss %.4f", epoch + 1, epoch_loss)
    return KgEmbeddings(ents, rels, ent_table, rel_table, config.dim, config.norm)


def link_prediction_eval(
    emb: KgEmbeddings, triples: Iterable[Triple], k: int = 1
) -> tuple[float, float]:
    """Mean rank and hits@k over head and tail prediction.

    For each triple the true tail is ranked among all entities by the score
    of (h, r, .), and the true head symmetrically; both ranks count.
    """
    triples = list(triples)
    if len(emb.entity_symbols) < 2:
        raise ValueError("link prediction needs at least 2 entities")
    ranks = []
    E = emb.entity_table
    for tr in triples:
        for sym in (tr.subject, tr.predicate, tr.object):
            if sym not in emb._eidx and sym not in emb._ridx:
                raise ValueError(f"symbol {sym!r} has no embedding")
        h = emb.entity_vec(tr.subject)
        r = emb.relation_vec(tr.predicate)
        t = emb.entity_vec(tr.object)
        tail_scores = _score_rows(h + r - E, emb.norm)
        true_tail = tail_scores[emb._eidx[tr.object]]
        ranks.append(1 + int((tail_scores < true_tail).sum()))
        head_scores = _score_rows(E + r - t, emb.norm)
        true_head = head_scores[emb._eidx[tr.subject]]
        ranks.append(1 + int((head_scores < true_head).sum()))
    ranks_arr = np.array(ranks, dtype=np.float64)
    return float(ranks_arr.mean()), float((ranks_arr <= k).mean())


# ---------------------------------------------------------------------------
# Textual vector files
# ---------------------------------------------------------------------------


def _parse_vector_file(path, dim: int) -> dict[str, np.ndarray]:
    """Read ``token v1 .. v_d`` lines; optional leading ``count dim`` header."""
    path = Path(path)
    vectors: dict[str, np.ndarray] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2:
                try:
                    _, header_dim = int(parts[0]), int(parts[1])
                except ValueError:
                    pass
                else:
                    if header_dim != dim:
                        raise ValueError(
                            f"{path}:1: header dimension {header_dim}, expected {dim}"
                        )
                    continue
            token, vals = parts[0], parts[1:]
            if len(vals) != dim:
                raise ValueError(
                    f"{path}:{lineno}: expected {dim} vector values, got {len(vals)}"
                )
            if token in vectors:
                continue  # first occurrence wins
            vectors[token] = np.array([float(v) for v in vals], dtype=np.float64)
    return vectors


def load_word_vectors(
    path, vocab: WordVocab, dim: int, rng: np.random.Generator
) -> tuple[np.ndarray, float]:
    """Encoder embedding table: file rows where covered, random elsewhere.

    Returns (table, coverage). Coverage is the fraction of non-reserved
    vocabulary tokens found in the file; PAD/UNK/BOS are always random-init.
    """
    table = uniform_init((len(vocab), dim), rng)
    vectors = _parse_vector_file(path, dim)
    covered = 0
    non_reserved = len(vocab) - len(RESERVED_TOKENS)
    for idx, token in enumerate(vocab.tokens):
        if idx < len(RESERVED_TOKENS):
            continue
        vec = vectors.get(token)
        if vec is not None:
            table[idx] = vec
            covered += 1
    coverage = covered / non_reserved if non_reserved else 0.0
    if coverage < 0.2:
        logger.warning(
            "word-vector coverage %.1f%% (%d/%d tokens); vocabulary mismatch?",
            100 * coverage, covered, non_reserved,
        )
    return table, coverage


def decoder_init_table(
    emb: KgEmbeddings, tvocab: TripleVocab, dim: int, rng: np.random.Generator
) -> tuple[np.ndarray, float]:
    """Decoder embedding table from TransE vectors.

    Entity vectors land at entity target ids and relation vectors at
    predicate ids; the BOS row and any symbol without a vector stay
    random-init. Returns (table, coverage over non-BOS ids).
    """
    if emb.dim != dim:
        raise ValueError(f"KG embedding dim {emb.dim} != decoder embedding dim {dim}")
    table = uniform_init((tvocab.n_targets, dim), rng)
    covered = 0
    for sym in tvocab.entities:
        if sym in emb._eidx:
            table[tvocab.entity_id(sym)] = emb.entity_vec(sym)
            covered += 1
    for sym in tvocab.predicates:
        if sym in emb._ridx:
            table[tvocab.predicate_id(sym)] = emb.relation_vec(sym)
            covered += 1
    coverage = covered / (tvocab.n_targets - 1)
    return table, coverage


# ---------------------------------------------------------------------------
# Export / import
# ---------------------------------------------------------------------------

ENTITIES_FILE = "entities.vec"
RELATIONS_FILE = "relations.vec"
MANIFEST_FILE = "manifest.json"


def _write_vector_file(path, symbols: Sequence[str], table: np.ndarray) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"{len(symbols)} {table.shape[1]}\n")
        for sym, row in zip(symbols, table):
            if any(ch.isspace() for ch in sym):
                raise ValueError(f"symbol {sym!r} contains whitespace")
            fh.write(sym + " " + " ".join(repr(float(v)) for v in row) + "\n")


def save_kg_embeddings(emb: KgEmbeddings, out_dir, config: TransEConfig) -> None:
    """Write entities.vec, relations.vec and a manifest with the settings."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_vector_file(out / ENTITIES_FILE, emb.entity_symbols, emb.entity_table)
    _write_vector_file(out / RELATIONS_FILE, emb.relation_symbols, emb.relation_table)
    manifest = {
        "dim": emb.dim,
        "norm": emb.norm,
        "margin": config.margin,
        "seed": config.seed,
        "entities": len(emb.entity_symbols),
        "relations": len(emb.relation_symbols),
    }
    (out / MANIFEST_FILE).write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def _read_vector_file(path) -> tuple[tuple[str, ...], np.ndarray]:
    syms: list[str] = []
    rows: list[np.ndarray] = []
    dim = None
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2:
                dim = int(parts[1])
                continue
            if dim is None:
                dim = len(parts) - 1
            if len(parts) - 1 != dim:
                raise ValueError(f"{path}:{lineno}: expected {dim} values")
            syms.append(parts[0])
            rows.append(np.array([float(v) for v in parts[1:]], dtype=np.float64))
    if not syms:
        raise ValueError(f"{path}: no vectors found")
    return tuple(syms), np.vstack(rows)


def load_kg_embeddings(in_dir) -> KgEmbeddings:
    """Read tables written by save_kg_embeddings."""
    in_dir = Path(in_dir)
    manifest = json.loads((in_dir / MANIFEST_FILE).read_text(encoding="utf-8"))
    ents, etab = _read_vector_file(in_dir / ENTITIES_FILE)
    rels, rtab = _read_vector_file(in_dir / RELATIONS_FILE)
    return KgEmbeddings(ents, rels, etab, rtab, int(manifest["dim"]), manifest["norm"])
