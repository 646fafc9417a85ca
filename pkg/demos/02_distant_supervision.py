#!/usr/bin/env python3
"""Turning raw sentences plus a knowledge graph into an annotated corpus.

A sentence gets labeled with a KG triple when aliases of both its entities
occur as non-overlapping token spans. Sentences that support several triples
are ambiguous; they land in a report instead of the corpus, because the
model emits exactly one triple per sentence and overlapping relations are a
known noise source.
"""

from text2triple.corpus import KnowledgeGraph, Triple, distant_supervise
from text2triple.vocab import tokenize

kg = KnowledgeGraph(
    frozenset({
        Triple("dbr:Germany", "dbo:capital", "dbr:Berlin"),
        Triple("dbr:France", "dbo:capital", "dbr:Paris"),
        Triple("dbr:Seine", "dbo:city", "dbr:Paris"),
        Triple("dbr:Paris", "dbo:country", "dbr:France"),
    }),
    {
        "dbr:Germany": (("germany",),),
        "dbr:Berlin": (("berlin",), ("the", "german", "capital")),
        "dbr:France": (("france",),),
        "dbr:Paris": (("paris",),),
        "dbr:Seine": (("seine",),),
    },
)

sentences = [
    "Berlin is the capital city of Germany.",
    "The Seine crosses Paris at dusk.",
    "Paris remains the pride of France.",   # capital + country: ambiguous
    "Tourists adore the food in Lisbon.",   # no KG entities at all
]

tokenized = [tokenize(s) for s in sentences]
examples, ambiguous = distant_supervise(kg, tokenized)

print("== aligned examples ==")
for ex in examples:
    print(f"  {' '.join(ex.tokens)}")
    print(f"    -> {ex.gold.subject} {ex.gold.predicate} {ex.gold.object}")

print("\n== ambiguity report ==")
for entry in ambiguous:
    print(f"  sentence {entry.index}: {' '.join(entry.tokens)}")
    for tr in entry.triples:
        print(f"    candidate: {tr.subject} {tr.predicate} {tr.object}")

print("\nRe-running with keep_ambiguous=True gives one example per candidate:")
kept, _ = distant_supervise(kg, tokenized, keep_ambiguous=True)
print(f"  default corpus {len(examples)} examples, noise-tolerant corpus {len(kept)}")
