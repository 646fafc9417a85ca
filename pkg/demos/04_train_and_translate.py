#!/usr/bin/env python3
"""End to end: synthesize a world, train the full model, translate.

The decoder runs exactly three steps with per-slot vocabulary masks, so its
output is always a well-formed (subject, predicate, object) over the KG
vocabulary. With attention enabled the result also says which source tokens
each slot looked at. Runs in well under a minute on one core.
"""

import tempfile
from pathlib import Path

import numpy as np

from text2triple.corpus import AnnotatedExample, Dataset
from text2triple.embeddings import TransEConfig, decoder_init_table, transe_train
from text2triple.model import (
    ModelConfig,
    load_checkpoint,
    save_checkpoint,
    train,
    translate_beam,
    translate_greedy,
)
from text2triple.numerics import make_rng, uniform_init
from text2triple.synthetic import make_easy_world
from text2triple.vocab import build_kg_vocab, build_word_vocab

world = make_easy_world(n_entities=12, n_predicates=4, n_sentences=60,
                        seed=42, word_dim=64)
word_vocab = build_word_vocab([list(ex.tokens) for ex in world.train])
tvocab = build_kg_vocab(world.kg.triples)
print(f"world: {len(world.train)} sentences, {len(tvocab.entities)} entities, "
      f"{len(tvocab.predicates)} predicates, |V_w|={len(word_vocab)}")

print("\ntraining TransE for the decoder init ...")
emb = transe_train(world.kg, TransEConfig(dim=64, epochs=100, seed=42))
rng = make_rng(43)
kg_init, coverage = decoder_init_table(emb, tvocab, 64, rng)
word_init = np.vstack([
    world.word_vectors.get(tok, uniform_init(64, rng)) for tok in word_vocab.tokens
])
print(f"decoder init coverage: {coverage:.0%}")

config = ModelConfig(
    word_dim=64, kg_dim=64, enc_hidden=64, dec_hidden=128,
    use_attention=True, use_word_init=True, use_kg_init=True,
    seed=42, epochs=300, batch_size=8, patience=60,
)
dev = [AnnotatedExample(ex.tokens, ex.gold, f"dev:{i}")
       for i, ex in enumerate(world.train)]
print("training the translator (stops once the corpus is memorized) ...")
result = train(Dataset(train=world.train, dev=dev), word_vocab, tvocab, config,
               word_init=word_init, kg_init=kg_init)
print(f"stopped after {len(result.log)} epochs, dev exact-match "
      f"{result.best_dev_f1:.2f}")

print("\n== greedy translations with attention ==")
for ex in world.train[:3]:
    out = translate_greedy(ex.tokens, result.params, word_vocab, tvocab, config)
    print(f"  {' '.join(ex.tokens)}")
    print(f"    -> {out.triple.subject} {out.triple.predicate} {out.triple.object} "
          f"(log-prob {out.total_logprob:.3f}, correct={out.triple == ex.gold})")
    for slot, row in zip(("s", "p", "o"), out.attention):
        print(f"       {slot} attends to {ex.tokens[int(row.argmax())]!r} "
              f"({row.max():.2f})")

print("\n== beam search keeps runners-up ==")
beam = translate_beam(world.train[0].tokens, result.params, word_vocab, tvocab,
                      config, width=3)
for hyp in beam:
    print(f"  {hyp.total_logprob:8.3f}  {hyp.triple.subject} "
          f"{hyp.triple.predicate} {hyp.triple.object}")

print("\n== checkpoint round trip ==")
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "demo.ckpt"
    save_checkpoint(path, result.params, config, word_vocab, tvocab)
    params2, *_ = load_checkpoint(path)
    same = all((v == params2.to_dict()[k]).all()
               for k, v in result.params.to_dict().items())
    print(f"saved {path.stat().st_size} bytes; reload bit-identical: {same}")
