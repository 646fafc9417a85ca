"""Command-line entry point wiring the whole pipeline.

Sub-commands: build-vocab, kg-embed, ds-align, train, eval, translate and
ablation. Every run resolves its configuration from defaults, then an
optional flat key=value config file, then command-line flags (flags win),
logs the resolved result to stderr, and draws all randomness from --seed,
so identical inputs produce byte-identical outputs. Progress and wall-clock
chatter go to stderr only; files and stdout stay deterministic.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields
from pathlib import Path

from . import corpus, embeddings, model, scoring, synthetic, vocab
from .corpus import DataError, Dataset, KnowledgeGraph
from .model import ModelConfig

logger = logging.getLogger("text2triple")

_FLAG_NAMES = {"A": "use_attention", "W": "use_word_init", "G": "use_kg_init"}


def _parse_flags(flag_spec: str) -> dict[str, bool]:
    """--flags A,W,G (or 'none') -> ModelConfig flag overrides."""
    values = {name: False for name in _FLAG_NAMES.values()}
    flag_spec = flag_spec.strip()
    if flag_spec and flag_spec.lower() != "none":
        for part in flag_spec.split(","):
            key = part.strip().upper()
            if key not in _FLAG_NAMES:
                raise ValueError(f"unknown ablation flag {part!r} (expected A, W, G)")
            values[_FLAG_NAMES[key]] = True
    return values


def parse_config_file(path) -> dict[str, str]:
    """Flat key=value lines; blank lines and # comments are ignored."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


_CONFIG_FIELD_TYPES = {f.name: f.type for f in fields(ModelConfig)}


def _coerce(key: str, value: str):
    if key == "step_weights":
        return tuple(float(v) for v in value.split(","))
    if key == "flags":
        return value
    ftype = _CONFIG_FIELD_TYPES.get(key, "str")
    if "bool" in str(ftype):
        return value.lower() in ("1", "true", "yes", "on")
    if "int" in str(ftype):
        return int(value)
    if "float" in str(ftype):
        return float(value)
    return value


def resolve_model_config(args) -> ModelConfig:
    """Defaults, then config file, then explicit command-line flags."""
    values: dict = {}
    file_cfg = parse_config_file(args.config) if getattr(args, "config", None) else {}
    for key, raw in file_cfg.items():
        if key == "flags":
            values.update(_parse_flags(raw))
        elif key in _CONFIG_FIELD_TYPES:
            values[key] = _coerce(key, raw)
        else:
            raise DataError(f"unknown config key {key!r} in {args.config}")
    for key in ("epochs", "batch_size", "patience", "lr"):
        override = getattr(args, key, None)
        if override is not None:
            values[key] = override
    if getattr(args, "flags", None) is not None:
        values.update(_parse_flags(args.flags))
    if getattr(args, "seed", None) is not None:
        values["seed"] = args.seed
    config = ModelConfig(**values)
    resolved = " ".join(f"{k}={v}" for k, v in sorted(vars(config).items()))
    logger.info("resolved config: %s", resolved)
    return config


def _read_sentences(path) -> list[list[str]]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [vocab.tokenize(line) for line in lines if line.strip()]


def _load_kg(path) -> KnowledgeGraph:
    return KnowledgeGraph(corpus.load_kg_file(path))


# ---------------------------------------------------------------------------
# Sub-command handlers
# ---------------------------------------------------------------------------


def _cmd_build_vocab(args) -> int:
    if str(args.corpus).endswith(".jsonl"):
        sentences = [list(ex.tokens) for ex in corpus.load_examples(args.corpus)]
    else:
        sentences = _read_sentences(args.corpus)
    wv = vocab.build_word_vocab(sentences, min_count=args.min_count)
    tv = vocab.build_kg_vocab(corpus.load_kg_file(args.kg))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    vocab.save_word_vocab(wv, out / "words.vocab")
    vocab.save_triple_vocab(tv, out / "entities.vocab", out / "predicates.vocab")
    print(f"words={len(wv)} entities={len(tv.entities)} predicates={len(tv.predicates)}")
    return 0


def _cmd_kg_embed(args) -> int:
    kg = _load_kg(args.kg)
    config = embeddings.TransEConfig(
        dim=args.dim, margin=args.margin, lr=args.lr, epochs=args.epochs,
        batch_size=args.batch_size, norm=args.norm, seed=args.seed,
    )
    emb = embeddings.transe_train(kg, config)
    embeddings.save_kg_embeddings(emb, args.out, config)
    mean_rank, hits = embeddings.link_prediction_eval(emb, sorted(kg.triples), k=1)
    print(f"entities={len(emb.entity_symbols)} relations={len(emb.relation_symbols)} "
          f"mean_rank={mean_rank:.6f} hits@1={hits:.6f}")
    return 0


def _cmd_ds_align(args) -> int:
    kg = KnowledgeGraph(
        corpus.load_kg_file(args.kg), corpus.load_surface_forms(args.surface_forms)
    )
    sentences = _read_sentences(args.sentences)
    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            matches = list(pool.map(lambda s: corpus.match_sentence(kg, s), sentences))
    else:
        matches = [corpus.match_sentence(kg, s) for s in sentences]
    examples, ambiguous = corpus.distant_supervise(
        kg, sentences, keep_ambiguous=args.keep_ambiguous, matches=matches
    )
    corpus.save_examples(examples, args.out)
    if args.ambiguity_report:
        with open(args.ambiguity_report, "w", encoding="utf-8") as fh:
            for entry in ambiguous:
                rec = {
                    "index": entry.index,
                    "tokens": list(entry.tokens),
                    "triples": [list(t) for t in entry.triples],
                }
                fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")
    print(f"examples={len(examples)} ambiguous={len(ambiguous)} "
          f"sentences={len(sentences)}")
    return 0


def _build_vocabs_for_training(
    dataset: Dataset, config: ModelConfig, kg_emb, min_count: int
):
    word_vocab = vocab.build_word_vocab(
        [list(ex.tokens) for ex in dataset.train], min_count=min_count
    )
    if kg_emb is not None:
        # The KG embedding tables define the target vocabulary the decoder
        # is aligned to; otherwise fall back to the gold triples seen.
        tvocab = vocab.TripleVocab(kg_emb.entity_symbols, kg_emb.relation_symbols)
    else:
        gold = [ex.gold for ex in dataset.train + dataset.dev]
        tvocab = vocab.build_kg_vocab(gold)
    return word_vocab, tvocab


def _run_training(args, config: ModelConfig, dataset: Dataset):
    kg_emb = embeddings.load_kg_embeddings(args.kg_embeddings) if args.kg_embeddings else None
    word_vocab, tvocab = _build_vocabs_for_training(
        dataset, config, kg_emb, args.min_count
    )
    rng = model.make_rng(config.seed + 1)  # init-table draws, separate from training
    word_init = None
    if config.use_word_init:
        if not args.word_vectors:
            raise DataError("flag W set but --word-vectors not given")
        word_init, coverage = embeddings.load_word_vectors(
            args.word_vectors, word_vocab, config.word_dim, rng
        )
        logger.info("word-vector coverage: %.1f%%", 100 * coverage)
    kg_init = None
    if config.use_kg_init:
        if kg_emb is None:
            raise DataError("flag G set but --kg-embeddings not given")
        kg_init, coverage = embeddings.decoder_init_table(
            kg_emb, tvocab, config.kg_dim, rng
        )
        logger.info("kg-embedding coverage: %.1f%%", 100 * coverage)
    result = model.train(dataset, word_vocab, tvocab, config,
                         word_init=word_init, kg_init=kg_init)
    return result, word_vocab, tvocab


def _format_epoch_line(stats: model.EpochStats) -> str:
    dev = "na" if stats.dev_f1 is None else f"{stats.dev_f1:.6f}"
    return f"epoch={stats.epoch}\ttrain_loss={stats.train_loss:.6f}\tdev_f1={dev}"


def _cmd_train(args) -> int:
    config = resolve_model_config(args)
    dataset = Dataset(
        train=corpus.load_examples(args.train),
        dev=corpus.load_examples(args.dev) if args.dev else [],
    )
    result, word_vocab, tvocab = _run_training(args, config, dataset)
    model.save_checkpoint(args.out, result.params, config, word_vocab, tvocab)
    log_lines = [_format_epoch_line(s) for s in result.log]
    if args.log:
        Path(args.log).write_text("\n".join(log_lines) + "\n", encoding="utf-8")
    else:
        for line in log_lines:
            print(line)
    if result.aborted:
        print("training aborted on non-finite loss; last good checkpoint kept",
              file=sys.stderr)
        return 1
    return 0


def _cmd_eval(args) -> int:
    params, config, word_vocab, tvocab = model.load_checkpoint(args.checkpoint)
    test = corpus.load_examples(args.test)
    kg = _load_kg(args.kg) if args.kg else None

    def predict(ex):
        return model.translate_greedy(ex.tokens, params, word_vocab, tvocab,
                                      config).triple

    if args.threads > 1:  # inference is pure; map preserves example order
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            preds = list(pool.map(predict, test))
    else:
        preds = [predict(ex) for ex in test]
    golds = [ex.gold for ex in test]
    report = scoring.evaluate(preds, golds)
    report.error_counts = scoring.error_taxonomy(preds, golds, tvocab, kg)
    print(scoring.format_report(report))
    if args.report:
        Path(args.report).write_text(
            "\n".join(scoring.report_records(report)) + "\n", encoding="utf-8"
        )
    return 0


def _print_translation(result: model.DecodeResult, tokens: list[str], verbose: bool) -> None:
    print("\t".join(result.triple))
    if verbose:
        logps = " ".join(f"{v:.4f}" for v in result.step_logprobs)
        print(f"log-probs: {logps} (total {result.total_logprob:.4f})")
        if result.attention is not None:
            for slot, row in zip(("subject", "predicate", "object"), result.attention):
                top = tokens[int(row.argmax())] if tokens else "?"
                print(f"attention[{slot}]: top token {top!r} ({row.max():.3f})")


def _cmd_translate(args) -> int:
    params, config, word_vocab, tvocab = model.load_checkpoint(args.checkpoint)

    def translate_line(line: str, verbose: bool) -> None:
        tokens = vocab.tokenize(line)
        if not tokens:
            print("no tokens in input", file=sys.stderr)
            return
        result = model.translate_greedy(tokens, params, word_vocab, tvocab, config)
        if result.n_unk == len(tokens):
            print("warning: every input token is out of vocabulary", file=sys.stderr)
        _print_translation(result, tokens, verbose)

    if args.text is not None:
        translate_line(args.text, verbose=False)
        return 0
    # Interactive loop: one sentence per line, EOF exits cleanly.
    while True:
        try:
            line = input("> ")
        except EOFError:
            break
        if not line.strip():
            continue
        try:
            translate_line(line, verbose=True)
        except Exception as exc:  # keep the loop alive on bad input
            print(f"warning: {exc}", file=sys.stderr)
    return 0


def _cmd_ablation(args) -> int:
    dataset = Dataset(
        train=corpus.load_examples(args.train),
        dev=corpus.load_examples(args.dev) if args.dev else [],
        test=corpus.load_examples(args.test),
    )
    seeds = [int(s) for s in args.seeds.split(",")]
    grid = [flag_set.strip() for flag_set in args.grid.split(";")]
    results: dict[str, dict[str, list[float]]] = {}
    dataset_label = Path(args.test).stem
    for flag_set in grid:
        scores: list[float] = []
        label = None
        for seed in seeds:
            run_args = argparse.Namespace(
                config=args.config, flags=flag_set, seed=seed, epochs=args.epochs,
                batch_size=None, patience=None, lr=None,
                word_vectors=args.word_vectors, kg_embeddings=args.kg_embeddings,
                min_count=args.min_count,
            )
            config = resolve_model_config(run_args)
            label = config.flag_label()
            result, word_vocab, tvocab = _run_training(run_args, config, dataset)
            preds = [
                model.translate_greedy(ex.tokens, result.params, word_vocab, tvocab,
                                       config).triple
                for ex in dataset.test
            ]
            report = scoring.evaluate(preds, [ex.gold for ex in dataset.test])
            scores.append(report.f1)
            logger.info("ablation %s seed %d: f1=%.4f", label, seed, report.f1)
        results[label] = {dataset_label: scores}
    grid_text = scoring.format_ablation_grid(results)
    print(grid_text)
    if args.report:
        Path(args.report).write_text(grid_text + "\n", encoding="utf-8")
    return 0


def _cmd_make_synthetic(args) -> int:
    """Generate a synthetic world's files (handy fixture for the pipeline)."""
    world = (
        synthetic.make_hard_world(seed=args.seed, word_dim=args.word_dim)
        if args.hard
        else synthetic.make_easy_world(seed=args.seed, word_dim=args.word_dim)
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    corpus.save_examples(world.train, out / "train.jsonl")
    corpus.save_examples(world.dev, out / "dev.jsonl")
    corpus.save_examples(world.test, out / "test.jsonl")
    with (out / "kg.tsv").open("w", encoding="utf-8") as fh:
        for tr in sorted(world.kg.triples):
            fh.write("\t".join(tr) + "\n")
    with (out / "surface.tsv").open("w", encoding="utf-8") as fh:
        for ent, aliases in sorted(world.kg.surface_forms.items()):
            for alias in aliases:
                fh.write(f"{ent}\t{' '.join(alias)}\n")
    synthetic.write_word_vector_file(out / "words.vec", world.word_vectors)
    print(f"train={len(world.train)} dev={len(world.dev)} test={len(world.test)} "
          f"kg={len(world.kg.triples)}")
    return 0


# ---------------------------------------------------------------------------
# Parser / dispatch
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="text2triple",
        description="Translate sentences into knowledge-graph triples.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-vocab", help="build word and KG symbol tables")
    p.add_argument("--corpus", required=True, help="dataset .jsonl or raw sentence file")
    p.add_argument("--kg", required=True, help="KG triples TSV")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--min-count", type=int, default=1, dest="min_count")
    p.set_defaults(handler=_cmd_build_vocab)

    p = sub.add_parser("kg-embed", help="train TransE embeddings on a KG")
    p.add_argument("--kg", required=True)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--margin", type=float, default=1.0)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=32, dest="batch_size")
    p.add_argument("--norm", choices=("L1", "L2"), default="L2")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=_cmd_kg_embed)

    p = sub.add_parser("ds-align", help="distant supervision alignment")
    p.add_argument("--kg", required=True)
    p.add_argument("--surface-forms", required=True, dest="surface_forms")
    p.add_argument("--sentences", required=True, help="one sentence per line")
    p.add_argument("--out", required=True, help="output dataset .jsonl")
    p.add_argument("--keep-ambiguous", action="store_true", dest="keep_ambiguous")
    p.add_argument("--ambiguity-report", default=None, dest="ambiguity_report")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(handler=_cmd_ds_align)

    p = sub.add_parser("train", help="train the translator")
    p.add_argument("--config", default=None, help="flat key=value config file")
    p.add_argument("--train", required=True)
    p.add_argument("--dev", default=None)
    p.add_argument("--word-vectors", default=None, dest="word_vectors")
    p.add_argument("--kg-embeddings", default=None, dest="kg_embeddings")
    p.add_argument("--flags", default=None, help="ablation flags, e.g. A,W,G or none")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--min-count", type=int, default=1, dest="min_count")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--log", default=None, help="training log path (default stdout)")
    p.set_defaults(handler=_cmd_train, batch_size=None, patience=None, lr=None)

    p = sub.add_parser("eval", help="score a checkpoint on a test set")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--kg", default=None, help="KG TSV for the error taxonomy")
    p.add_argument("--report", default=None, help="machine-readable report path")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser("translate", help="translate one sentence or run a REPL")
    p.add_argument("--checkpoint", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--text", default=None)
    group.add_argument("--interactive", action="store_true")
    p.set_defaults(handler=_cmd_translate)

    p = sub.add_parser("ablation", help="train/evaluate a flag grid")
    p.add_argument("--train", required=True)
    p.add_argument("--dev", default=None)
    p.add_argument("--test", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--grid", default="none;A;A,W;A,W,G",
                   help="semicolon-separated flag sets")
    p.add_argument("--seeds", default="0,1,2,3,4")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--word-vectors", default=None, dest="word_vectors")
    p.add_argument("--kg-embeddings", default=None, dest="kg_embeddings")
    p.add_argument("--min-count", type=int, default=1, dest="min_count")
    p.add_argument("--report", default=None)
    p.set_defaults(handler=_cmd_ablation)

    p = sub.add_parser("make-synthetic", help="emit a synthetic world's files")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hard", action="store_true")
    p.add_argument("--word-dim", type=int, default=16, dest="word_dim")
    p.set_defaults(handler=_cmd_make_synthetic)

    return parser


def cmd_dispatch(argv=None) -> int:
    """Parse argv and run the sub-command; exit code 0/1/2, never raises."""
    logging.basicConfig(
        level=logging.INFO, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse prints usage itself
        return int(exc.code or 0)
    settings = {k: v for k, v in vars(args).items() if k != "handler"}
    logger.info("run settings: %s", " ".join(f"{k}={v}" for k, v in sorted(settings.items())))
    try:
        return args.handler(args)
    except (OSError, ValueError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    return cmd_dispatch(argv)
