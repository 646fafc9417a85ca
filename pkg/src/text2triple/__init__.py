"""text2triple: translate a sentence into one knowledge-graph triple.

A from-scratch attention LSTM encoder-decoder whose three decoding steps are
masked to entity/predicate/entity sub-vocabularies, initialized from
pre-trained word vectors and TransE knowledge-graph embeddings, with the
full distant-supervision data pipeline and strict exact-match F1 scoring.
"""

from .corpus import (
    AnnotatedExample,
    Dataset,
    KnowledgeGraph,
    Triple,
    distant_supervise,
    kfold,
    load_dataset,
    split_dataset,
)
from .embeddings import (
    KgEmbeddings,
    TransEConfig,
    link_prediction_eval,
    load_word_vectors,
    negative_sample,
    transe_score,
    transe_train,
)
from .scoring import ErrorCategory, EvalReport, error_taxonomy, evaluate, exact_match
from .model import (
    DecodeResult,
    ModelConfig,
    ModelParams,
    forward_loss,
    load_checkpoint,
    save_checkpoint,
    train,
    translate_beam,
    translate_greedy,
)
from .numerics import grad_check_fd, make_rng
from .vocab import (
    TripleVocab,
    WordVocab,
    build_kg_vocab,
    build_word_vocab,
    decode_triple,
    encode_sentence,
    tokenize,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotatedExample",
    "Dataset",
    "DecodeResult",
    "ErrorCategory",
    "EvalReport",
    "KgEmbeddings",
    "KnowledgeGraph",
    "ModelConfig",
    "ModelParams",
    "TransEConfig",
    "Triple",
    "TripleVocab",
    "WordVocab",
    "build_kg_vocab",
    "build_word_vocab",
    "decode_triple",
    "distant_supervise",
    "encode_sentence",
    "error_taxonomy",
    "evaluate",
    "exact_match",
    "forward_loss",
    "grad_check_fd",
    "kfold",
    "link_prediction_eval",
    "load_checkpoint",
    "load_dataset",
    "load_word_vectors",
    "make_rng",
    "negative_sample",
    "save_checkpoint",
    "split_dataset",
    "tokenize",
    "train",
    "transe_score",
    "transe_train",
    "translate_beam",
    "translate_greedy",
]
