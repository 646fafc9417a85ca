"""Symbol tables, masks and serialization."""

import pytest

from text2triple.vocab import (
    BOS_ID,
    PAD_ID,
    RESERVED_TOKENS,
    UNK_ID,
    TripleVocab,
    build_kg_vocab,
    build_word_vocab,
    decode_triple,
    encode_sentence,
    load_triple_vocab,
    load_word_vocab,
    save_triple_vocab,
    save_word_vocab,
    tokenize,
)


class TestTokenize:
    def test_capital_sentence_has_seven_tokens(self):
        toks = tokenize("Berlin is the capital city of Germany.")
        assert toks == ["berlin", "is", "the", "capital", "city", "of", "germany"]

    def test_punctuation_split(self):
        assert tokenize("A,b;c!") == ["a", "b", "c"]

    def test_internal_apostrophe_kept(self):
        assert tokenize("don't stop") == ["don't", "stop"]


class TestWordVocab:
    def test_threshold_filter(self):
        v = build_word_vocab([["a", "b", "a"]], min_count=2)
        assert "a" in v and "b" not in v
        assert len(v) == 4

    def test_empty_corpus_reserved_only(self):
        v = build_word_vocab([], min_count=1)
        assert len(v) == 3
        assert v.tokens == RESERVED_TOKENS

    def test_capital_sentence_all_present(self):
        toks = tokenize("Berlin is the capital city of Germany.")
        v = build_word_vocab([toks], min_count=1)
        assert all(t in v for t in toks)
        assert len(v) == 3 + 7

    def test_id_order_frequency_then_lexicographic(self):
        v = build_word_vocab([["b", "b", "c", "a", "a"]], min_count=1)
        # a and b tie at 2, a wins lexicographically; c has 1
        assert v.tokens[3:] == ("a", "b", "c")

    def test_reserved_ids(self):
        v = build_word_vocab([["x"]])
        assert (v.id_of("<pad>"), v.id_of("<unk>"), v.id_of("<bos>")) == (
            PAD_ID, UNK_ID, BOS_ID,
        )

    def test_min_count_validation(self):
        with pytest.raises(ValueError):
            build_word_vocab([], min_count=0)


class TestEncodeSentence:
    def test_roundtrip_known(self):
        v = build_word_vocab([["alpha", "beta"]])
        ids = encode_sentence(["alpha", "beta"], v)
        assert [v.token_of(i) for i in ids] == ["alpha", "beta"]

    def test_unknown_maps_to_unk(self):
        v = build_word_vocab([["alpha"]])
        assert encode_sentence(["zxqv"], v) == [UNK_ID]

    def test_empty_is_empty(self):
        v = build_word_vocab([["alpha"]])
        assert encode_sentence([], v) == []

    def test_length_preserved_never_fails(self):
        v = build_word_vocab([["alpha"]])
        sent = ["alpha", "zz", "", "alpha"]  # even odd junk maps to UNK
        assert len(encode_sentence(sent, v)) == len(sent)


GERMANY = ("dbr:Germany", "dbo:capital", "dbr:Berlin")


class TestTripleVocab:
    def test_capital_kg(self):
        tv = build_kg_vocab([GERMANY])
        assert set(tv.entities) == {"dbr:Germany", "dbr:Berlin"}
        assert tv.predicates == ("dbo:capital",)

    def test_subject_object_share_entity_id(self):
        tv = build_kg_vocab([("a", "p", "b"), ("b", "p", "c")])
        assert set(tv.entities) == {"a", "b", "c"}
        assert tv.entity_id("b") == tv.entity_id("b")

    def test_shared_predicate_deduplicated(self):
        tv = build_kg_vocab([("a", "p", "b"), ("c", "p", "d")])
        assert len(tv.predicates) == 1

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            build_kg_vocab([])

    def test_masks_partition_target_space(self):
        tv = build_kg_vocab([("a", "p", "b"), ("c", "q", "a")])
        m1, m2, m3 = tv.step_mask(1), tv.step_mask(2), tv.step_mask(3)
        assert (m1 == m3).all()
        assert not (m1 & m2).any()
        union = m1 | m2
        assert not union[0]  # BOS is never an output
        assert union[1:].all()

    def test_deterministic_byte_identical_serialization(self, tmp_path):
        triples = [("b", "q", "a"), ("a", "p", "c")]
        for i in (1, 2):
            tv = build_kg_vocab(triples)
            save_triple_vocab(tv, tmp_path / f"e{i}", tmp_path / f"p{i}")
        assert (tmp_path / "e1").read_bytes() == (tmp_path / "e2").read_bytes()
        assert (tmp_path / "p1").read_bytes() == (tmp_path / "p2").read_bytes()


class TestDecodeTriple:
    def test_capital_roundtrip(self):
        tv = build_kg_vocab([GERMANY])
        ids = tv.encode_triple(*GERMANY)
        assert decode_triple(ids, tv) == GERMANY

    def test_predicate_id_in_entity_slot_rejected(self):
        tv = build_kg_vocab([GERMANY])
        pid = tv.predicate_id("dbo:capital")
        eid = tv.entity_id("dbr:Berlin")
        with pytest.raises(ValueError, match="slot 0"):
            decode_triple([pid, pid, eid], tv)

    def test_roundtrip_any_valid_triple(self):
        tv = build_kg_vocab([("a", "p", "b"), ("c", "q", "d")])
        for s in tv.entities:
            for p in tv.predicates:
                for o in tv.entities:
                    assert decode_triple(tv.encode_triple(s, p, o), tv) == (s, p, o)

    def test_wrong_arity(self):
        tv = build_kg_vocab([GERMANY])
        with pytest.raises(ValueError, match="exactly 3"):
            decode_triple([1, 2], tv)


class TestSerialization:
    def test_word_vocab_roundtrip(self, tmp_path):
        v = build_word_vocab([["berlin", "is", "berlin"]])
        save_word_vocab(v, tmp_path / "w.vocab")
        v2 = load_word_vocab(tmp_path / "w.vocab")
        assert v2.tokens == v.tokens

    def test_line_number_is_id(self, tmp_path):
        v = build_word_vocab([["zz", "aa"]])
        save_word_vocab(v, tmp_path / "w.vocab")
        lines = (tmp_path / "w.vocab").read_text().splitlines()
        for idx, line in enumerate(lines):
            assert v.id_of(line) == idx

    def test_triple_vocab_roundtrip(self, tmp_path):
        tv = build_kg_vocab([GERMANY, ("a", "p", "b")])
        save_triple_vocab(tv, tmp_path / "e", tmp_path / "p")
        tv2 = load_triple_vocab(tmp_path / "e", tmp_path / "p")
        assert tv2.entities == tv.entities
        assert tv2.predicates == tv.predicates

    def test_symbol_with_space_rejected(self, tmp_path):
        tv = TripleVocab(("bad entity",), ("p",))
        with pytest.raises(ValueError, match="serializable"):
            save_triple_vocab(tv, tmp_path / "e", tmp_path / "p")
