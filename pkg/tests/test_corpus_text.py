import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from navspeaker.corpus import (
    EOS_ID, PAD_ID, UNK_ID, PosLexicon, Vocabulary, check_verb,
    corpus_stats, default_lexicon, extract_action_phrases,
    filter_micro_instruction, record_from_silver, split_vocab_overlap, tokenize,
)
from navspeaker.corpus.text import L_POS, L_TYP
from navspeaker.envsim import MOVE_TEMPLATES, STOP_TEMPLATES
from navspeaker.errors import EmptyCorpus, VocabError


# -- tokenize ------------------------------------------------------------


def test_tokenize_detaches_trailing_punctuation():
    assert tokenize("Walk past the desk, Turn right") == \
        ["walk", "past", "the", "desk", ",", "turn", "right"]


def test_tokenize_empty():
    assert tokenize("") == []


def test_tokenize_stop_period():
    assert tokenize("stop.") == ["stop", "."]


word = st.text(alphabet="abcdefg.", min_size=1, max_size=6)


@settings(max_examples=100, deadline=None)
@given(st.lists(word, min_size=0, max_size=8))
def test_tokenize_join_fixpoint(words):
    toks = tokenize(" ".join(words))
    assert tokenize(" ".join(toks)) == toks


# -- vocabulary ----------------------------------------------------------


def test_vocab_reserved_ids():
    v = Vocabulary(["b", "a"])
    assert v.id_of("a") == 4 and v.id_of("b") == 5  # sorted insertion
    assert v.id_of("missing") == UNK_ID
    assert len(v) == 6


def test_vocab_roundtrip_and_file_format(tmp_path):
    v = Vocabulary(["walk", "past", "desk"])
    ids = v.encode(["walk", "past", "desk"])
    assert v.decode(ids) == ["walk", "past", "desk"]
    path = tmp_path / "vocab.txt"
    v.save(path)
    lines = path.read_text().splitlines()
    for lineno, token in enumerate(lines, start=1):
        assert v.id_of(token) == lineno - 1 + 4
    v2 = Vocabulary.load(path)
    assert v2.encode(["walk"]) == v.encode(["walk"])


def test_vocab_bad_id():
    v = Vocabulary(["a"])
    with pytest.raises(VocabError):
        v.token_of(99)


def test_vocab_decode_skips_control_ids():
    v = Vocabulary(["a"])
    assert v.decode([1, 4, 2, 0]) == ["a"]


# -- lexicon and tagging ---------------------------------------------------


def test_check_verb_fixtures(lexicon):
    assert check_verb("walk", lexicon) == "TRANVERB"
    assert check_verb("left", lexicon) == "ADV"
    assert check_verb("zzz", lexicon) == "OTHER"
    assert check_verb("turn", lexicon) == "INTRANVERB"
    assert check_verb("kitchen", lexicon) == "NOUN"


def test_lexicon_covers_template_bank(lexicon):
    bank_words = set()
    for t in MOVE_TEMPLATES + STOP_TEMPLATES:
        stripped = (t.replace("{obj}", "desk").replace("{sroom}", "kitchen")
                     .replace("{troom}", "kitchen").replace("{dirp}", "turn left"))
        bank_words.update(tokenize(stripped))
    table = lexicon.words()
    missing = [w for w in bank_words if w not in table]
    assert not missing, f"template words without explicit tags: {missing}"


def test_lexicon_tag_classes_are_closed(lexicon):
    for w, t in lexicon.words().items():
        assert t in {"TRANVERB", "DITRANVERB", "INTRANVERB", "NOUN", "ADV",
                     "ADP", "INTJ", "DET", "OTHER"}


def test_lexicon_rejects_bad_tag():
    with pytest.raises(ValueError):
        PosLexicon({"walk": "VERB"})


def test_lexicon_file_roundtrip(tmp_path, lexicon):
    path = tmp_path / "lex.tsv"
    lexicon.save(path)
    for line in path.read_text().splitlines():
        w, t = line.split("\t")
        assert lexicon.tag(w) == t
    again = PosLexicon.load(path)
    assert again.words() == lexicon.words()


# -- action phrases --------------------------------------------------------


def test_phrase_turn_left(lexicon):
    phrases, mask = extract_action_phrases(["turn", "left"], lexicon)
    assert phrases == [["turn", "left"]]
    assert mask == [True, True]


def test_noun_alone_never_emits(lexicon):
    phrases, mask = extract_action_phrases(["the", "desk"], lexicon)
    assert phrases == [] and mask == [False, False]


def test_walk_past_trace(lexicon):
    phrases, mask = extract_action_phrases(["walk", "past", "the", "desk"], lexicon)
    assert phrases == [["walk", "past"]]
    assert mask == [True, True, False, False]


def test_noun_heads_bigram_top_of(lexicon):
    phrases, _ = extract_action_phrases(tokenize("top of the stairs"), lexicon)
    assert ["top", "of"] in phrases


def test_lone_verb_emits_unigram(lexicon):
    phrases, mask = extract_action_phrases(["walk", "slowly"], lexicon)
    assert phrases == [["walk"]]  # "slowly" untagged -> OTHER
    assert mask == [True, False]


def test_phrases_never_overlap_and_mask_matches(lexicon, silver_corpus):
    records, _ = silver_corpus
    for r in records:
        tokens = tokenize(r.instruction)
        phrases, mask = extract_action_phrases(tokens, lexicon)
        assert sum(mask) == sum(len(p) for p in phrases)
        # phrases are contiguous token spans
        pos = 0
        for p in phrases:
            joined = " ".join(tokens)
            assert " ".join(p) in joined


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from(["walk", "turn", "left", "the", "desk", "past",
                                 "stop", "wait", "there", "kitchen", "."]),
                min_size=0, max_size=10))
def test_phrase_mask_cardinality_property(tokens):
    lexicon = default_lexicon()
    phrases, mask = extract_action_phrases(tokens, lexicon)
    assert sum(mask) == sum(len(p) for p in phrases)
    for p in phrases:
        assert 1 <= len(p) <= 2
        tag = check_verb(p[0], lexicon)
        assert tag in L_TYP
        if len(p) == 2:
            assert check_verb(p[1], lexicon) in L_POS
        else:
            assert tag != "NOUN"


# -- micro-instruction filter ----------------------------------------------


def test_filter_rejects_wait_there(lexicon):
    assert filter_micro_instruction("wait there", lexicon) is False


def test_filter_rejects_empty(lexicon):
    assert filter_micro_instruction("", lexicon) is False


def test_filter_accepts_enter_the_kitchen(lexicon):
    assert filter_micro_instruction("enter the kitchen", lexicon) is True


def test_filter_rejects_noun_only(lexicon):
    assert filter_micro_instruction("the kitchen", lexicon) is False


# -- stats and overlap -------------------------------------------------------


def test_stats_single_record(house, lexicon):
    from navspeaker.corpus.records import CorpusRecord
    rec = CorpusRecord("r", house.house_id, ["a", "b", "c"], [0, 0, 0], [0, 0, 0],
                       " ".join(["w"] * 20), [], [], "silver", 10.0)
    st_ = corpus_stats([rec])
    assert (st_.pair_count, st_.mean_views, st_.mean_path_len_m, st_.mean_words) == (1, 3.0, 10.0, 20.0)


def test_stats_two_records_hand_arithmetic(house):
    from navspeaker.corpus.records import CorpusRecord
    r1 = CorpusRecord("a", "h", ["x", "y"], [0, 0], [0, 0], "a b c d e", [], [], "silver", 4.0)
    r2 = CorpusRecord("b", "h", ["x", "y", "z", "w"], [0] * 4, [0] * 4,
                      " ".join(["t"] * 15), [], [], "silver", 8.0)
    st_ = corpus_stats([r1, r2])
    assert (st_.pair_count, st_.mean_views, st_.mean_path_len_m, st_.mean_words) == (2, 3.0, 6.0, 10.0)


def test_stats_empty_corpus():
    with pytest.raises(EmptyCorpus):
        corpus_stats([])


def test_overlap_fixture():
    out = split_vocab_overlap(["a", "b", "c"], ["b", "c", "d"])
    assert out == {"common": 2, "only_a": 1, "only_b": 1, "ratio_a": 0.5, "ratio_b": 0.5}


def test_overlap_identical_sets():
    out = split_vocab_overlap(["a", "b"], ["b", "a", "a"])
    assert out["ratio_a"] == 0.0 and out["ratio_b"] == 0.0


def test_overlap_disjoint_sets_null_ratio():
    out = split_vocab_overlap(["a"], ["b"])
    assert out["common"] == 0 and out["ratio_a"] is None and out["ratio_b"] is None


@settings(max_examples=50, deadline=None)
@given(st.lists(word, max_size=12), st.lists(word, max_size=12))
def test_overlap_set_identities(a, b):
    out = split_vocab_overlap(a, b)
    assert out["common"] + out["only_a"] == len(set(a))
    assert out["common"] + out["only_b"] == len(set(b))
