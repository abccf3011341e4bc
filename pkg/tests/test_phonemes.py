import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pobkit.phonemes import (
    LexiconParseError,
    OOVError,
    fallback_phonemes,
    first_diff_index,
    is_partial_overlap,
    levenshtein,
    load_lexicon,
    phonemize,
    phonetic_neighbors,
    tokens,
)

from .oracles import levenshtein_recursive

SYMBOLS3 = ("B", "L", "UW")


def seqs(symbols=SYMBOLS3, max_len=8):
    return st.lists(st.sampled_from(symbols), max_size=max_len).map(tuple)


# ---------------------------------------------------------------- lexicon


def test_load_basic_entry_strips_stress():
    lex = load_lexicon(";;; comment\nBLUE  B L UW1\n")
    assert lex.primary("blue") == ("B", "L", "UW")
    assert lex.inventory == {"B", "L", "UW"}


def test_load_keeps_stress_when_disabled():
    lex = load_lexicon("BLUE  B L UW1\n", strip_stress=False)
    assert lex.primary("blue") == ("B", "L", "UW1")


def test_load_variants_folded_under_base():
    lex = load_lexicon("ON  AA1 N\nON(2)  AO1 N\n")
    assert lex.pronunciations("on") == (("AA", "N"), ("AO", "N"))
    assert lex.primary("on") == ("AA", "N")


def test_load_variants_dropped_when_disabled():
    lex = load_lexicon("ON  AA1 N\nON(2)  AO1 N\n", include_variants=False)
    assert lex.pronunciations("on") == (("AA", "N"),)


def test_load_empty_input():
    lex = load_lexicon("")
    assert len(lex) == 0
    assert lex.inventory == frozenset()


def test_load_error_on_missing_phonemes():
    with pytest.raises(LexiconParseError) as err:
        load_lexicon("GOOD  G UH1 D\nBAD\n")
    assert err.value.line_number == 2


def test_load_error_on_bad_symbol():
    with pytest.raises(LexiconParseError) as err:
        load_lexicon("WEIRD  W IH1 R-D\n")
    assert err.value.line_number == 1


def test_load_error_on_orphan_variant():
    with pytest.raises(LexiconParseError):
        load_lexicon("ON(2)  AO1 N\n")


def test_toy_dictionary_loads(toy_lexicon):
    assert "turn" in toy_lexicon
    assert toy_lexicon.primary("light") == ("L", "AY", "T")
    # core unstressed ARPABET inventory only
    assert all(sym.isalpha() for sym in toy_lexicon.inventory)


# -------------------------------------------------------------- phonemize


def test_phonemize_single_word(toy_lexicon):
    assert phonemize(("blue",), toy_lexicon) == ("B", "L", "UW")


def test_phonemize_concatenates_primaries(toy_lexicon):
    # frozen from primary-pronunciation lookup of each word, in order
    expected = ("T", "ER", "N", "DH", "AH", "L", "AY", "T", "AA", "N")
    assert phonemize(tokens("turn the light on"), toy_lexicon) == expected


def test_phonemize_oov_raises_with_word(toy_lexicon):
    with pytest.raises(OOVError, match="zzxq"):
        phonemize(("zzxq",), toy_lexicon)


def test_phonemize_fallback_handles_oov(toy_lexicon):
    out = phonemize(("zzxq",), toy_lexicon, fallback=True)
    assert out == ("Z", "Z", "K", "K")


def test_fallback_digraphs_are_greedy():
    assert fallback_phonemes("thing") == ("TH", "IH", "NG")
    assert fallback_phonemes("check") == ("CH", "EH", "K")


def test_phonemize_round_trips_dictionary_words(toy_lexicon):
    for word in toy_lexicon.words():
        assert phonemize((word,), toy_lexicon) == toy_lexicon.primary(word)


def test_phonemize_empty_phrase_rejected(toy_lexicon):
    with pytest.raises(ValueError):
        phonemize((), toy_lexicon)


# ------------------------------------------------------------ levenshtein


def test_levenshtein_identity():
    assert levenshtein(("B", "L", "UW"), ("B", "L", "UW")) == 0


def test_levenshtein_single_substitution():
    assert levenshtein(("B", "L", "UW"), ("G", "L", "UW")) == 1


def test_levenshtein_pure_deletions():
    assert levenshtein(("T", "ER", "N"), ()) == 3


def test_levenshtein_matches_recursive_oracle_on_random_pairs():
    rng = random.Random(20240817)
    for _ in range(300):
        a = tuple(rng.choice(SYMBOLS3) for _ in range(rng.randrange(7)))
        b = tuple(rng.choice(SYMBOLS3) for _ in range(rng.randrange(7)))
        assert levenshtein(a, b) == levenshtein_recursive(a, b)


@given(seqs(), seqs(), seqs())
def test_levenshtein_metric_axioms(a, b, c):
    assert levenshtein(a, b) == levenshtein(b, a)
    assert (levenshtein(a, b) == 0) == (a == b)
    assert levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c)


@given(seqs(), seqs())
def test_levenshtein_length_bounds(a, b):
    d = levenshtein(a, b)
    assert abs(len(a) - len(b)) <= d <= max(len(a), len(b))


# -------------------------------------------------------------- neighbors


def test_neighbors_empty_when_nothing_in_range():
    lex = load_lexicon("MUSIC  M Y UW1 Z IH0 K\nCAT  K AE1 T\n")
    assert phonetic_neighbors("music", lex, max_distance=0) == []


def test_neighbors_homophones_rank_first(toy_lexicon):
    hits = phonetic_neighbors("blue", toy_lexicon, max_distance=1)
    assert hits[0] == ("blew", 0)
    hits_rev = phonetic_neighbors("blew", toy_lexicon, max_distance=1)
    assert hits_rev[0] == ("blue", 0)


def test_neighbors_match_exhaustive_sort_oracle():
    text = "BAT  B AE1 T\nCAT  K AE1 T\nHAT  HH AE1 T\nCAB  K AE1 B\nGO  G OW1\n"
    lex = load_lexicon(text)
    # brute force: all pairwise distances against "cat", sorted by hand
    expected = [("bat", 1), ("cab", 1), ("hat", 1), ("go", 3)]
    assert phonetic_neighbors("cat", lex, max_distance=3) == expected
    assert phonetic_neighbors("cat", lex, max_distance=3, limit=2) == expected[:2]


def test_neighbors_exclude_query_word(toy_lexicon):
    hits = phonetic_neighbors("light", toy_lexicon, max_distance=2)
    assert "light" not in [w for w, _ in hits]
    assert ("night", 1) in hits


def test_neighbors_oov_query(toy_lexicon):
    with pytest.raises(OOVError):
        phonetic_neighbors("zzxq", toy_lexicon, max_distance=1)


# --------------------------------------------------------- first_diff_index


def test_first_diff_identical_sequences():
    s = ("AA", "N", "AA", "N")
    assert first_diff_index(s, s) == 4


def test_first_diff_at_position_zero():
    assert first_diff_index(("AA", "N"), ("AO", "F")) == 0


def test_first_diff_on_light_phrases(toy_lexicon):
    a = phonemize(tokens("turn the light on"), toy_lexicon)
    b = phonemize(tokens("turn the light off"), toy_lexicon)
    assert first_diff_index(a, b) == 8


@given(seqs(), seqs())
def test_first_diff_properties(a, b):
    i = first_diff_index(a, b)
    assert i == first_diff_index(b, a)
    assert i <= min(len(a), len(b))
    assert a[:i] == b[:i]
    if i < min(len(a), len(b)):
        assert a[i] != b[i]


# --------------------------------------------------------- partial overlap


def test_partial_overlap_strict_prefix():
    x = tokens("turn the light on")
    assert is_partial_overlap(x, tokens("turn the light"))


def test_partial_overlap_rejects_equal_sequences():
    x = tokens("turn the light on")
    assert not is_partial_overlap(x, x)


def test_partial_overlap_rejects_mismatched_prefix():
    x = tokens("turn the light on")
    assert not is_partial_overlap(x, tokens("turn the lamp"))


def test_partial_overlap_case_folds():
    assert is_partial_overlap(("Turn", "The", "Light", "on"), tokens("turn the light"))


@settings(max_examples=200)
@given(st.lists(st.sampled_from(["on", "off", "the"]), min_size=1, max_size=5),
       st.lists(st.sampled_from(["on", "off", "the"]), min_size=1, max_size=5))
def test_partial_overlap_implies_word_first_diff_at_query_length(x, y):
    if is_partial_overlap(x, y):
        assert first_diff_index(x, y) == len(y)
