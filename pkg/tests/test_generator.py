import random

import pytest

from pobkit.generator import (
    BinSpec,
    GenerationError,
    GenerationReport,
    build_phrase,
    expand_tuples,
    generate_pob_lp,
    generate_pob_spark,
    make_pair,
    sample_uniform_first_diff,
)
from pobkit.phonemes import first_diff_index, phonemize


def test_binspec_parse_and_lookup():
    bins = BinSpec.parse("0-4,5-9,10-14")
    assert bins.labels() == ["[0,4]", "[5,9]", "[10,14]"]
    assert bins.index_of(0) == 0
    assert bins.index_of(4) == 0
    assert bins.index_of(5) == 1
    assert bins.index_of(14) == 2
    assert bins.index_of(15) is None


def test_binspec_default_covers_spec_ranges():
    assert BinSpec().edges == ((0, 4), (5, 9), (10, 14), (15, 19), (20, 24))


@pytest.mark.parametrize("text", ["4-0", "0-4,3-9", "0-4,,5-9", "abc"])
def test_binspec_rejects_malformed(text):
    with pytest.raises(ValueError):
        BinSpec.parse(text)


def test_build_phrase_respects_length_budget(toy_lexicon, toy_words):
    rng = random.Random(11)
    for _ in range(200):
        phrase = build_phrase(toy_lexicon, toy_words, 25, rng)
        total = len(phonemize(phrase, toy_lexicon))
        assert 0 < total < 25
        assert all(w in toy_lexicon for w in phrase)


def test_build_phrase_deterministic(toy_lexicon, toy_words):
    a = [build_phrase(toy_lexicon, toy_words, 25, random.Random(3)) for _ in range(5)]
    b = [build_phrase(toy_lexicon, toy_words, 25, random.Random(3)) for _ in range(5)]
    assert a == b


def test_build_phrase_no_fitting_word(toy_lexicon):
    with pytest.raises(GenerationError):
        build_phrase(toy_lexicon, ["television"], 3, random.Random(0))


def test_make_pair_changes_exactly_one_word(toy_lexicon, toy_words):
    rng = random.Random(5)
    for _ in range(100):
        phrase = build_phrase(toy_lexicon, toy_words, 25, rng)
        pair = make_pair(phrase, toy_lexicon, 2, rng)
        assert len(pair.a) == len(pair.b)
        diffs = [i for i, (x, y) in enumerate(zip(pair.a, pair.b)) if x != y]
        assert diffs == [pair.substituted_position]
        expect = first_diff_index(
            phonemize(pair.a, toy_lexicon), phonemize(pair.b, toy_lexicon)
        )
        assert pair.first_diff_index == expect


def test_make_pair_substitute_is_phonetically_close(toy_lexicon, toy_words):
    from pobkit.phonemes import levenshtein

    rng = random.Random(17)
    for _ in range(50):
        phrase = build_phrase(toy_lexicon, toy_words, 25, rng)
        pair = make_pair(phrase, toy_lexicon, 2, rng)
        old = pair.a[pair.substituted_position]
        new = pair.b[pair.substituted_position]
        assert old != new
        d = levenshtein(toy_lexicon.primary(old), toy_lexicon.primary(new))
        assert 1 <= d <= 2


def test_make_pair_without_neighbors_raises(toy_lexicon):
    # both words were chosen to sit alone in phoneme space at distance <= 2
    with pytest.raises(GenerationError):
        make_pair(("television", "computer"), toy_lexicon, 2, random.Random(0))


def test_sample_uniform_counts_and_report():
    bins = BinSpec.parse("0-4,5-9")

    class FakePair:
        def __init__(self, idx):
            self.first_diff_index = idx

    pairs = [FakePair(i % 5) for i in range(40)] + [FakePair(7) for _ in range(3)]
    report = GenerationReport()
    chosen = sample_uniform_first_diff(pairs, bins, 3, random.Random(0), report)
    assert report.per_bin_counts == {"[0,4]": 3, "[5,9]": 3}
    assert report.skipped_bins == []
    assert len(chosen) == 6
    assert len(set(map(id, chosen))) == 6


def test_sample_uniform_records_empty_bin():
    bins = BinSpec.parse("0-4,5-9")

    class FakePair:
        def __init__(self, idx):
            self.first_diff_index = idx

    report = GenerationReport()
    chosen = sample_uniform_first_diff(
        [FakePair(1), FakePair(2)], bins, 2, random.Random(0), report
    )
    assert report.skipped_bins == ["[5,9]"]
    assert report.per_bin_counts == {"[0,4]": 2, "[5,9]": 0}
    assert len(chosen) == 2


def test_expand_tuples_roles_and_labels(toy_lexicon, toy_words):
    rng = random.Random(2)
    phrase = build_phrase(toy_lexicon, toy_words, 25, rng)
    pair = make_pair(phrase, toy_lexicon, 2, rng)
    records = expand_tuples(pair, toy_lexicon)
    assert [r.label for r in records] == [False, False, True]
    ab, ba, aa = records
    assert ab.anchor_text == ba.query_text == aa.anchor_text
    assert ab.query_text == ba.anchor_text
    assert aa.anchor_text == aa.query_text
    assert aa.first_diff_index == len(aa.anchor_phonemes)
    assert ab.first_diff_index == ba.first_diff_index == pair.first_diff_index
    assert len({r.id for r in records}) == 3
    assert all(r.source == "pob-spark" for r in records)


def test_generate_pob_spark_small_run(toy_lexicon, toy_words):
    records, report = generate_pob_spark(
        toy_lexicon, toy_words, per_bin=4, seed=123
    )
    assert len(records) == 3 * 4 * 5
    assert report.skipped_bins == []
    assert all(v == 4 for v in report.per_bin_counts.values())
    negatives = [r for r in records if not r.label]
    positives = [r for r in records if r.label]
    assert len(negatives) == 2 * len(positives)
    bins = BinSpec()
    for r in negatives:
        assert bins.index_of(r.first_diff_index) is not None


def test_generate_pob_spark_deterministic(toy_lexicon, toy_words):
    a, ra = generate_pob_spark(toy_lexicon, toy_words, per_bin=3, seed=9)
    b, rb = generate_pob_spark(toy_lexicon, toy_words, per_bin=3, seed=9)
    assert a == b
    assert ra.as_dict() == rb.as_dict()
    c, _ = generate_pob_spark(toy_lexicon, toy_words, per_bin=3, seed=10)
    assert a != c


def test_generate_pob_lp_doubles_positives(toy_lexicon):
    rows = [
        (("turn", "the", "light", "on"), ("turn", "the", "light", "on"), True),
        (("blue", "hat"), ("blue", "hat"), True),
        (("blue", "hat"), ("blue", "cat"), False),
    ]
    records = generate_pob_lp(rows, ["the", "a", "on"], toy_lexicon, random.Random(4))
    assert len(records) == 4
    pos = [r for r in records if r.label]
    ovl = [r for r in records if not r.label]
    assert len(pos) == len(ovl) == 2
    for p, o in zip(pos, ovl):
        assert o.source == "pob-lp"
        a_words = o.anchor_text.split()
        q_words = o.query_text.split()
        assert a_words[: len(q_words)] == q_words
        assert len(a_words) == len(q_words) + 1
        # query phonemes are a strict prefix, so the first difference
        # falls exactly at the end of the query
        assert o.first_diff_index == len(o.query_phonemes)
        assert p.anchor_text == o.query_text


def test_generate_pob_lp_rejects_mismatched_positive(toy_lexicon):
    rows = [(("blue", "hat"), ("blue", "cat"), True)]
    with pytest.raises(GenerationError, match="mismatched"):
        generate_pob_lp(rows, ["the"], toy_lexicon, random.Random(0))


def test_generate_pob_lp_needs_common_words(toy_lexicon):
    with pytest.raises(GenerationError):
        generate_pob_lp([], [], toy_lexicon, random.Random(0))
