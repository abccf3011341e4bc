"""Desk-scale prefix-bias experiment.

Builds a three-way data split from a lexicon and word pool, then trains
the matcher with both scoring heads over several seeds:

* train: positives (a, a) plus disjoint negatives (a, d) where d shares
  at most a few leading phonemes with a,
* val: the same mixture, held out, for plain accuracy,
* overlap: positives plus partial-overlap negatives built by the
  word-appending recipe, withheld from training entirely.

The overlap anchors run past the training length range, so a scoring
head that leans on early positions keeps accepting them while the
shared-weight head sees the mismatching tail.  run_experiment returns
per-seed validation accuracy, overlap EER and excess concentration area
for both heads.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from pobkit.generator import (
    GenerationError,
    _record,
    build_phrase,
    generate_pob_lp,
)
from pobkit.diagnostics import concentration_curve
from pobkit.manifest import PairRecord
from pobkit.matcher import (
    MatcherConfig,
    PhonemeVocab,
    TrainSettings,
    export_scoring_weights,
    score_records,
    train,
)
from pobkit.metrics import ScoreSet, accuracy, eer
from pobkit.phonemes import Lexicon, TokenSeq, first_diff_index, phonemize

SOURCE = "desk-experiment"


@dataclass(frozen=True)
class ExperimentData:
    train: tuple[PairRecord, ...]
    val: tuple[PairRecord, ...]
    overlap: tuple[PairRecord, ...]

    @property
    def total(self) -> int:
        return len(self.train) + len(self.val) + len(self.overlap)


def _sample_phrases(
    lexicon: Lexicon,
    pool: list[str],
    count: int,
    rng: random.Random,
    min_phonemes: int,
    max_phonemes: int,
) -> list[TokenSeq]:
    """Unique phrases whose phoneme totals land in [min_phonemes, max_phonemes]."""
    seen: set[TokenSeq] = set()
    phrases: list[TokenSeq] = []
    attempts = 0
    limit = 200 * count
    while len(phrases) < count:
        attempts += 1
        if attempts > limit:
            raise GenerationError(
                f"could not sample {count} phrases in [{min_phonemes}, "
                f"{max_phonemes}] phonemes after {limit} attempts"
            )
        phrase = build_phrase(lexicon, pool, max_phonemes + 1, rng)
        if phrase in seen:
            continue
        if len(phonemize(phrase, lexicon)) < min_phonemes:
            continue
        seen.add(phrase)
        phrases.append(phrase)
    return phrases


def _paired_split(
    phrases: list[TokenSeq],
    lexicon: Lexicon,
    rng: random.Random,
    max_shared: int = 3,
    tries: int = 200,
) -> list[PairRecord]:
    """Each phrase yields (a, a, True) and a disjoint (a, d, False)."""
    phoneme_seqs = [phonemize(p, lexicon) for p in phrases]
    records = []
    for i, a in enumerate(phrases):
        records.append(_record(a, a, True, SOURCE, "pos", lexicon))
        for _ in range(tries):
            j = rng.randrange(len(phrases))
            if j == i:
                continue
            if first_diff_index(phoneme_seqs[i], phoneme_seqs[j]) <= max_shared:
                records.append(_record(a, phrases[j], False, SOURCE, "neg", lexicon))
                break
        else:
            raise GenerationError(
                f"no disjoint partner for {' '.join(a)!r} in {tries} draws"
            )
    return records


def build_experiment_data(
    lexicon: Lexicon,
    word_pool: list[str],
    seed: int = 0,
    *,
    train_pairs: int = 6000,
    val_pairs: int = 1500,
    overlap_pairs: int = 2500,
    min_phonemes: int = 10,
    max_phonemes: int = 18,
    window: int = 25,
) -> ExperimentData:
    """Deterministic three-way split; every anchor fits the scoring window.

    Appended words are capped at window - max_phonemes phonemes so the
    overlap anchors stay encodable, while still running past the length
    range seen in training.
    """
    rng = random.Random(seed)
    pool = [w.lower() for w in word_pool if w.lower() in lexicon]
    if not pool:
        raise GenerationError("word pool is empty after lexicon filtering")
    total = train_pairs + val_pairs + overlap_pairs
    phrases = _sample_phrases(lexicon, pool, total, rng, min_phonemes, max_phonemes)
    train_phrases = phrases[:train_pairs]
    val_phrases = phrases[train_pairs : train_pairs + val_pairs]
    overlap_phrases = phrases[train_pairs + val_pairs :]

    train_records = _paired_split(train_phrases, lexicon, rng)
    val_records = _paired_split(val_phrases, lexicon, rng)

    tail_budget = window - max_phonemes
    short_words = [w for w in pool if len(lexicon.primary(w)) <= tail_budget]
    if not short_words:
        raise GenerationError(f"no pool word fits in {tail_budget} phonemes")
    rows = [(p, p, True) for p in overlap_phrases]
    overlap_records = generate_pob_lp(rows, short_words, lexicon, rng)

    return ExperimentData(
        train=tuple(train_records),
        val=tuple(val_records),
        overlap=tuple(overlap_records),
    )


@dataclass(frozen=True)
class SeedOutcome:
    kind: str
    seed: int
    val_acc: float
    overlap_eer: float
    excess_area: float


@dataclass(frozen=True)
class ExperimentResult:
    outcomes: tuple[SeedOutcome, ...]

    def by_kind(self, kind: str) -> list[SeedOutcome]:
        return [o for o in self.outcomes if o.kind == kind]

    def eps_wins(self) -> int:
        """Seeds where the shared-weight head has strictly lower overlap EER."""
        base = {o.seed: o.overlap_eer for o in self.by_kind("baseline")}
        wins = 0
        for o in self.by_kind("eps"):
            if o.overlap_eer < base[o.seed]:
                wins += 1
        return wins


def run_experiment(
    data: ExperimentData,
    lexicon: Lexicon,
    *,
    seeds: tuple[int, ...] = (0, 1, 2),
    kinds: tuple[str, ...] = ("baseline", "eps"),
    embed_dim: int = 16,
    window: int = 25,
    frame_dup: int = 2,
    noise_sigma: float = 0.1,
    settings: TrainSettings | None = None,
    progress=None,
) -> ExperimentResult:
    """Train every (kind, seed) pair under one budget and evaluate.

    Validation accuracy uses the noise-free forward pass at logit
    threshold 0; overlap EER is threshold-free.  progress, if given, is
    called with a one-line status string after each run.
    """
    if settings is None:
        settings = TrainSettings(steps=2500, val_fraction=0.0)
    vocab = PhonemeVocab(lexicon.inventory)
    outcomes = []
    for kind in kinds:
        config = MatcherConfig(
            vocab_size=vocab.size,
            embed_dim=embed_dim,
            max_positions=window,
            noise_sigma=noise_sigma,
            frame_dup=frame_dup,
            scorer_kind=kind,
        )
        for seed in seeds:
            params, _ = train(list(data.train), config, settings, seed, vocab=vocab)
            val_rows = score_records(params, data.val)
            val_acc = accuracy(ScoreSet.from_rows(val_rows), 0.0)
            ovl_rows = score_records(params, data.overlap)
            ovl_eer = eer(ScoreSet.from_rows(ovl_rows))
            excess = concentration_curve(export_scoring_weights(params)).excess_area
            outcome = SeedOutcome(kind, seed, val_acc, ovl_eer, excess)
            outcomes.append(outcome)
            if progress is not None:
                progress(
                    f"{kind} seed {seed}: val_acc={val_acc:.4f} "
                    f"overlap_eer={ovl_eer:.4f} excess={excess:+.4f}"
                )
    return ExperimentResult(tuple(outcomes))
