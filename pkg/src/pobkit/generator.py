"""Partial-overlap benchmark construction.

pob-spark pairs come from random phrases whose words are swapped for
phonetic neighbors; the first-different phoneme index of each pair is
binned and sampled toward a uniform distribution.  pob-lp records come
from existing positive phrase rows by appending a common word to the
anchor, turning the query into a strict prefix.  The names match the
source field each record carries.

Everything is a pure function of (inputs, seed): two runs with the same
arguments produce identical output, so manifests are reproducible
byte for byte.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field

from pobkit.manifest import PairRecord
from pobkit.phonemes import (
    Lexicon,
    OOVError,
    TokenSeq,
    first_diff_index,
    is_partial_overlap,
    phonemize,
    phonetic_neighbors,
)

DEFAULT_BIN_EDGES = ((0, 4), (5, 9), (10, 14), (15, 19), (20, 24))
DEFAULT_L_MAX = 25
DEFAULT_MAX_DISTANCE = 2


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class BinSpec:
    """Disjoint, sorted, inclusive integer ranges over first_diff_index."""

    edges: tuple[tuple[int, int], ...] = DEFAULT_BIN_EDGES

    def __post_init__(self):
        if not self.edges:
            raise ValueError("at least one bin required")
        for lo, hi in self.edges:
            if lo > hi:
                raise ValueError(f"bin [{lo},{hi}] is empty")
        for (_, hi), (lo, _) in zip(self.edges, self.edges[1:]):
            if lo <= hi:
                raise ValueError("bins must be sorted and disjoint")

    def __len__(self) -> int:
        return len(self.edges)

    def index_of(self, value: int) -> int | None:
        for idx, (lo, hi) in enumerate(self.edges):
            if lo <= value <= hi:
                return idx
        return None

    def labels(self) -> list[str]:
        return [f"[{lo},{hi}]" for lo, hi in self.edges]

    @classmethod
    def parse(cls, text: str) -> "BinSpec":
        """Parse e.g. "0-4,5-9,10-14" into a BinSpec."""
        edges = []
        for part in text.split(","):
            lo, sep, hi = part.strip().partition("-")
            if not sep:
                raise ValueError(f"bad bin {part!r}, expected LO-HI")
            edges.append((int(lo), int(hi)))
        return cls(tuple(edges))


@dataclass(frozen=True)
class PhrasePair:
    """Two phrases of equal word count differing in exactly one word."""

    a: TokenSeq
    b: TokenSeq
    substituted_position: int
    first_diff_index: int


@dataclass
class GenerationReport:
    per_bin_counts: dict[str, int] = field(default_factory=dict)
    skipped_bins: list[str] = field(default_factory=list)
    retries: int = 0

    def as_dict(self) -> dict:
        return {
            "per_bin_counts": dict(self.per_bin_counts),
            "skipped_bins": list(self.skipped_bins),
            "retries": self.retries,
        }


def build_phrase(
    lexicon: Lexicon,
    word_pool: list[str],
    l_max: int,
    rng: random.Random,
) -> TokenSeq:
    """Sample words uniformly while the running phoneme total stays < l_max.

    The first drawn word is redrawn until one fits; afterwards the first
    unfitting draw ends the phrase.  Raises GenerationError when no pool
    word fits at all.
    """
    if not word_pool:
        raise GenerationError("word pool is empty")
    lengths = {w: len(lexicon.primary(w)) for w in word_pool}
    if min(lengths.values()) >= l_max:
        raise GenerationError(f"no word in pool fits under l_max={l_max}")
    phrase: list[str] = []
    total = 0
    while True:
        word = word_pool[rng.randrange(len(word_pool))]
        if total + lengths[word] < l_max:
            phrase.append(word)
            total += lengths[word]
        elif phrase:
            return tuple(phrase)
        # an unfitting first draw is discarded and redrawn


def make_pair(
    phrase: TokenSeq,
    lexicon: Lexicon,
    max_distance: int,
    rng: random.Random,
    neighbor_cache: dict[str, list[tuple[str, int]]] | None = None,
    l_max: int | None = None,
) -> PhrasePair:
    """Swap one word for a uniformly chosen phonetic neighbor.

    Positions are tried in a random order; a position whose word has no
    neighbor within max_distance falls through to the next.  When l_max
    is given, neighbors that would push the swapped phrase to l_max or
    more phonemes are inadmissible, so both phrases of a pair fit the
    same scoring window.  Raises GenerationError when no position works.
    """
    positions = list(range(len(phrase)))
    rng.shuffle(positions)
    for pos in positions:
        word = phrase[pos]
        if neighbor_cache is not None and word in neighbor_cache:
            neighbors = neighbor_cache[word]
        else:
            neighbors = phonetic_neighbors(word, lexicon, max_distance)
            if neighbor_cache is not None:
                neighbor_cache[word] = neighbors
        if l_max is not None:
            budget = l_max - sum(
                len(lexicon.primary(w)) for i, w in enumerate(phrase) if i != pos
            )
            neighbors = [
                nb for nb in neighbors if len(lexicon.primary(nb[0])) < budget
            ]
        if not neighbors:
            continue
        substitute = neighbors[rng.randrange(len(neighbors))][0]
        b = phrase[:pos] + (substitute,) + phrase[pos + 1 :]
        idx = first_diff_index(phonemize(phrase, lexicon), phonemize(b, lexicon))
        return PhrasePair(a=phrase, b=b, substituted_position=pos, first_diff_index=idx)
    raise GenerationError(f"no word of {' '.join(phrase)!r} has phonetic neighbors")


def sample_uniform_first_diff(
    pairs: list[PhrasePair],
    bins: BinSpec,
    per_bin: int,
    rng: random.Random,
    report: GenerationReport | None = None,
) -> list[PhrasePair]:
    """Draw min(per_bin, available) pairs per bin, without replacement.

    Pairs outside every bin are ignored.  Empty bins are recorded in the
    report and skipped.  The result order is a deterministic shuffle.
    """
    if per_bin < 1:
        raise ValueError("per_bin must be >= 1")
    if report is None:
        report = GenerationReport()
    buckets: list[list[PhrasePair]] = [[] for _ in bins.edges]
    for pair in pairs:
        idx = bins.index_of(pair.first_diff_index)
        if idx is not None:
            buckets[idx].append(pair)
    chosen: list[PhrasePair] = []
    for label, bucket in zip(bins.labels(), buckets):
        if not bucket:
            report.skipped_bins.append(label)
            report.per_bin_counts[label] = 0
            continue
        take = min(per_bin, len(bucket))
        chosen.extend(rng.sample(bucket, take))
        report.per_bin_counts[label] = take
    rng.shuffle(chosen)
    return chosen


def _pair_id(anchor: str, query: str, role: str) -> str:
    digest = hashlib.sha1(f"{anchor}\x1f{query}".encode()).hexdigest()[:12]
    return f"{digest}-{role}"


def _record(
    anchor: TokenSeq,
    query: TokenSeq,
    label: bool,
    source: str,
    role: str,
    lexicon: Lexicon,
) -> PairRecord:
    anchor_text = " ".join(anchor)
    query_text = " ".join(query)
    ap = phonemize(anchor, lexicon)
    qp = phonemize(query, lexicon)
    return PairRecord(
        id=_pair_id(anchor_text, query_text, role),
        anchor_text=anchor_text,
        query_text=query_text,
        anchor_phonemes=ap,
        query_phonemes=qp,
        first_diff_index=first_diff_index(ap, qp),
        label=label,
        source=source,
    )


def expand_tuples(pair: PhrasePair, lexicon: Lexicon) -> list[PairRecord]:
    """One phrase pair (a, b) yields records (a,b,False), (b,a,False), (a,a,True)."""
    return [
        _record(pair.a, pair.b, False, "pob-spark", "ab", lexicon),
        _record(pair.b, pair.a, False, "pob-spark", "ba", lexicon),
        _record(pair.a, pair.a, True, "pob-spark", "aa", lexicon),
    ]


def generate_candidates(
    lexicon: Lexicon,
    word_pool: list[str],
    bins: BinSpec,
    per_bin: int,
    rng: random.Random,
    *,
    l_max: int = DEFAULT_L_MAX,
    max_distance: int = DEFAULT_MAX_DISTANCE,
    report: GenerationReport | None = None,
    max_attempts: int | None = None,
) -> list[PhrasePair]:
    """Generate candidate pairs until every bin holds >= per_bin of them.

    Stops early after max_attempts phrase builds (default 2000 * per_bin
    per bin); under-filled bins then surface later as sampling shortfalls.
    """
    if max_attempts is None:
        max_attempts = 2000 * per_bin * len(bins)
    fill = [0] * len(bins)
    candidates: list[PhrasePair] = []
    cache: dict[str, list[tuple[str, int]]] = {}
    attempts = 0
    while min(fill) < per_bin and attempts < max_attempts:
        attempts += 1
        phrase = build_phrase(lexicon, word_pool, l_max, rng)
        try:
            pair = make_pair(
                phrase, lexicon, max_distance, rng,
                neighbor_cache=cache, l_max=l_max,
            )
        except GenerationError:
            if report is not None:
                report.retries += 1
            continue
        idx = bins.index_of(pair.first_diff_index)
        if idx is None:
            continue
        candidates.append(pair)
        fill[idx] += 1
    return candidates


def generate_pob_spark(
    lexicon: Lexicon,
    word_pool: list[str],
    *,
    per_bin: int,
    bins: BinSpec | None = None,
    l_max: int = DEFAULT_L_MAX,
    max_distance: int = DEFAULT_MAX_DISTANCE,
    seed: int = 0,
) -> tuple[list[PairRecord], GenerationReport]:
    """Full pipeline: candidates -> uniform first-diff sample -> record triples."""
    bins = bins or BinSpec()
    if not word_pool:
        raise GenerationError("word pool is empty")
    pool = [w.lower() for w in word_pool]
    missing = [w for w in pool if w not in lexicon]
    if missing:
        raise OOVError(missing[0])
    rng = random.Random(seed)
    report = GenerationReport()
    candidates = generate_candidates(
        lexicon, pool, bins, per_bin, rng,
        l_max=l_max, max_distance=max_distance, report=report,
    )
    selected = sample_uniform_first_diff(candidates, bins, per_bin, rng, report)
    records = []
    for pair in selected:
        records.extend(expand_tuples(pair, lexicon))
    return records, report


def generate_pob_lp(
    rows: list[tuple[TokenSeq, TokenSeq, bool]],
    common_words: list[str],
    lexicon: Lexicon,
    rng: random.Random,
    *,
    max_retries: int = 100,
    report: GenerationReport | None = None,
) -> list[PairRecord]:
    """Derive prefix-overlap negatives from positive phrase rows.

    Each positive (anchor, query) row passes through unchanged and also
    yields a negative whose anchor gains one sampled common word, making
    the query a strict word-level prefix.  Non-positive rows are skipped.
    """
    if not common_words:
        raise GenerationError("common word list is empty")
    records = []
    for raw_anchor, raw_query, label in rows:
        if not label:
            continue
        anchor = tuple(w.lower() for w in raw_anchor)
        query = tuple(w.lower() for w in raw_query)
        if anchor != query:
            raise GenerationError(
                f"positive row has mismatched texts: {' '.join(anchor)!r} vs "
                f"{' '.join(query)!r}"
            )
        records.append(_record(anchor, query, True, "pob-lp", "pos", lexicon))
        extra = None
        for _ in range(max_retries):
            word = common_words[rng.randrange(len(common_words))]
            if word in lexicon:
                extra = word
                break
            if report is not None:
                report.retries += 1
        if extra is None:
            raise GenerationError(
                f"no phonemizable common word found in {max_retries} draws"
            )
        grown = anchor + (extra,)
        if not is_partial_overlap(grown, query):
            raise GenerationError("appended word failed to produce a partial overlap")
        records.append(_record(grown, query, False, "pob-lp", "ovl", lexicon))
    return records
