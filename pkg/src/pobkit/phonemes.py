"""Pronouncing-dictionary parsing and phoneme-sequence primitives.

A pronunciation is represented as a plain tuple of uppercase ARPABET
symbols (stress digits stripped by default).  Everything downstream --
edit distance, neighbor queries, first-difference indices -- operates on
these tuples.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

PhonemeSeq = tuple[str, ...]
TokenSeq = tuple[str, ...]

_SYMBOL_RE = re.compile(r"^[A-Z]+[0-2]?$")
_VARIANT_RE = re.compile(r"^(.*)\((\d+)\)$")
_COMMENT_PREFIX = ";;;"

# Naive letter-to-ARPABET fallback for out-of-vocabulary words.  Greedy:
# at each position the two-letter digraphs are tried before single letters.
_FALLBACK_DIGRAPHS = {
    "ch": ("CH",),
    "ck": ("K",),
    "ee": ("IY",),
    "ng": ("NG",),
    "oo": ("UW",),
    "ph": ("F",),
    "qu": ("K", "W"),
    "sh": ("SH",),
    "th": ("TH",),
    "wh": ("W",),
}
_FALLBACK_LETTERS = {
    "a": "AE", "b": "B", "c": "K", "d": "D", "e": "EH", "f": "F",
    "g": "G", "h": "HH", "i": "IH", "j": "JH", "k": "K", "l": "L",
    "m": "M", "n": "N", "o": "AA", "p": "P", "q": "K", "r": "R",
    "s": "S", "t": "T", "u": "AH", "v": "V", "w": "W", "x": "K",
    "y": "Y", "z": "Z",
}


class LexiconParseError(ValueError):
    """Raised for malformed pronouncing-dictionary input."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class OOVError(LookupError):
    """Raised when a word has no pronunciation in the lexicon."""

    def __init__(self, word: str):
        super().__init__(f"word not in lexicon: {word!r}")
        self.word = word


@dataclass(frozen=True)
class Lexicon:
    """Word -> pronunciation-variants mapping.

    ``entries`` maps lowercased words to a non-empty list of pronunciation
    variants; the first variant is the primary one.  ``inventory`` is the
    set of symbols observed at load time.  Instances are immutable and
    safe for concurrent readers.
    """

    entries: dict[str, tuple[PhonemeSeq, ...]] = field(default_factory=dict)
    inventory: frozenset[str] = field(default_factory=frozenset)

    def __contains__(self, word: str) -> bool:
        return word.lower() in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def words(self) -> list[str]:
        return sorted(self.entries)

    def pronunciations(self, word: str) -> tuple[PhonemeSeq, ...]:
        try:
            return self.entries[word.lower()]
        except KeyError:
            raise OOVError(word) from None

    def primary(self, word: str) -> PhonemeSeq:
        return self.pronunciations(word)[0]


def _strip_stress(symbol: str) -> str:
    return symbol[:-1] if symbol[-1].isdigit() else symbol


def load_lexicon(
    source: str | IO[str] | Iterable[str],
    *,
    strip_stress: bool = True,
    include_variants: bool = True,
) -> Lexicon:
    """Parse a CMU-format pronouncing dictionary.

    Comment lines start with ";;;".  Entry lines are ``WORD  PH PH ...``;
    alternative pronunciations use ``WORD(2)``, ``WORD(3)``, ...  Variant
    entries are folded under the base word when ``include_variants`` is
    set, otherwise dropped.  Stress digits are removed from symbols when
    ``strip_stress`` is set.

    Raises LexiconParseError (with the offending line number) for entry
    lines without phonemes or with symbols outside ``[A-Z]+[0-2]?``.
    """
    lines = source.splitlines() if isinstance(source, str) else source
    entries: dict[str, list[PhonemeSeq]] = {}
    inventory: set[str] = set()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.startswith(_COMMENT_PREFIX):
            continue
        fields = line.split()
        word, symbols = fields[0], fields[1:]
        if not symbols:
            raise LexiconParseError(f"entry {word!r} has no phonemes", lineno)
        for sym in symbols:
            if not _SYMBOL_RE.match(sym):
                raise LexiconParseError(f"invalid phoneme symbol {sym!r}", lineno)
        if strip_stress:
            symbols = [_strip_stress(s) for s in symbols]
        variant = _VARIANT_RE.match(word)
        if variant:
            if not include_variants:
                continue
            word = variant.group(1)
        word = word.lower()
        pron = tuple(symbols)
        if variant and word not in entries:
            raise LexiconParseError(
                f"variant of {word!r} appears before its base entry", lineno
            )
        entries.setdefault(word, []).append(pron)
        inventory.update(symbols)
    return Lexicon(
        entries={w: tuple(v) for w, v in entries.items()},
        inventory=frozenset(inventory),
    )


def load_lexicon_file(path, **kwargs) -> Lexicon:
    with open(path, encoding="utf-8") as fh:
        return load_lexicon(fh, **kwargs)


def tokens(text: str) -> TokenSeq:
    """Whitespace-tokenize and lowercase a phrase."""
    return tuple(text.lower().split())


def fallback_phonemes(word: str) -> PhonemeSeq:
    """Naive letter-to-symbol pronunciation for OOV words.

    Greedy left-to-right: two-letter digraphs first, then single letters.
    Non-alphabetic characters are skipped.
    """
    word = word.lower()
    out: list[str] = []
    i = 0
    while i < len(word):
        pair = word[i : i + 2]
        if pair in _FALLBACK_DIGRAPHS:
            out.extend(_FALLBACK_DIGRAPHS[pair])
            i += 2
            continue
        ch = word[i]
        if ch in _FALLBACK_LETTERS:
            out.append(_FALLBACK_LETTERS[ch])
        i += 1
    return tuple(out)


def phonemize(
    phrase: Sequence[str], lexicon: Lexicon, *, fallback: bool = False
) -> PhonemeSeq:
    """Concatenate each word's primary pronunciation, in phrase order.

    With ``fallback`` set, out-of-vocabulary words use fallback_phonemes;
    otherwise an OOVError naming the word is raised.
    """
    if not phrase:
        raise ValueError("phrase is empty")
    out: list[str] = []
    for word in phrase:
        w = word.lower()
        if w in lexicon:
            out.extend(lexicon.primary(w))
        elif fallback:
            out.extend(fallback_phonemes(w))
        else:
            raise OOVError(word)
    return tuple(out)


def levenshtein(a: Sequence, b: Sequence) -> int:
    """Unit-cost edit distance (insert = delete = substitute = 1)."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, y in enumerate(b, start=1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y))
        prev = cur
    return prev[-1]


def first_diff_index(a: Sequence, b: Sequence) -> int:
    """0-based position of the first element at which ``a`` and ``b`` differ.

    Returns min(len(a), len(b)) when one is a prefix of the other, and the
    common length when the sequences are identical.
    """
    n = min(len(a), len(b))
    for i in range(n):
        if a[i] != b[i]:
            return i
    return n


def phonetic_neighbors(
    word: str,
    lexicon: Lexicon,
    max_distance: int,
    limit: int | None = None,
) -> list[tuple[str, int]]:
    """All other lexicon words within ``max_distance`` of ``word``.

    Distances compare primary pronunciations.  The result is sorted by
    (distance, word) and truncated to ``limit`` entries; the query word
    itself is never included.
    """
    word = word.lower()
    target = lexicon.primary(word)  # raises OOVError if absent
    hits = []
    for other, variants in lexicon.entries.items():
        if other == word:
            continue
        d = levenshtein(target, variants[0])
        if d <= max_distance:
            hits.append((other, d))
    hits.sort(key=lambda wd: (wd[1], wd[0]))
    return hits if limit is None else hits[:limit]


def is_partial_overlap(x: Sequence[str], y: Sequence[str]) -> bool:
    """True iff ``y`` equals a strict word-level prefix of ``x`` (case-folded)."""
    if len(x) <= len(y):
        return False
    return all(a.casefold() == b.casefold() for a, b in zip(x, y))
