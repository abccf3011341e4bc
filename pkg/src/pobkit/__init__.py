"""pobkit: partial-overlap benchmark generation, a desk-scale audio-text
matcher with interchangeable scoring heads, and prefix-bias diagnostics."""

from pobkit.phonemes import (
    Lexicon,
    LexiconParseError,
    OOVError,
    first_diff_index,
    is_partial_overlap,
    levenshtein,
    load_lexicon,
    load_lexicon_file,
    phonemize,
    phonetic_neighbors,
    tokens,
)

__version__ = "0.1.0"

__all__ = [
    "Lexicon",
    "LexiconParseError",
    "OOVError",
    "first_diff_index",
    "is_partial_overlap",
    "levenshtein",
    "load_lexicon",
    "load_lexicon_file",
    "phonemize",
    "phonetic_neighbors",
    "tokens",
    "__version__",
]
