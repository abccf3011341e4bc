from pathlib import Path

import pytest

from pobkit.phonemes import load_lexicon_file

REPO_ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = REPO_ROOT / "data"
FIXTURE_DIR = Path(__file__).resolve().parent / "fixtures"

TOY_DICT = DATA_DIR / "toy_cmudict.txt"
TOY_WORDS = DATA_DIR / "toy_words.txt"


@pytest.fixture(scope="session")
def toy_lexicon():
    return load_lexicon_file(TOY_DICT)


@pytest.fixture(scope="session")
def toy_words():
    return TOY_WORDS.read_text().split()
