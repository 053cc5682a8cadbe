import logging
import re
import unicodedata
from pathlib import Path
from typing import AbstractSet, Dict, FrozenSet, List, Optional

from pydantic import BaseModel, Field

from app.exceptions import DataError

logger = logging.getLogger(__name__)

TokenSequence = List[str]
StopwordList = FrozenSet[str]

ASCII_EMOTICONS = frozenset(
    {
        ":)", ":-)", ":(", ":-(", ":d", ":-d", ":p", ":-p", ";)", ";-)", ":o", ":-o",
        ":/", ":-/", ":|", ":-|", ":'(", ":*", ":-*", "<3", "</3", "^^", "^_^", "^.^",
        "=)", "=(", "xd", "-_-", "t_t", "o_o", ":))", ":)))", ":((", ":(((", ">.<", ">_<",
        ":3", "=))", ":v", "b-)", "8-)",
    }
)

EMOJI_PATTERN = re.compile(
    "["
    "\U0001F300-\U0001F5FF"
    "\U0001F600-\U0001F64F"
    "\U0001F680-\U0001F6FF"
    "\U0001F700-\U0001F77F"
    "\U0001F900-\U0001F9FF"
    "\U0001FA70-\U0001FAFF"
    "\u2600-\u27BF"
    "\uFE0F"
    "\u200D"
    "]+"
)

# letters are word characters that are neither digits nor underscore
LETTER_PATTERN = re.compile(r"[^\W\d_]")
NUMBER_PATTERN = re.compile(r"^[+-]?\d+([.,]\d+)*%?$")
EDGE_PATTERN = re.compile(r"^[\W_]+|[\W_]+$")


def tokenize(text: str) -> TokenSequence:
    """Whitespace tokens, lowercased; underscore-joined compounds stay whole."""
    return unicodedata.normalize("NFC", text).lower().split()


def _strip_edges(token: str) -> str:
    # "hay," -> "hay"; underscores only survive inside a compound
    return EDGE_PATTERN.sub("", token)


def is_noise(token: str) -> bool:
    if token in ASCII_EMOTICONS or EMOJI_PATTERN.fullmatch(token):
        return True
    if NUMBER_PATTERN.match(token):
        return True
    return LETTER_PATTERN.search(token) is None


def clean(tokens: TokenSequence, stopwords: AbstractSet[str]) -> TokenSequence:
    """Drop numbers, punctuation, emoticons/emoji and stopwords, keeping order."""
    kept: TokenSequence = []
    for token in tokens:
        if is_noise(token):
            continue
        token = EMOJI_PATTERN.sub("", token)
        token = _strip_edges(token)
        if not token or is_noise(token) or token in stopwords:
            continue
        kept.append(token)
    return kept


def preprocess_text(text: str, stopwords: AbstractSet[str]) -> TokenSequence:
    return clean(tokenize(text), stopwords)


def load_stopwords(path: Optional[str]) -> StopwordList:
    """One lowercase token per line; '#' starts a comment. No path -> empty list."""
    if not path:
        return frozenset()
    file_path = Path(path)
    if not file_path.is_file():
        raise DataError(f"Stopword file not found: {path}")
    words = set()
    with file_path.open(encoding="utf-8") as f:
        for line in f:
            word = line.split("#", 1)[0].strip().lower()
            if word:
                words.add(word)
    logger.info(f"Loaded {len(words)} stopwords from {path}")
    return frozenset(words)


class PreprocessedCorpus(BaseModel):
    tokens: Dict[str, List[str]] = Field(..., description="Record id -> cleaned tokens, in corpus order")
    flagged: List[str] = Field(default_factory=list, description="Ids reduced to empty sequences")

    def __len__(self) -> int:
        return len(self.tokens)

    def __getitem__(self, record_id: str) -> List[str]:
        return self.tokens[record_id]


def preprocess_corpus(corpus, stopwords: AbstractSet[str]) -> PreprocessedCorpus:
    """tokenize + clean every record; empty results are kept and flagged."""
    tokens: Dict[str, List[str]] = {}
    flagged: List[str] = []
    for record in corpus.records:
        seq = preprocess_text(record.text, stopwords)
        tokens[record.id] = seq
        if not seq:
            flagged.append(record.id)
    if flagged:
        logger.warning(f"{len(flagged)} records are empty after preprocessing (e.g. {flagged[:3]})")
    return PreprocessedCorpus(tokens=tokens, flagged=flagged)
