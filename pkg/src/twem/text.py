"""Rule-based tweet tokenizer, preprocessing schemes and n-gram bags."""

from __future__ import annotations

import enum
import re
from collections import Counter

PUNCT = set('.,!?:;"()')

USER_PLACEHOLDER = "USER"
ENTITY_PLACEHOLDER = "ENT"
PLACEHOLDERS = frozenset({USER_PLACEHOLDER, ENTITY_PLACEHOLDER})

_URL = re.compile(r"^(?:https?://|www\.)\S+$", re.IGNORECASE)
_MENTION = re.compile(r"^@\w+$")
_HASHTAG = re.compile(r"^#\w+$")
_EMOTICON = re.compile(
    r"""^(?:
        [<>]?[:;=8xX][\-o\*']?[\)\]\(\[dDpP/\\|@3]+   # :) ;-( =D :P xD
      | [\)\]\(\[dDpP/\\|@]+[\-o\*']?[:;=8]            # reversed (:
      | <3+ | </3                                      # hearts
    )$""",
    re.VERBOSE,
)
# the stem must be non-empty so a bare "'s" or "n't" is a fixed point
_CONTRACTION = re.compile(r"^(.+?)(n['’]t|['’](?:s|m|re|ve|ll|d))$", re.IGNORECASE)


class PreprocessScheme(enum.Enum):
    TOKENIZE = "tokenize"
    TOKENIZE_LOWER = "tokenize-lower"
    REPLACE = "replace"
    REPLACE_LOWER = "replace-lower"

    @classmethod
    def parse(cls, value: "str | PreprocessScheme") -> "PreprocessScheme":
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            choices = "|".join(s.value for s in cls)
            raise ValueError(f"unknown scheme {value!r}; expected one of {choices}") from None


def is_url(token: str) -> bool:
    return bool(_URL.match(token))


def is_mention(token: str) -> bool:
    return bool(_MENTION.match(token))


def _is_atomic(chunk: str) -> bool:
    return bool(_EMOTICON.match(chunk) or _URL.match(chunk))


def _split_chunk(chunk: str) -> list[str]:
    head: list[str] = []
    tail: list[str] = []
    while chunk and not _is_atomic(chunk):
        if chunk[0] in PUNCT:
            head.append(chunk[0])
            chunk = chunk[1:]
        elif chunk[-1] in PUNCT:
            tail.append(chunk[-1])
            chunk = chunk[:-1]
        else:
            break
    tail.reverse()
    if not chunk:
        return head + tail
    if _is_atomic(chunk) or _MENTION.match(chunk) or _HASHTAG.match(chunk):
        return head + [chunk] + tail
    m = _CONTRACTION.match(chunk)
    if m:
        return head + _split_chunk(m.group(1)) + [m.group(2)] + tail
    return head + [chunk] + tail


def tokenize_basic(text: str) -> list[str]:
    """Whitespace split, then peel edge punctuation and split contractions.

    URLs and emoticons are never split, mentions and hashtags keep their
    body, and case is preserved.
    """
    tokens: list[str] = []
    for chunk in text.split():
        tokens.extend(_split_chunk(chunk))
    return tokens


def _replace(tokens: list[str]) -> list[str]:
    out = []
    for i, tok in enumerate(tokens):
        if is_mention(tok):
            out.append(USER_PLACEHOLDER)
        elif is_url(tok) or (i == 0 and tok == "RT"):
            out.append(ENTITY_PLACEHOLDER)
        else:
            out.append(tok)
    return out


def apply_scheme(text: str, scheme: PreprocessScheme | str = PreprocessScheme.TOKENIZE) -> list[str]:
    scheme = PreprocessScheme.parse(scheme)
    tokens = tokenize_basic(text)
    if scheme is PreprocessScheme.TOKENIZE:
        return tokens
    if scheme is PreprocessScheme.TOKENIZE_LOWER:
        return [t.lower() for t in tokens]
    tokens = _replace(tokens)
    if scheme is PreprocessScheme.REPLACE_LOWER:
        tokens = [t if t in PLACEHOLDERS else t.lower() for t in tokens]
    return tokens


def char_ngrams(text: str, n_min: int = 1, n_max: int = 4) -> Counter:
    """Counts of every substring of length ``n_min..n_max``, whitespace collapsed."""
    if not 1 <= n_min <= n_max:
        raise ValueError(f"need 1 <= n_min <= n_max, got {n_min}, {n_max}")
    s = " ".join(text.split())
    bag: Counter = Counter()
    for n in range(n_min, min(n_max, len(s)) + 1):
        bag.update(s[i:i + n] for i in range(len(s) - n + 1))
    return bag


def word_unigrams(tokens) -> Counter:
    return Counter(tokens)
