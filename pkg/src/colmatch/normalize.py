"""Name cleaning and identifier splitting.

Anything that is not a letter (punctuation, digits, parentheses, whitespace)
acts as a delimiter. Letter runs are then split on camelCase boundaries and
case-folded.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class TokenizedName:
    raw: str
    tokens: tuple[str, ...]

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    def __bool__(self) -> bool:
        return bool(self.tokens)


def _letter_runs(raw: str) -> list[str]:
    runs: list[str] = []
    current: list[str] = []
    for ch in raw:
        if ch.isalpha():
            current.append(ch)
        elif current:
            runs.append("".join(current))
            current = []
    if current:
        runs.append("".join(current))
    return runs


def split_camel(word: str) -> list[str]:
    """Split one letter run on case boundaries.

    ``LocationID`` -> ``Location``, ``ID``; ``IDNumber`` -> ``ID``, ``Number``.
    Caseless letters behave like lower-case ones.
    """
    parts: list[str] = []
    start = 0
    n = len(word)
    for i in range(1, n):
        prev, cur = word[i - 1], word[i]
        if not cur.isupper():
            continue
        if not prev.isupper():
            # lower -> Upper
            parts.append(word[start:i])
            start = i
        elif i + 1 < n and not word[i + 1].isupper():
            # UPPERRun followed by Capitalized word: split before the last capital
            parts.append(word[start:i])
            start = i
    parts.append(word[start:])
    return [p for p in parts if p]


def _fold(part: str) -> str:
    folded = part.casefold()
    # casefold can emit combining marks (e.g. dotted capital I); keep letters only
    return "".join(ch for ch in folded if ch.isalpha() and not ch.isupper())


def normalize_name(raw: str) -> TokenizedName:
    tokens: list[str] = []
    for run in _letter_runs(raw):
        for part in split_camel(run):
            folded = _fold(part)
            if folded:
                tokens.append(folded)
    return TokenizedName(raw=raw, tokens=tuple(tokens))


def tokens_of(raw: str) -> tuple[str, ...]:
    return normalize_name(raw).tokens
