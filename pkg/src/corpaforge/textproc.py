"""Report text cleaning: sentence splitting, normalization, removal rules.

Cleaning applies four rules, in order, to every sentence of the analysis
text:

  R1  drop sentences with fewer than 2 words
  R2  drop sentences starting with a negating phrase
  R3  drop sentences containing a false-positive-inducing term
  R4  truncate a sentence at a mid-sentence negation trigger, then
      re-check R1 on the remainder (a sentence emptied by truncation is
      recorded under R4)

The surviving word lists are what every downstream stage (concept
extraction, synthesis, prompts) operates on.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

if TYPE_CHECKING:
    from .lexicon import ConceptLexicon

# Abbreviations whose trailing period must not end a sentence.
_ABBREVIATIONS = {
    "dr.", "mr.", "mrs.", "ms.", "st.", "a.m.", "p.m.",
    "e.g.", "i.e.", "vs.", "etc.", "approx.", "cf.",
}

_BOUNDARY_RE = re.compile(r"[.!?]+")
_TRAILING_TOKEN_RE = re.compile(r"(\S+)$")
_NORMALIZE_DROP_RE = re.compile(r"[^a-z0-9\s]")


def split_sentences(text: str) -> list[str]:
    """Split text into raw sentences at ., ! and ? boundaries.

    Periods inside decimal numbers and after common clinical
    abbreviations do not end a sentence. Newlines and tabs are ordinary
    whitespace, never boundaries.
    """
    sentences: list[str] = []
    start = 0
    for match in _BOUNDARY_RE.finditer(text):
        if match.group() == ".":
            pos = match.start()
            before = text[pos - 1] if pos > 0 else ""
            after = text[pos + 1] if pos + 1 < len(text) else ""
            if before.isdigit() and after.isdigit():
                continue
            token = _TRAILING_TOKEN_RE.search(text[start:match.end()])
            if token and token.group(1).lower() in _ABBREVIATIONS:
                continue
        piece = text[start:match.end()].strip()
        if piece:
            sentences.append(piece)
        start = match.end()
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def normalize(sentence: str) -> list[str]:
    """Lowercase and tokenize a sentence.

    Hyphens and slashes split words ("ground-glass" -> "ground glass");
    every other punctuation or formatting character is dropped.
    """
    lowered = sentence.lower().replace("-", " ").replace("/", " ")
    stripped = _NORMALIZE_DROP_RE.sub("", lowered)
    return stripped.split()


def find_subsequence(words: Sequence[str], needle: Sequence[str]) -> int:
    """Index of the first contiguous occurrence of needle, or -1."""
    n = len(needle)
    if n == 0 or n > len(words):
        return -1
    first = needle[0]
    for i in range(len(words) - n + 1):
        if words[i] == first and tuple(words[i:i + n]) == tuple(needle):
            return i
    return -1


@dataclass(frozen=True)
class CleanedSentence:
    words: tuple[str, ...]
    origin_index: int


@dataclass(frozen=True)
class RemovedSentence:
    origin_index: int
    text: str
    rule: str  # "R1".."R4"


@dataclass
class CleanedReport:
    report_id: str
    sentences: list[CleanedSentence] = field(default_factory=list)
    removed: list[RemovedSentence] = field(default_factory=list)


def _first_trigger_cut(words: Sequence[str], lexicon: "ConceptLexicon") -> int | None:
    """Truncation point for the earliest negation-trigger match, if any.

    The cut index accounts for the trigger's retained leading words
    (e.g. "clear of" keeps "clear"). Ties at the same start prefer the
    longest trigger.
    """
    best: tuple[int, int, int] | None = None  # (start, -len, cut)
    for trigger in lexicon.negation_triggers:
        pos = find_subsequence(words, trigger.words)
        if pos < 0:
            continue
        key = (pos, -len(trigger.words), pos + trigger.keep)
        if best is None or key < best:
            best = key
    if best is None:
        return None
    return best[2]


def clean_sentences(
    raw_sentences: Iterable[str], lexicon: "ConceptLexicon"
) -> tuple[list[CleanedSentence], list[RemovedSentence]]:
    """Apply R1-R4 to raw sentences, keeping a removal audit."""
    kept: list[CleanedSentence] = []
    removed: list[RemovedSentence] = []
    for index, raw in enumerate(raw_sentences):
        words = normalize(raw)
        if len(words) < 2:
            removed.append(RemovedSentence(index, raw, "R1"))
            continue
        if any(tuple(words[:len(p)]) == p for p in lexicon.negation_prefixes):
            removed.append(RemovedSentence(index, raw, "R2"))
            continue
        if any(find_subsequence(words, t) >= 0 for t in lexicon.false_positive_terms):
            removed.append(RemovedSentence(index, raw, "R3"))
            continue
        cut = _first_trigger_cut(words, lexicon)
        if cut is not None:
            words = words[:cut]
            if len(words) < 2:
                removed.append(RemovedSentence(index, raw, "R4"))
                continue
        kept.append(CleanedSentence(tuple(words), index))
    return kept, removed


def clean_report(report_id: str, analysis_text: str, lexicon: "ConceptLexicon") -> CleanedReport:
    """Split the analysis text and apply the removal rules."""
    kept, removed = clean_sentences(split_sentences(analysis_text), lexicon)
    return CleanedReport(report_id, kept, removed)
