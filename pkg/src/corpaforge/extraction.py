"""Concept detection in cleaned sentences and report-level vectors.

Type A phrases match as contiguous word sequences. Type B phrases are
decomposed into units against the lexicon's synonym groups (longest
member sequence wins); a sentence matches when every unit is satisfied,
in any order, words of multi-word synonym members staying contiguous.

The matcher prefilters candidate phrases through a word index before
running the exact checks; the test suite holds it against a naive
per-phrase scanner.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import LexiconError
from .lexicon import Concept, ConceptLexicon, Phrase, SynonymGroup, TYPE_A, TYPE_B
from .textproc import CleanedReport, find_subsequence

Unit = tuple[str, object]  # ("word", str) | ("group", SynonymGroup)


def phrase_units(words: Sequence[str], groups: Sequence[SynonymGroup]) -> list[Unit]:
    """Decompose a type-B phrase into word / synonym-group units."""
    units: list[Unit] = []
    i = 0
    while i < len(words):
        best: tuple[int, SynonymGroup] | None = None
        for group in groups:
            for member in group.members:
                n = len(member)
                if tuple(words[i:i + n]) == member:
                    if best is None or n > best[0]:
                        best = (n, group)
        if best is not None:
            units.append(("group", best[1]))
            i += best[0]
        else:
            units.append(("word", words[i]))
            i += 1
    return units


def _unit_satisfied(unit: Unit, words: Sequence[str], word_set: frozenset[str]) -> bool:
    kind, payload = unit
    if kind == "word":
        return payload in word_set
    for member in payload.members:  # type: ignore[union-attr]
        if len(member) == 1:
            if member[0] in word_set:
                return True
        elif member[0] in word_set and find_subsequence(words, member) >= 0:
            return True
    return False


def match_type_a(sentence: Sequence[str], phrase: Phrase) -> bool:
    """Contiguous occurrence of the phrase words in the sentence."""
    return find_subsequence(sentence, phrase.words) >= 0


def match_type_b(
    sentence: Sequence[str], phrase: Phrase, synonyms: Sequence[SynonymGroup]
) -> bool:
    """Order-free match of every phrase word or a synonym of it."""
    words = list(sentence)
    word_set = frozenset(words)
    return all(
        _unit_satisfied(u, words, word_set) for u in phrase_units(phrase.words, synonyms)
    )


@dataclass(frozen=True)
class ConceptVector:
    report_id: str
    bits: tuple[int, ...]

    def to_bitstring(self) -> str:
        return bits_to_string(self.bits)


def bits_to_string(bits: Sequence[int]) -> str:
    return "".join("1" if b else "0" for b in bits)


def string_to_bits(text: str) -> tuple[int, ...]:
    if not set(text) <= {"0", "1"}:
        raise ValueError(f"not a bit string: {text!r}")
    return tuple(1 if ch == "1" else 0 for ch in text)


def bits_from_concepts(lexicon: ConceptLexicon, concept_ids: Iterable[str]) -> tuple[int, ...]:
    bits = [0] * len(lexicon)
    for cid in concept_ids:
        bits[lexicon.concept_index(cid)] = 1
    return tuple(bits)


def active_concepts(lexicon: ConceptLexicon, bits: Sequence[int]) -> tuple[str, ...]:
    if len(bits) != len(lexicon):
        raise LexiconError(
            f"vector length {len(bits)} does not match lexicon size {len(lexicon)}"
        )
    return tuple(c.id for c, b in zip(lexicon.concepts, bits) if b)


class ConceptMatcher:
    """Per-lexicon matcher with a trigger-word prefilter.

    For every phrase, one word that must appear in a matching sentence
    is indexed (the first word for type A; every satisfier of the first
    unit for type B). Only phrases triggered by a sentence's word set
    get the full check.
    """

    def __init__(self, lexicon: ConceptLexicon):
        self.lexicon = lexicon
        self._by_trigger: dict[str, list[tuple[Concept, Phrase, list[Unit] | None]]] = {}
        for concept in lexicon.concepts:
            for phrase in concept.phrases:
                if phrase.kind == TYPE_A:
                    self._add(phrase.words[0], (concept, phrase, None))
                else:
                    units = phrase_units(phrase.words, lexicon.synonym_groups)
                    entry = (concept, phrase, units)
                    kind, payload = units[0]
                    if kind == "word":
                        self._add(payload, entry)
                    else:
                        for member in payload.members:
                            self._add(member[0], entry)

    def _add(self, word: str, entry: tuple) -> None:
        self._by_trigger.setdefault(word, []).append(entry)

    def match_sentence(self, words: Sequence[str]) -> set[str]:
        """Concept ids asserted by one cleaned sentence."""
        found: set[str] = set()
        word_list = list(words)
        word_set = frozenset(word_list)
        for word in word_set:
            for concept, phrase, units in self._by_trigger.get(word, ()):
                if concept.id in found:
                    continue
                if units is None:
                    if match_type_a(word_list, phrase):
                        found.add(concept.id)
                elif all(_unit_satisfied(u, word_list, word_set) for u in units):
                    found.add(concept.id)
        return found


def extract_sentence_concepts(
    words: Sequence[str], lexicon: ConceptLexicon, matcher: ConceptMatcher | None = None
) -> set[str]:
    matcher = matcher or ConceptMatcher(lexicon)
    return matcher.match_sentence(words)


def extract_concept_vector(
    cleaned: CleanedReport, lexicon: ConceptLexicon, matcher: ConceptMatcher | None = None
) -> ConceptVector:
    """Report vector: a bit is set when any retained sentence asserts it.

    The result is not canonicalized; the summary-concept override is
    applied by the labelling stage.
    """
    matcher = matcher or ConceptMatcher(lexicon)
    present: set[str] = set()
    for sentence in cleaned.sentences:
        present |= matcher.match_sentence(sentence.words)
    return ConceptVector(cleaned.report_id, bits_from_concepts(lexicon, present))
