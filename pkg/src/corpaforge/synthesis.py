"""Adversarial report synthesis from perturbed concept vectors.

A per-concept sentence bank is sampled from the test split: up to five
unique sentences whose own concept set is exactly {c} or {c, d} for one
other concept d. Synthesis edits the original report's cleaned sentence
sequence: sentences carrying concepts dropped by an inter-class
perturbation are removed, and a bank sentence is inserted at the
second-to-last position for every concept the perturbation adds. A
verify-and-repair loop then re-extracts the edited report and fixes
stray or missing concepts (up to three rounds) so that every emitted
report re-extracts, after canonicalization, to exactly the target
vector.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Sequence

from .errors import SynthesisError
from .extraction import ConceptMatcher, active_concepts, bits_from_concepts
from .labelling import canonicalize
from .lexicon import ConceptLexicon
from .perturbation import KIND_INTER, PerturbationRecord
from .textproc import CleanedSentence

BANK_SENTENCES_PER_CONCEPT = 5
REPAIR_ROUNDS = 3


@dataclass(frozen=True)
class BankEntry:
    words: tuple[str, ...]
    concept_ids: frozenset[str]
    source_report_id: str


@dataclass
class SentenceBank:
    entries: dict[str, list[BankEntry]] = field(default_factory=dict)
    gaps: list[str] = field(default_factory=list)

    def for_concept(self, concept_id: str) -> list[BankEntry]:
        return self.entries.get(concept_id, [])


@dataclass(frozen=True)
class Edit:
    op: str  # "remove" | "insert"
    index: int  # position in the sentence list at the time of the edit
    words: tuple[str, ...]


@dataclass
class AdversarialReport:
    adversarial_id: str
    report_id: str
    kind: str
    original_class: str
    target_class: str | None
    sentences: list[tuple[str, ...]]
    edits: list[Edit]
    prompt_text: str


def build_bank(
    test_reports: Sequence[tuple[str, Sequence[tuple[Sequence[str], set[str]]]]],
    lexicon: ConceptLexicon,
    rng: random.Random,
    per_concept: int = BANK_SENTENCES_PER_CONCEPT,
) -> SentenceBank:
    """Sample the concept-to-sentence bank from test-split reports.

    ``test_reports`` holds (report_id, [(sentence words, concept id set)])
    pairs. A sentence qualifies for concept c when its own concept set is
    {c} or {c, d}; concepts with more qualifying sentences than the cap
    are sampled seeded-uniformly, concepts with none are recorded as
    gaps.
    """
    qualifying: dict[str, list[BankEntry]] = {c.id: [] for c in lexicon.concepts}
    seen_words: dict[str, set[tuple[str, ...]]] = {c.id: set() for c in lexicon.concepts}
    for report_id, sentences in sorted(test_reports, key=lambda r: r[0]):
        for words, concept_ids in sentences:
            if not 1 <= len(concept_ids) <= 2:
                continue
            entry = BankEntry(tuple(words), frozenset(concept_ids), report_id)
            for cid in concept_ids:
                if entry.words not in seen_words[cid]:
                    seen_words[cid].add(entry.words)
                    qualifying[cid].append(entry)

    bank = SentenceBank()
    for concept in lexicon.concepts:
        pool = qualifying[concept.id]
        if not pool:
            bank.gaps.append(concept.id)
            continue
        if len(pool) > per_concept:
            pool = rng.sample(pool, per_concept)
        bank.entries[concept.id] = sorted(pool, key=lambda e: (e.words, e.source_report_id))
    return bank


def _canonical_ids(concept_ids: set[str], lexicon: ConceptLexicon) -> set[str]:
    summary = lexicon.concepts[lexicon.summary_concept_index].id
    if concept_ids - {summary}:
        return concept_ids - {summary}
    return set(concept_ids)


def _insert(
    sentences: list[tuple[tuple[str, ...], set[str]]],
    entry: BankEntry,
    matcher: ConceptMatcher,
    edits: list[Edit],
) -> None:
    position = len(sentences) - 1 if len(sentences) >= 2 else len(sentences)
    sentences.insert(position, (entry.words, matcher.match_sentence(entry.words)))
    edits.append(Edit("insert", position, entry.words))


def _remove_matching(
    sentences: list[tuple[tuple[str, ...], set[str]]],
    drop: set[str],
    edits: list[Edit],
) -> None:
    i = 0
    while i < len(sentences):
        if sentences[i][1] & drop:
            edits.append(Edit("remove", i, sentences[i][0]))
            del sentences[i]
        else:
            i += 1


def _insert_for_missing(
    sentences: list[tuple[tuple[str, ...], set[str]]],
    missing: list[str],
    target_set: set[str],
    bank: SentenceBank,
    rng: random.Random,
    lexicon: ConceptLexicon,
    matcher: ConceptMatcher,
    edits: list[Edit],
    adversarial_id: str,
) -> None:
    covered: set[str] = set()
    for cid in sorted(missing, key=lexicon.concept_index):
        if cid in covered:
            continue
        eligible = [
            e for e in bank.for_concept(cid) if set(e.concept_ids) <= target_set
        ]
        if not eligible:
            reason = "no bank sentences" if not bank.for_concept(cid) else \
                "no bank sentence compatible with the target vector"
            raise SynthesisError(
                f"{adversarial_id}: cannot add concept {cid!r}: {reason}"
            )
        still_missing = set(missing) - covered
        paired = [e for e in eligible if len(e.concept_ids & still_missing) >= 2]
        pool = paired or eligible
        entry = pool[rng.randrange(len(pool))]
        _insert(sentences, entry, matcher, edits)
        covered |= entry.concept_ids & set(missing)


def synthesize(
    record: PerturbationRecord,
    original_sentences: Sequence[Sequence[str]],
    bank: SentenceBank,
    lexicon: ConceptLexicon,
    rng: random.Random,
    matcher: ConceptMatcher | None = None,
) -> AdversarialReport:
    """Rewrite one report's cleaned sentences to match its perturbed vector.

    Raises SynthesisError when a needed concept has no usable bank
    sentence or the verify-repair loop fails to converge; callers count
    such records as unsynthesizable.
    """
    matcher = matcher or ConceptMatcher(lexicon)
    original_set = set(active_concepts(lexicon, record.original_vector))
    target_set = set(active_concepts(lexicon, record.perturbed_vector))

    working: list[tuple[tuple[str, ...], set[str]]] = [
        (tuple(words), matcher.match_sentence(words)) for words in original_sentences
    ]
    edits: list[Edit] = []

    # Removal applies to inter-class records only: concepts of the original
    # class that the perturbation cleared.
    if record.kind == KIND_INTER:
        own = {
            lexicon.concepts[i].id
            for i in lexicon.class_concept_indices(record.original_class)
        }
        dropped = (original_set - target_set) & own
        if dropped:
            _remove_matching(working, dropped, edits)

    added = sorted(target_set - original_set, key=lexicon.concept_index)
    if added:
        _insert_for_missing(
            working, added, target_set, bank, rng, lexicon, matcher, edits,
            record.adversarial_id,
        )

    # Verify and repair: the edited report must re-extract to the target.
    canonical_target = _canonical_ids(target_set, lexicon)
    for round_no in range(REPAIR_ROUNDS + 1):
        extracted: set[str] = set()
        for _, concept_ids in working:
            extracted |= concept_ids
        canonical_extracted = _canonical_ids(extracted, lexicon) if extracted else set()
        strays = canonical_extracted - canonical_target
        missing = canonical_target - canonical_extracted
        if not strays and not missing:
            break
        if round_no == REPAIR_ROUNDS:
            raise SynthesisError(
                f"{record.adversarial_id}: verify-repair did not converge after "
                f"{REPAIR_ROUNDS} rounds"
            )
        _remove_matching(working, strays, edits)
        if missing:
            _insert_for_missing(
                working, sorted(missing, key=lexicon.concept_index), target_set,
                bank, rng, lexicon, matcher, edits, record.adversarial_id,
            )

    sentences = [words for words, _ in working]
    return AdversarialReport(
        adversarial_id=record.adversarial_id,
        report_id=record.report_id,
        kind=record.kind,
        original_class=record.original_class,
        target_class=record.target_class,
        sentences=sentences,
        edits=edits,
        prompt_text=". ".join(" ".join(words) for words in sentences),
    )


def replay_inverse(
    sentences: Sequence[Sequence[str]], edits: Sequence[Edit]
) -> list[tuple[str, ...]]:
    """Undo the edit log, recovering the original sentence sequence."""
    out = [tuple(s) for s in sentences]
    for edit in reversed(edits):
        if edit.op == "insert":
            if not (0 <= edit.index < len(out)) or out[edit.index] != edit.words:
                raise SynthesisError("edit log does not match the sentence list")
            del out[edit.index]
        elif edit.op == "remove":
            out.insert(edit.index, edit.words)
        else:
            raise SynthesisError(f"unknown edit op: {edit.op!r}")
    return out


def verify_roundtrip(
    report: AdversarialReport,
    record: PerturbationRecord,
    lexicon: ConceptLexicon,
    matcher: ConceptMatcher | None = None,
) -> bool:
    """Re-extract the synthesized report and compare canonical vectors."""
    matcher = matcher or ConceptMatcher(lexicon)
    extracted: set[str] = set()
    for words in report.sentences:
        extracted |= matcher.match_sentence(words)
    got = canonicalize(bits_from_concepts(lexicon, extracted), lexicon)
    want = canonicalize(record.perturbed_vector, lexicon)
    return got == want
