"""Inter- and outer-class concept vector perturbations.

An inter-class perturbation redraws the bits of the row's own class
(keeping at least one active) so that the class restriction of the new
vector was actually observed for that class in the reference corpus. An
outer-class perturbation freezes the original class's bits, picks a
second target class, and redraws that class's remaining bits the same
way. Both are validated against the per-class valid-vector index, so no
emitted vector asserts a concept combination the corpus never produced.

Each row gets two perturbations of each kind by default; classes with a
single concept cannot be perturbed within the class, so they get four
outer-class perturbations instead, and inter shortfalls on sparse
classes are also backfilled with outer draws.

Draws use rejection sampling first (a capped number of random redraws of
the modifiable bits) and fall back to seeded sampling without
replacement from the exhaustively enumerated candidate set, so the
number of emitted records per row depends only on the index and the row,
never on the seed.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Sequence

from .errors import SamplingError
from .labelling import DatasetRow
from .lexicon import ConceptLexicon

REJECTION_CAP = 100
DEFAULT_SEED = 2
KIND_INTER = "inter"
KIND_OUTER = "outer"


@dataclass(frozen=True)
class PerturbationRecord:
    adversarial_id: str
    report_id: str
    kind: str
    original_class: str
    target_class: str | None
    original_vector: tuple[int, ...]
    perturbed_vector: tuple[int, ...]
    seed_lineage: dict

    def __post_init__(self) -> None:
        if self.kind not in (KIND_INTER, KIND_OUTER):
            raise ValueError(f"bad perturbation kind: {self.kind!r}")


@dataclass(frozen=True)
class ValidVectorIndex:
    """Per class: the distinct class restrictions observed in the corpus."""
    by_class: dict[str, tuple[tuple[int, ...], ...]]

    def restrictions(self, class_id: str) -> tuple[tuple[int, ...], ...]:
        return self.by_class.get(class_id, ())


def restriction(bits: Sequence[int], indices: Sequence[int]) -> tuple[int, ...]:
    return tuple(bits[i] for i in indices)


def build_valid_index(
    rows: Sequence[DatasetRow], lexicon: ConceptLexicon
) -> ValidVectorIndex:
    """Collect each class's observed sub-vectors from labelled rows."""
    if not rows:
        raise SamplingError("cannot build a valid-vector index from an empty corpus")
    seen: dict[str, set[tuple[int, ...]]] = {}
    for row in rows:
        indices = lexicon.class_concept_indices(row.label)
        sub = restriction(row.vector, indices)
        if not any(sub):
            continue  # defensive: a labelled row must have an active own bit
        seen.setdefault(row.label, set()).add(sub)
    return ValidVectorIndex(
        {cls: tuple(sorted(subs)) for cls, subs in seen.items()}
    )


def derive_rng(global_seed: int, *parts: object) -> random.Random:
    """Stable per-work-item RNG, independent of scheduling and hash seeds."""
    digest = hashlib.sha256(
        ":".join([str(global_seed), *map(str, parts)]).encode("utf-8")
    ).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def _apply(bits: Sequence[int], indices: Sequence[int], sub: Sequence[int]) -> tuple[int, ...]:
    out = list(bits)
    for i, b in zip(indices, sub):
        out[i] = b
    return tuple(out)


def perturb_inter(
    bits: Sequence[int],
    class_id: str,
    index: ValidVectorIndex,
    lexicon: ConceptLexicon,
    rng: random.Random,
    k: int,
) -> tuple[list[tuple[int, ...]], int]:
    """Up to k distinct valid redraws of the row's own class bits.

    Returns (vectors, shortfall); shortfall is how many of the k slots
    could not be filled with distinct valid perturbations.
    """
    indices = lexicon.class_concept_indices(class_id)
    own = restriction(bits, indices)
    valid = index.restrictions(class_id)
    candidates = [sub for sub in valid if sub != own]
    chosen: list[tuple[int, ...]] = []
    for _ in range(k):
        picked: tuple[int, ...] | None = None
        for _ in range(REJECTION_CAP):
            draw = tuple(rng.randint(0, 1) for _ in indices)
            if draw != own and any(draw) and draw in valid and draw not in chosen:
                picked = draw
                break
        if picked is None:
            remaining = [sub for sub in candidates if sub not in chosen]
            if not remaining:
                break
            picked = remaining[rng.randrange(len(remaining))]
        chosen.append(picked)
    shortfall = k - len(chosen)
    return [_apply(bits, indices, sub) for sub in chosen], shortfall


def _outer_candidates(
    bits: Sequence[int],
    class_id: str,
    target: str,
    index: ValidVectorIndex,
    lexicon: ConceptLexicon,
) -> list[tuple[int, ...]]:
    """Valid target-class restrictions compatible with the frozen bits."""
    t_indices = lexicon.class_concept_indices(target)
    frozen = set(lexicon.class_concept_indices(class_id))
    current = restriction(bits, t_indices)
    out = []
    for sub in index.restrictions(target):
        if sub == current:
            continue  # would leave the vector unchanged
        if all(
            sub[j] == current[j]
            for j, i in enumerate(t_indices)
            if i in frozen
        ):
            out.append(sub)
    return out


def perturb_outer(
    bits: Sequence[int],
    class_id: str,
    index: ValidVectorIndex,
    lexicon: ConceptLexicon,
    rng: random.Random,
    k: int,
) -> tuple[list[tuple[tuple[int, ...], str]], int]:
    """Up to k distinct (vector, target class) pairs.

    The original class's bits are frozen; a random second class is drawn
    and its free bits redrawn to a restriction observed for that class.
    The summary class is never a target. Target classes whose candidate
    set is empty are skipped and another is drawn.
    """
    frozen = set(lexicon.class_concept_indices(class_id))
    eligible = [
        cls
        for cls in lexicon.classes
        if cls not in (class_id, lexicon.summary_class)
        and _outer_candidates(bits, class_id, cls, index, lexicon)
    ]
    chosen: list[tuple[tuple[int, ...], str]] = []  # (sub, target) pairs
    for _ in range(k):
        picked: tuple[tuple[int, ...], str] | None = None
        for _ in range(REJECTION_CAP):
            if not eligible:
                break
            target = eligible[rng.randrange(len(eligible))]
            t_indices = lexicon.class_concept_indices(target)
            current = restriction(bits, t_indices)
            draw = tuple(
                current[j] if i in frozen else rng.randint(0, 1)
                for j, i in enumerate(t_indices)
            )
            if (
                draw != current
                and any(draw)
                and draw in index.restrictions(target)
                and (draw, target) not in chosen
            ):
                picked = (draw, target)
                break
        if picked is None:
            pool = [
                (sub, cls)
                for cls in eligible
                for sub in _outer_candidates(bits, class_id, cls, index, lexicon)
                if (sub, cls) not in chosen
            ]
            if not pool:
                break
            picked = pool[rng.randrange(len(pool))]
        chosen.append(picked)
    shortfall = k - len(chosen)
    results = [
        (_apply(bits, lexicon.class_concept_indices(target), sub), target)
        for sub, target in chosen
    ]
    return results, shortfall


def perturb_all(
    row: DatasetRow,
    index: ValidVectorIndex,
    lexicon: ConceptLexicon,
    global_seed: int = DEFAULT_SEED,
    k_inter: int = 2,
    k_outer: int = 2,
) -> tuple[list[PerturbationRecord], list[str]]:
    """All perturbation records for one test row.

    Single-concept classes get no inter slots and correspondingly more
    outer slots; inter shortfalls are likewise backfilled with extra
    outer draws so each row yields k_inter + k_outer records whenever the
    index allows it.
    """
    warnings: list[str] = []
    own_indices = lexicon.class_concept_indices(row.label)
    ki, ko = (0, k_inter + k_outer) if len(own_indices) < 2 else (k_inter, k_outer)

    rng_inter = derive_rng(global_seed, row.report_id, row.label, KIND_INTER)
    rng_outer = derive_rng(global_seed, row.report_id, row.label, KIND_OUTER)

    inter_vectors, short_inter = perturb_inter(
        row.vector, row.label, index, lexicon, rng_inter, ki
    )
    outer_pairs, short_outer = perturb_outer(
        row.vector, row.label, index, lexicon, rng_outer, ko + short_inter
    )
    if short_inter:
        warnings.append(
            f"{row.report_id}/{row.label}: {short_inter} inter slot(s) "
            "backfilled with outer draws"
        )
    if short_outer:
        warnings.append(
            f"{row.report_id}/{row.label}: shortfall of {short_outer} record(s)"
        )

    records: list[PerturbationRecord] = []
    slot = 0
    for vector in inter_vectors:
        records.append(
            PerturbationRecord(
                adversarial_id=f"{row.report_id}__{row.label}__s{slot}",
                report_id=row.report_id,
                kind=KIND_INTER,
                original_class=row.label,
                target_class=None,
                original_vector=tuple(row.vector),
                perturbed_vector=vector,
                seed_lineage={"seed": global_seed, "report_id": row.report_id,
                              "slot": slot},
            )
        )
        slot += 1
    for vector, target in outer_pairs:
        records.append(
            PerturbationRecord(
                adversarial_id=f"{row.report_id}__{row.label}__s{slot}",
                report_id=row.report_id,
                kind=KIND_OUTER,
                original_class=row.label,
                target_class=target,
                original_vector=tuple(row.vector),
                perturbed_vector=vector,
                seed_lineage={"seed": global_seed, "report_id": row.report_id,
                              "slot": slot},
            )
        )
        slot += 1
    if not records:
        warnings.append(f"{row.report_id}/{row.label}: no valid perturbation exists")
    return records, warnings
