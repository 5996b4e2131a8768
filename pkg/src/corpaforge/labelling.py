"""Vector-to-label conversion, class balancing and dataset splitting.

Labelling canonicalizes vectors (the summary concept is cleared when any
pathology concept is present), assigns one label per class with at least
one active concept, duplicates multi-label reports into one row per
label, undersamples the majority class with One-Sided Selection, and
performs a seeded stratified split.

A concept belonging to several classes (default lexicon: Opacities under
pneumonia and pleural effusion) counts toward its first listed class
when another concept of that class is active, and toward its last listed
class otherwise.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import SamplingError
from .extraction import active_concepts
from .lexicon import ConceptLexicon


@dataclass(frozen=True)
class LabelAssignment:
    report_id: str
    labels: tuple[str, ...]
    canonical_vector: tuple[int, ...]


@dataclass(frozen=True)
class DatasetRow:
    report_id: str
    label: str
    vector: tuple[int, ...]
    image_id: str | None = None


@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 2
    stratified: bool = True

    def __post_init__(self) -> None:
        if not math.isclose(sum(self.ratios), 1.0, abs_tol=1e-9):
            raise SamplingError(f"split ratios must sum to 1, got {self.ratios}")
        if any(r < 0 for r in self.ratios):
            raise SamplingError(f"split ratios must be non-negative: {self.ratios}")


SPLIT_NAMES = ("train", "val", "test")


def canonicalize(bits: Sequence[int], lexicon: ConceptLexicon) -> tuple[int, ...]:
    """Clear the summary bit when any other concept is present."""
    summary = lexicon.summary_concept_index
    out = list(bits)
    if out[summary] and any(b for i, b in enumerate(out) if i != summary):
        out[summary] = 0
    return tuple(out)


def labels_for(bits: Sequence[int], lexicon: ConceptLexicon) -> list[str]:
    """Class labels of a canonical vector, in lexicon class order.

    A zero vector yields no labels (the report is excluded from the
    labelled dataset).
    """
    active = set(active_concepts(lexicon, bits))
    resolved: set[str] = set()
    for cid in active:
        concept = lexicon.concept(cid)
        if len(concept.class_ids) == 1:
            resolved.add(concept.class_ids[0])
            continue
        chosen = concept.class_ids[-1]
        for cls in concept.class_ids[:-1]:
            if any(
                other != cid and cls in lexicon.concept(other).class_ids
                for other in active
            ):
                chosen = cls
                break
        resolved.add(chosen)
    return [cls for cls in lexicon.classes if cls in resolved]


def expand_multilabel(
    assignments: Sequence[tuple[str, Sequence[str], Sequence[int], str | None]],
) -> list[DatasetRow]:
    """One dataset row per (report, label), carrying the full vector."""
    rows: list[DatasetRow] = []
    for report_id, labels, vector, image_id in assignments:
        for label in labels:
            rows.append(DatasetRow(report_id, label, tuple(vector), image_id))
    return rows


def hamming(a: Sequence[int], b: Sequence[int]) -> float:
    return float(sum(1 for x, y in zip(a, b) if x != y))


def euclidean(a: Sequence[float], b: Sequence[float]) -> float:
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


_DISTANCES: dict[str, Callable[[Sequence[float], Sequence[float]], float]] = {
    "hamming": hamming,
    "euclidean": euclidean,
}


def _row_key(row: DatasetRow, lexicon: ConceptLexicon) -> tuple[str, int]:
    return (row.report_id, lexicon.class_index(row.label))


def _nearest(
    target: DatasetRow,
    pool: Sequence[DatasetRow],
    features: dict[tuple[str, int], Sequence[float]],
    dist: Callable,
    lexicon: ConceptLexicon,
) -> DatasetRow:
    best: DatasetRow | None = None
    best_key: tuple | None = None
    t_feat = features[_row_key(target, lexicon)]
    for candidate in pool:
        if candidate is target:
            continue
        key = (dist(t_feat, features[_row_key(candidate, lexicon)]),
               *_row_key(candidate, lexicon))
        if best_key is None or key < best_key:
            best, best_key = candidate, key
    assert best is not None
    return best


def one_sided_selection(
    rows: Sequence[DatasetRow],
    majority_class: str,
    lexicon: ConceptLexicon,
    seed: int = 2,
    distance: str = "hamming",
    features: dict[tuple[str, int], Sequence[float]] | None = None,
) -> tuple[list[DatasetRow], list[DatasetRow]]:
    """One-Sided Selection undersampling of the majority class.

    The retained set starts as all minority rows plus one seeded-random
    majority row; remaining majority rows join it only when 1-NN over the
    growing set mislabels them; finally every majority row in a Tomek
    link is removed. Only majority rows are ever dropped. Returns
    (retained, removed), both sorted by (report_id, class index).
    """
    if not rows:
        raise SamplingError("no rows to undersample")
    try:
        dist = _DISTANCES[distance]
    except KeyError:
        raise SamplingError(f"unknown distance: {distance!r}") from None

    ordered = sorted(rows, key=lambda r: _row_key(r, lexicon))
    feats = features or {
        _row_key(r, lexicon): r.vector for r in ordered
    }
    majority = [r for r in ordered if r.label == majority_class]
    minority = [r for r in ordered if r.label != majority_class]
    if not majority:
        raise SamplingError(f"majority class {majority_class!r} absent from rows")
    if not minority:
        raise SamplingError("all rows belong to the majority class")

    rng = random.Random(seed)
    seed_row = majority[rng.randrange(len(majority))]
    store: list[DatasetRow] = list(minority) + [seed_row]
    for row in majority:
        if row is seed_row:
            continue
        neighbor = _nearest(row, store, feats, dist, lexicon)
        if neighbor.label != row.label:
            store.append(row)

    # Tomek links: mutual nearest neighbors with different labels.
    nearest_of = {id(r): _nearest(r, store, feats, dist, lexicon) for r in store}
    dropped: set[int] = set()
    for row in store:
        if row.label != majority_class:
            continue
        neighbor = nearest_of[id(row)]
        if neighbor.label != row.label and nearest_of[id(neighbor)] is row:
            dropped.add(id(row))

    retained = sorted(
        (r for r in store if id(r) not in dropped),
        key=lambda r: _row_key(r, lexicon),
    )
    retained_ids = {id(r) for r in retained}
    removed = [r for r in ordered if id(r) not in retained_ids]
    return retained, removed


def _allocate(n: int, ratios: Sequence[float]) -> list[int]:
    """Largest-remainder allocation of n items over the ratios."""
    raw = [n * r for r in ratios]
    base = [int(x) for x in raw]
    leftover = n - sum(base)
    order = sorted(range(len(ratios)), key=lambda i: (-(raw[i] - base[i]), i))
    for i in order[:leftover]:
        base[i] += 1
    return base


def split_rows(
    rows: Sequence[DatasetRow],
    spec: SplitSpec,
    lexicon: ConceptLexicon,
) -> tuple[dict[str, str], list[str]]:
    """Assign each report to train/val/test.

    Rows of one report always share a split (duplicated multi-label rows
    never straddle partitions), so strata are the reports' label
    signatures. Strata with fewer than 3 reports go entirely to train
    with a warning. Returns (report_id -> split, warnings).
    """
    by_report: dict[str, list[DatasetRow]] = {}
    for row in rows:
        by_report.setdefault(row.report_id, []).append(row)

    strata: dict[tuple[str, ...], list[str]] = {}
    for report_id in sorted(by_report):
        signature = tuple(
            sorted({r.label for r in by_report[report_id]},
                   key=lexicon.class_index)
        )
        if not spec.stratified:
            signature = ()
        strata.setdefault(signature, []).append(report_id)

    rng = random.Random(spec.seed)
    assignment: dict[str, str] = {}
    warnings: list[str] = []
    for signature in sorted(strata):
        reports = strata[signature]
        if spec.stratified and len(reports) < 3:
            for report_id in reports:
                assignment[report_id] = "train"
            warnings.append(
                f"stratum {'/'.join(signature)}: {len(reports)} report(s), "
                "too few to stratify; assigned to train"
            )
            continue
        shuffled = list(reports)
        rng.shuffle(shuffled)
        counts = _allocate(len(shuffled), spec.ratios)
        cursor = 0
        for split, count in zip(SPLIT_NAMES, counts):
            for report_id in shuffled[cursor:cursor + count]:
                assignment[report_id] = split
            cursor += count
    return assignment, warnings
