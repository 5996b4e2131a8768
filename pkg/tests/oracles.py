"""Independent brute-force reference implementations used as test oracles.

Everything here is deliberately naive: plain nested loops, no indexing,
no shared code with the library's optimized paths beyond the data types.
"""

from __future__ import annotations

import random
from typing import Sequence

from corpaforge.lexicon import ConceptLexicon, TYPE_A


def _occurs(words: Sequence[str], needle: Sequence[str]) -> bool:
    n = len(needle)
    for i in range(len(words) - n + 1):
        if all(words[i + j] == needle[j] for j in range(n)):
            return True
    return False


def naive_units(phrase_words: Sequence[str], groups) -> list:
    units = []
    i = 0
    while i < len(phrase_words):
        matched = None
        for group in groups:
            for member in group.members:
                if (
                    i + len(member) <= len(phrase_words)
                    and all(phrase_words[i + j] == member[j] for j in range(len(member)))
                ):
                    if matched is None or len(member) > len(matched[1]):
                        matched = (group, member)
        if matched is not None:
            units.append(("group", matched[0]))
            i += len(matched[1])
        else:
            units.append(("word", phrase_words[i]))
            i += 1
    return units


def naive_match_phrase(words: Sequence[str], phrase, lexicon: ConceptLexicon) -> bool:
    if phrase.kind == TYPE_A:
        return _occurs(words, phrase.words)
    for kind, payload in naive_units(phrase.words, lexicon.synonym_groups):
        if kind == "word":
            if payload not in words:
                return False
        else:
            if not any(_occurs(words, member) for member in payload.members):
                return False
    return True


def naive_sentence_concepts(words: Sequence[str], lexicon: ConceptLexicon) -> set[str]:
    """Try every phrase of every concept against the sentence."""
    found: set[str] = set()
    for concept in lexicon.concepts:
        for phrase in concept.phrases:
            if naive_match_phrase(words, phrase, lexicon):
                found.add(concept.id)
                break
    return found


def naive_average_precision(
    scores: Sequence[float], relevance: Sequence[int], ids: Sequence[str]
) -> float:
    """Rank-scan AP: recompute precision and recall at every rank."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], ids[i]))
    total_pos = sum(relevance)
    ap = 0.0
    prev_recall = 0.0
    for k in range(1, len(order) + 1):
        top = order[:k]
        hits = sum(relevance[i] for i in top)
        precision = hits / k
        recall = hits / total_pos
        ap += precision * (recall - prev_recall)
        prev_recall = recall
    return ap


def naive_auroc(scores: Sequence[float], relevance: Sequence[int]) -> float:
    """Pairwise comparison count, ties worth one half."""
    positives = [scores[i] for i in range(len(scores)) if relevance[i]]
    negatives = [scores[i] for i in range(len(scores)) if not relevance[i]]
    total = 0.0
    for p in positives:
        for n in negatives:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(positives) * len(negatives))


def naive_tomek_links(
    points: Sequence[tuple[str, str, tuple[int, ...]]],
) -> set[tuple[str, str]]:
    """All mutual-nearest-neighbor pairs with different labels.

    points: (point id, label, feature bits); nearest neighbor ties break
    by ascending point id. Returns the set of linked pairs (id order
    normalized).
    """
    def dist(a, b):
        return sum(1 for x, y in zip(a, b) if x != y)

    def nearest(i: int) -> int:
        best = None
        for j in range(len(points)):
            if j == i:
                continue
            key = (dist(points[i][2], points[j][2]), points[j][0])
            if best is None or key < best[0]:
                best = (key, j)
        return best[1]

    links: set[tuple[str, str]] = set()
    for i in range(len(points)):
        j = nearest(i)
        if points[i][1] != points[j][1] and nearest(j) == i:
            links.add(tuple(sorted((points[i][0], points[j][0]))))
    return links


def naive_one_sided_selection(
    points: Sequence[tuple[str, str, tuple[int, ...]]],
    majority_label: str,
    seed: int,
) -> list[str]:
    """Reference OSS over (id, label, bits) points; returns removed ids.

    Follows the documented contract: points sorted by id, one
    seeded-random majority point kept, incremental 1-NN condensation,
    then Tomek-link removal of majority points.
    """
    def dist(a, b):
        return sum(1 for x, y in zip(a, b) if x != y)

    ordered = sorted(points, key=lambda p: p[0])
    majority = [p for p in ordered if p[1] == majority_label]
    minority = [p for p in ordered if p[1] != majority_label]
    rng = random.Random(seed)
    kept_seed = majority[rng.randrange(len(majority))]
    store = list(minority) + [kept_seed]
    for point in majority:
        if point is kept_seed:
            continue
        best = None
        for other in store:
            key = (dist(point[2], other[2]), other[0])
            if best is None or key < best[0]:
                best = (key, other)
        if best[1][1] != point[1]:
            store.append(point)

    def nearest_in_store(point):
        best = None
        for other in store:
            if other is point:
                continue
            key = (dist(point[2], other[2]), other[0])
            if best is None or key < best[0]:
                best = (key, other)
        return best[1]

    removed_ids = []
    for point in store:
        if point[1] != majority_label:
            continue
        neighbor = nearest_in_store(point)
        if neighbor[1] != point[1] and nearest_in_store(neighbor) is point:
            removed_ids.append(point[0])
    retained = {p[0] for p in store} - set(removed_ids)
    return sorted(p[0] for p in ordered if p[0] not in retained)
