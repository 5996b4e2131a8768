"""Evaluation metrics: AP/AUROC, robustness verdicts, attack success rates.

No model inference happens here; per-item class scores are ingested from
delimited prediction files and joined against perturbation records. All
tie handling is deterministic: ranking ties break by ascending item id,
argmax/top-2 ties by ascending class index.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import EvaluationError
from .lexicon import ConceptLexicon
from .perturbation import KIND_INTER, KIND_OUTER, PerturbationRecord


def average_precision(
    scores: Sequence[float], relevance: Sequence[int], item_ids: Sequence[str] | None = None
) -> float | None:
    """Step-interpolated average precision; None with zero positives."""
    n = len(scores)
    if len(relevance) != n:
        raise EvaluationError("scores and relevance lengths differ")
    positives = sum(1 for r in relevance if r)
    if positives == 0:
        return None
    ids = item_ids if item_ids is not None else [str(i) for i in range(n)]
    order = sorted(range(n), key=lambda i: (-scores[i], ids[i]))
    ap = 0.0
    hits = 0
    for rank, i in enumerate(order, start=1):
        if relevance[i]:
            hits += 1
            ap += hits / rank
    return ap / positives


def auroc(scores: Sequence[float], relevance: Sequence[int]) -> float | None:
    """Rank-statistic AUROC with average ranks for ties; None if one class."""
    n = len(scores)
    if len(relevance) != n:
        raise EvaluationError("scores and relevance lengths differ")
    positives = sum(1 for r in relevance if r)
    negatives = n - positives
    if positives == 0 or negatives == 0:
        return None
    order = sorted(range(n), key=lambda i: scores[i])
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        avg_rank = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = avg_rank
        i = j + 1
    rank_sum = sum(ranks[i] for i in range(n) if relevance[i])
    return (rank_sum - positives * (positives + 1) / 2) / (positives * negatives)


def robustness_verdict(
    kind: str,
    original_class: str,
    target_class: str | None,
    scores: Sequence[float],
    classes: Sequence[str],
) -> bool:
    """True when the model withstood the perturbation.

    Inter-class: the top-scoring class is still the original. Outer-class:
    the two top-scoring classes are exactly {original, target}.
    """
    if len(scores) != len(classes):
        raise EvaluationError("score vector length does not match class count")
    ranked = sorted(range(len(classes)), key=lambda i: (-scores[i], i))
    if kind == KIND_INTER:
        return classes[ranked[0]] == original_class
    if kind == KIND_OUTER:
        if target_class is None:
            raise EvaluationError("outer record without a target class")
        top_two = {classes[ranked[0]], classes[ranked[1]]}
        return top_two == {original_class, target_class}
    raise EvaluationError(f"unknown perturbation kind: {kind!r}")


def attack_success_rate(
    verdicts: Sequence[tuple[str, bool]],
) -> tuple[float | None, float | None, float]:
    """(ASR_inter, ASR_outer, ASR_all) from (kind, robust) pairs."""
    if not verdicts:
        raise EvaluationError("no records to compute an attack success rate from")

    def rate(kind: str) -> float | None:
        hits = [robust for k, robust in verdicts if k == kind]
        if not hits:
            return None
        return sum(1 for robust in hits if not robust) / len(hits)

    overall = sum(1 for _, robust in verdicts if not robust) / len(verdicts)
    return rate(KIND_INTER), rate(KIND_OUTER), overall


def asr_curve_auc(points: Sequence[tuple[float, float]]) -> float:
    """Trapezoidal AUC of an ASR curve over its min-max-normalized parameter."""
    if len(points) < 2:
        raise EvaluationError("an ASR curve needs at least 2 points")
    params = [p for p, _ in points]
    if any(b <= a for a, b in zip(params, params[1:])):
        raise EvaluationError("curve parameter values must be strictly increasing")
    lo, hi = params[0], params[-1]
    xs = [(p - lo) / (hi - lo) for p in params]
    ys = [y for _, y in points]
    return sum(
        (xs[i + 1] - xs[i]) * (ys[i] + ys[i + 1]) / 2 for i in range(len(xs) - 1)
    )


# ---------------------------------------------------------------------------
# Prediction files and the full evaluation report
# ---------------------------------------------------------------------------

@dataclass
class PredictionSet:
    item_ids: list[str]
    true_labels: list[str]
    scores: list[list[float]]  # one row per item, class order = lexicon order
    classes: tuple[str, ...]

    def row(self, i: int) -> list[float]:
        return self.scores[i]


def load_predictions(path: str | Path, lexicon: ConceptLexicon) -> PredictionSet:
    """Read a delimited prediction file.

    Mandatory header: item_id,true_label,score_<class>,... with the score
    columns in lexicon class order.
    """
    expected = ["item_id", "true_label"] + [f"score_{c}" for c in lexicon.classes]
    path = Path(path)
    if not path.exists():
        raise EvaluationError(f"prediction file not found: {path}")
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise EvaluationError(f"{path}: empty prediction file") from None
        if [h.strip() for h in header] != expected:
            raise EvaluationError(
                f"{path}: header must be exactly {','.join(expected)}"
            )
        item_ids: list[str] = []
        true_labels: list[str] = []
        scores: list[list[float]] = []
        seen: set[str] = set()
        for lineno, row in enumerate(reader, start=2):
            if not row or not any(cell.strip() for cell in row):
                continue
            if len(row) != len(expected):
                raise EvaluationError(f"{path}:{lineno}: wrong column count")
            item = row[0].strip()
            if item in seen:
                raise EvaluationError(f"{path}:{lineno}: duplicate item_id {item!r}")
            seen.add(item)
            try:
                values = [float(cell) for cell in row[2:]]
            except ValueError as exc:
                raise EvaluationError(f"{path}:{lineno}: bad score: {exc}") from exc
            if any(v != v or v in (float("inf"), float("-inf")) for v in values):
                raise EvaluationError(f"{path}:{lineno}: scores must be finite")
            item_ids.append(item)
            true_labels.append(row[1].strip())
            scores.append(values)
    return PredictionSet(item_ids, true_labels, scores, lexicon.classes)


ADV_TRUTH_BOTH = "both"          # outer records count for original and target
ADV_TRUTH_ORIGINAL = "original"  # outer records count for the original only


@dataclass
class MetricsReport:
    classes: tuple[str, ...]
    original_ap: dict[str, float | None] = field(default_factory=dict)
    original_auroc: dict[str, float | None] = field(default_factory=dict)
    adversarial_ap: dict[str, float | None] = field(default_factory=dict)
    adversarial_auroc: dict[str, float | None] = field(default_factory=dict)
    original_map: float | None = None
    original_mauroc: float | None = None
    adversarial_map: float | None = None
    adversarial_mauroc: float | None = None
    map_decrease: float | None = None
    mauroc_decrease: float | None = None
    asr_inter: float | None = None
    asr_outer: float | None = None
    asr_all: float | None = None
    curve_aucs: dict[str, float] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def to_mapping(self) -> dict:
        return {
            "classes": list(self.classes),
            "original": {
                "ap": self.original_ap,
                "auroc": self.original_auroc,
                "map": self.original_map,
                "mauroc": self.original_mauroc,
            },
            "adversarial": {
                "ap": self.adversarial_ap,
                "auroc": self.adversarial_auroc,
                "map": self.adversarial_map,
                "mauroc": self.adversarial_mauroc,
            },
            "mean_decrease": {
                "map": self.map_decrease,
                "mauroc": self.mauroc_decrease,
            },
            "asr": {
                "inter": self.asr_inter,
                "outer": self.asr_outer,
                "all": self.asr_all,
            },
            "curve_aucs": self.curve_aucs,
            "counts": self.counts,
            "warnings": self.warnings,
        }


def _mean(values: Sequence[float | None]) -> float | None:
    present = [v for v in values if v is not None]
    if not present:
        return None
    return sum(present) / len(present)


def _display(class_id: str) -> str:
    return class_id.replace("_", " ").title()


def evaluate(
    original: PredictionSet,
    adversarial: PredictionSet | None,
    records: Sequence[PerturbationRecord],
    lexicon: ConceptLexicon,
    adv_truth: str = ADV_TRUTH_BOTH,
    max_unjoined_fraction: float = 0.01,
) -> MetricsReport:
    """Score the original and adversarial prediction sets.

    Adversarial items join perturbation records on adversarial_id; more
    than ``max_unjoined_fraction`` unjoined items aborts. Ground truth on
    the adversarial set follows the robustness rules: inter records keep
    the original label; outer records count as positives for both the
    original and the target class (or only the original under
    adv_truth="original").
    """
    if adv_truth not in (ADV_TRUTH_BOTH, ADV_TRUTH_ORIGINAL):
        raise EvaluationError(f"unknown adversarial truth mode: {adv_truth!r}")
    report = MetricsReport(classes=lexicon.classes)
    report.counts["original_items"] = len(original.item_ids)

    known = set(lexicon.classes)
    for label in original.true_labels:
        if label not in known:
            raise EvaluationError(f"unknown class in predictions: {label!r}")

    for ci, cls in enumerate(lexicon.classes):
        relevance = [1 if t == cls else 0 for t in original.true_labels]
        scores = [row[ci] for row in original.scores]
        ap = average_precision(scores, relevance, original.item_ids)
        auc = auroc(scores, relevance)
        if ap is None or auc is None:
            report.warnings.append(
                f"original set: class {cls} lacks positives or negatives; "
                "metric absent"
            )
        report.original_ap[cls] = ap
        report.original_auroc[cls] = auc
    report.original_map = _mean(list(report.original_ap.values()))
    report.original_mauroc = _mean(list(report.original_auroc.values()))

    if adversarial is None or not adversarial.item_ids:
        report.warnings.append("no adversarial predictions supplied")
        return report

    by_id = {r.adversarial_id: r for r in records}
    joined: list[tuple[PerturbationRecord, list[float]]] = []
    unjoined: list[str] = []
    for i, item in enumerate(adversarial.item_ids):
        record = by_id.get(item)
        if record is None:
            unjoined.append(item)
        else:
            joined.append((record, adversarial.scores[i]))
    report.counts["adversarial_items"] = len(adversarial.item_ids)
    report.counts["unjoined_items"] = len(unjoined)
    if unjoined:
        report.warnings.extend(
            f"adversarial item {item!r} has no perturbation record"
            for item in unjoined[:20]
        )
    if len(unjoined) > max_unjoined_fraction * len(adversarial.item_ids):
        raise EvaluationError(
            f"{len(unjoined)} of {len(adversarial.item_ids)} adversarial items "
            "failed to join perturbation records"
        )

    item_ids = [r.adversarial_id for r, _ in joined]
    for ci, cls in enumerate(lexicon.classes):
        relevance = []
        for record, _ in joined:
            expected = {record.original_class}
            if record.kind == KIND_OUTER and adv_truth == ADV_TRUTH_BOTH:
                expected.add(record.target_class)
            relevance.append(1 if cls in expected else 0)
        scores = [row[ci] for _, row in joined]
        ap = average_precision(scores, relevance, item_ids)
        auc = auroc(scores, relevance)
        if ap is None or auc is None:
            report.warnings.append(
                f"adversarial set: class {cls} lacks positives or negatives; "
                "metric absent"
            )
        report.adversarial_ap[cls] = ap
        report.adversarial_auroc[cls] = auc
    report.adversarial_map = _mean(list(report.adversarial_ap.values()))
    report.adversarial_mauroc = _mean(list(report.adversarial_auroc.values()))
    if report.original_map is not None and report.adversarial_map is not None:
        report.map_decrease = report.original_map - report.adversarial_map
    if report.original_mauroc is not None and report.adversarial_mauroc is not None:
        report.mauroc_decrease = report.original_mauroc - report.adversarial_mauroc

    verdicts = [
        (
            record.kind,
            robustness_verdict(
                record.kind, record.original_class, record.target_class,
                scores, lexicon.classes,
            ),
        )
        for record, scores in joined
    ]
    report.asr_inter, report.asr_outer, report.asr_all = attack_success_rate(verdicts)
    report.counts["inter_records"] = sum(1 for k, _ in verdicts if k == KIND_INTER)
    report.counts["outer_records"] = sum(1 for k, _ in verdicts if k == KIND_OUTER)
    return report


def format_table(report: MetricsReport) -> str:
    """Human-readable metrics tables."""
    def fmt(value: float | None) -> str:
        return "  -  " if value is None else f"{value:.3f}"

    lines: list[str] = []
    width = max(len(_display(c)) for c in report.classes) + 2
    lines.append("Per-class performance (AP / AUROC)")
    header = f"{'Class':<{width}}{'Orig AP':>9}{'Orig AUC':>10}"
    has_adv = bool(report.adversarial_ap)
    if has_adv:
        header += f"{'Adv AP':>9}{'Adv AUC':>10}"
    lines.append(header)
    for cls in report.classes:
        line = (
            f"{_display(cls):<{width}}"
            f"{fmt(report.original_ap.get(cls)):>9}"
            f"{fmt(report.original_auroc.get(cls)):>10}"
        )
        if has_adv:
            line += (
                f"{fmt(report.adversarial_ap.get(cls)):>9}"
                f"{fmt(report.adversarial_auroc.get(cls)):>10}"
            )
        lines.append(line)
    line = f"{'Mean':<{width}}{fmt(report.original_map):>9}{fmt(report.original_mauroc):>10}"
    if has_adv:
        line += f"{fmt(report.adversarial_map):>9}{fmt(report.adversarial_mauroc):>10}"
    lines.append(line)
    if report.map_decrease is not None:
        lines.append(
            f"{'Mean decrease':<{width}}{fmt(report.map_decrease):>9}"
            f"{fmt(report.mauroc_decrease):>10}"
        )
    if report.asr_all is not None:
        lines.append("")
        lines.append("Attack success rate")
        lines.append(
            f"  inter-class: {fmt(report.asr_inter)}   "
            f"outer-class: {fmt(report.asr_outer)}   "
            f"all: {fmt(report.asr_all)}"
        )
    if report.curve_aucs:
        lines.append("")
        lines.append("ASR curve AUCs")
        for name, value in sorted(report.curve_aucs.items()):
            lines.append(f"  {name}: {value:.3f}")
    return "\n".join(lines) + "\n"


def load_curve(path: str | Path) -> list[tuple[float, float]]:
    """Read a param,asr curve file (header optional)."""
    points: list[tuple[float, float]] = []
    with open(path, "r", encoding="utf-8", newline="") as handle:
        for row in csv.reader(handle):
            if not row or not row[0].strip():
                continue
            try:
                points.append((float(row[0]), float(row[1])))
            except ValueError:
                if not points:  # header row
                    continue
                raise EvaluationError(f"{path}: bad curve row {row!r}") from None
    return points
