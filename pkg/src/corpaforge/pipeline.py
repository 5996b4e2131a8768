"""Stage orchestration over a run directory of record streams.

Each stage reads the previous stage's records, writes its own stream
(plus a warnings sidecar under warnings/), and never mutates its inputs.
Stage outputs are fully determined by (inputs, lexicon, seed); worker
counts only affect wall time.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

from . import corpus, figures, metrics, textproc
from .errors import CorpaForgeError, RecordError
from .extraction import (
    ConceptMatcher,
    bits_to_string,
    extract_concept_vector,
    string_to_bits,
)
from .labelling import (
    DatasetRow,
    SplitSpec,
    canonicalize,
    expand_multilabel,
    labels_for,
    one_sided_selection,
    split_rows,
)
from .lexicon import BUILTIN, ConceptLexicon, load_lexicon
from .perturbation import (
    DEFAULT_SEED,
    PerturbationRecord,
    build_valid_index,
    derive_rng,
    perturb_all,
)
from .records import read_records, write_records
from .synthesis import (
    BankEntry,
    SentenceBank,
    build_bank,
    synthesize,
)

MANIFEST = "manifest.jsonl"
QUARANTINE = "quarantine.jsonl"
CLEANED = "cleaned.jsonl"
VECTORS = "vectors.jsonl"
LABELS = "labels.jsonl"
BALANCED = "balanced.jsonl"
SPLITS = "splits.jsonl"
BANK = "bank.jsonl"
PERTURBATIONS = "perturbations.jsonl"
ADVERSARIAL = "adversarial.jsonl"
PROMPTS = "prompts.jsonl"
METRICS_DIR = "metrics"


@dataclass
class RunConfig:
    out_dir: Path
    reports_dir: Path | None = None
    pairing: Path | None = None
    lexicon_path: str = BUILTIN
    seed: int = DEFAULT_SEED
    k_inter: int = 2
    k_outer: int = 2
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    majority: str | None = None  # default: the lexicon's summary class
    distance: str = "hamming"
    workers: int = 1
    emit_sentence_concepts: bool = True
    _lexicon: ConceptLexicon | None = field(default=None, repr=False)

    @property
    def lexicon(self) -> ConceptLexicon:
        if self._lexicon is None:
            self._lexicon = load_lexicon(self.lexicon_path)
        return self._lexicon

    def path(self, name: str) -> Path:
        return Path(self.out_dir) / name

    def warnings_path(self, stage: str) -> Path:
        return Path(self.out_dir) / "warnings" / f"{stage}.jsonl"


def _pmap(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _write_stage(
    cfg: RunConfig,
    name: str,
    stage: str,
    records: Iterable[dict[str, Any]],
    warnings: Sequence[dict[str, Any]] = (),
    extra: dict[str, Any] | None = None,
) -> int:
    count = write_records(
        cfg.path(name),
        stage,
        records,
        lexicon_hash=cfg.lexicon.content_hash(),
        seed=cfg.seed,
        extra=extra,
    )
    write_records(
        cfg.warnings_path(stage),
        f"{stage}-warnings",
        warnings,
        lexicon_hash=cfg.lexicon.content_hash(),
        seed=cfg.seed,
    )
    return count


def _read_stage(cfg: RunConfig, name: str, stage: str) -> list[dict[str, Any]]:
    _, records = read_records(
        cfg.path(name),
        expect_stage=stage,
        expect_lexicon_hash=cfg.lexicon.content_hash(),
    )
    return records


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------

def stage_ingest(cfg: RunConfig) -> dict[str, int]:
    if cfg.reports_dir is None or cfg.pairing is None:
        raise CorpaForgeError("ingest needs a reports directory and a pairing file")
    entries, quarantined = corpus.ingest(cfg.reports_dir, cfg.pairing)
    _write_stage(
        cfg,
        MANIFEST,
        "ingest",
        (
            {
                "report_id": e.report_id,
                "image_id": e.image_id,
                "split": e.split,
                "labels": list(e.labels),
                "vector": e.vector,
                "source": e.source,
            }
            for e in entries
        ),
        warnings=[
            {"report_id": q.report_id, "reason": q.reason, "source": q.source}
            for q in quarantined
        ],
        extra={"accepted": len(entries), "quarantined": len(quarantined)},
    )
    write_records(
        cfg.path(QUARANTINE),
        "quarantine",
        (
            {"report_id": q.report_id, "reason": q.reason, "source": q.source}
            for q in quarantined
        ),
        lexicon_hash=cfg.lexicon.content_hash(),
        seed=cfg.seed,
    )
    return {"accepted": len(entries), "quarantined": len(quarantined)}


def stage_clean(cfg: RunConfig) -> dict[str, int]:
    manifest = _read_stage(cfg, MANIFEST, "ingest")
    lexicon = cfg.lexicon

    def clean_one(entry: dict[str, Any]) -> list[dict[str, Any]]:
        report = corpus.load_report(
            entry["source"], entry["report_id"], entry["image_id"]
        )
        cleaned = textproc.clean_report(
            entry["report_id"], corpus.section_text(report), lexicon
        )
        out: list[dict[str, Any]] = [
            {
                "report_id": entry["report_id"],
                "index": s.origin_index,
                "words": list(s.words),
            }
            for s in cleaned.sentences
        ]
        out.extend(
            {
                "report_id": entry["report_id"],
                "index": r.origin_index,
                "removed_rule": r.rule,
                "text": r.text,
            }
            for r in cleaned.removed
        )
        return out

    per_report = _pmap(clean_one, manifest, cfg.workers)
    records = [record for group in per_report for record in group]
    kept = sum(1 for r in records if "words" in r)
    removed = len(records) - kept
    _write_stage(cfg, CLEANED, "clean", records,
                 extra={"kept": kept, "removed": removed})
    return {"reports": len(manifest), "kept": kept, "removed": removed}


def _cleaned_sentences(cfg: RunConfig) -> dict[str, list[tuple[int, tuple[str, ...]]]]:
    """report_id -> retained (origin index, words), in stream order."""
    sentences: dict[str, list[tuple[int, tuple[str, ...]]]] = {}
    for record in _read_stage(cfg, CLEANED, "clean"):
        sentences.setdefault(record["report_id"], [])
        if "words" in record:
            sentences[record["report_id"]].append(
                (record["index"], tuple(record["words"]))
            )
    return sentences


def stage_extract(cfg: RunConfig) -> dict[str, int]:
    lexicon = cfg.lexicon
    matcher = ConceptMatcher(lexicon)
    sentences = _cleaned_sentences(cfg)

    def extract_one(item: tuple[str, list[tuple[int, tuple[str, ...]]]]) -> list[dict]:
        report_id, sents = item
        cleaned = textproc.CleanedReport(
            report_id,
            [textproc.CleanedSentence(words, idx) for idx, words in sents],
        )
        vector = extract_concept_vector(cleaned, lexicon, matcher)
        out = [{"report_id": report_id, "vector": vector.to_bitstring()}]
        if cfg.emit_sentence_concepts:
            out.extend(
                {
                    "report_id": report_id,
                    "index": idx,
                    "concepts": sorted(
                        matcher.match_sentence(words), key=lexicon.concept_index
                    ),
                }
                for idx, words in sents
            )
        return out

    items = sorted(sentences.items())
    per_report = _pmap(extract_one, items, cfg.workers)
    records = [record for group in per_report for record in group]
    _write_stage(cfg, VECTORS, "extract", records,
                 extra={"reports": len(items)})
    return {"reports": len(items)}


def stage_label(cfg: RunConfig) -> dict[str, int]:
    lexicon = cfg.lexicon
    manifest = {e["report_id"]: e for e in _read_stage(cfg, MANIFEST, "ingest")}
    vectors = {
        r["report_id"]: string_to_bits(r["vector"])
        for r in _read_stage(cfg, VECTORS, "extract")
        if "vector" in r
    }
    records: list[dict[str, Any]] = []
    warnings: list[dict[str, Any]] = []
    for report_id in sorted(vectors):
        bits = canonicalize(vectors[report_id], lexicon)
        labels = labels_for(bits, lexicon)
        entry = manifest.get(report_id, {})
        if not labels:
            warnings.append(
                {"report_id": report_id, "reason": "zero concept vector; excluded"}
            )
            continue
        records.append(
            {
                "report_id": report_id,
                "image_id": entry.get("image_id"),
                "labels": labels,
                "vector": bits_to_string(bits),
                "source": entry.get("source"),
            }
        )
    _write_stage(cfg, LABELS, "label", records, warnings=warnings,
                 extra={"labelled": len(records), "excluded": len(warnings)})
    return {"labelled": len(records), "excluded": len(warnings)}


def _rows_from_records(records: Sequence[dict[str, Any]]) -> list[DatasetRow]:
    """Accept per-report (labels list) or per-row (label) record shapes."""
    rows: list[DatasetRow] = []
    per_report = [
        (r["report_id"], r["labels"], string_to_bits(r["vector"]), r.get("image_id"))
        for r in records
        if "labels" in r
    ]
    rows.extend(expand_multilabel(per_report))
    rows.extend(
        DatasetRow(
            r["report_id"], r["label"], string_to_bits(r["vector"]), r.get("image_id")
        )
        for r in records
        if "label" in r
    )
    return rows


def _row_record(row: DatasetRow, split: str | None = None) -> dict[str, Any]:
    record = {
        "report_id": row.report_id,
        "image_id": row.image_id,
        "label": row.label,
        "vector": bits_to_string(row.vector),
    }
    if split is not None:
        record["split"] = split
    return record


def stage_undersample(cfg: RunConfig) -> dict[str, int]:
    lexicon = cfg.lexicon
    rows = _rows_from_records(_read_stage(cfg, LABELS, "label"))
    majority = cfg.majority or lexicon.summary_class
    retained, removed = one_sided_selection(
        rows, majority, lexicon, seed=cfg.seed, distance=cfg.distance
    )
    _write_stage(
        cfg,
        BALANCED,
        "undersample",
        (_row_record(row) for row in retained),
        warnings=[
            {"report_id": r.report_id, "label": r.label, "reason": "undersampled"}
            for r in removed
        ],
        extra={"majority": majority, "retained": len(retained),
               "removed": len(removed)},
    )
    return {"rows": len(rows), "retained": len(retained), "removed": len(removed)}


def stage_split(cfg: RunConfig, input_name: str = BALANCED) -> dict[str, int]:
    lexicon = cfg.lexicon
    _, records = read_records(
        cfg.path(input_name),
        expect_lexicon_hash=lexicon.content_hash(),
    )
    rows = _rows_from_records(records)
    spec = SplitSpec(ratios=cfg.ratios, seed=cfg.seed)
    assignment, warnings = split_rows(rows, spec, lexicon)
    ordered = sorted(rows, key=lambda r: (r.report_id, lexicon.class_index(r.label)))
    counts = {name: 0 for name in ("train", "val", "test")}
    for row in ordered:
        counts[assignment[row.report_id]] += 1
    _write_stage(
        cfg,
        SPLITS,
        "split",
        (_row_record(row, assignment[row.report_id]) for row in ordered),
        warnings=[{"reason": w} for w in warnings],
        extra={"ratios": list(cfg.ratios), **counts},
    )
    return {"rows": len(rows), **counts}


def _split_rows_by_tag(cfg: RunConfig) -> dict[str, list[DatasetRow]]:
    by_tag: dict[str, list[DatasetRow]] = {"train": [], "val": [], "test": []}
    for record in _read_stage(cfg, SPLITS, "split"):
        row = DatasetRow(
            record["report_id"],
            record["label"],
            string_to_bits(record["vector"]),
            record.get("image_id"),
        )
        by_tag.setdefault(record["split"], []).append(row)
    return by_tag


def stage_bank(cfg: RunConfig) -> dict[str, int]:
    lexicon = cfg.lexicon
    matcher = ConceptMatcher(lexicon)
    by_tag = _split_rows_by_tag(cfg)
    test_reports = sorted({row.report_id for row in by_tag["test"]})
    sentences = _cleaned_sentences(cfg)
    inputs = [
        (
            report_id,
            [
                (words, matcher.match_sentence(words))
                for _, words in sentences.get(report_id, [])
            ],
        )
        for report_id in test_reports
    ]
    bank = build_bank(inputs, lexicon, derive_rng(cfg.seed, "bank"))
    records: list[dict[str, Any]] = []
    for concept in lexicon.concepts:
        for entry in bank.for_concept(concept.id):
            records.append(
                {
                    "concept": concept.id,
                    "words": list(entry.words),
                    "concepts": sorted(entry.concept_ids, key=lexicon.concept_index),
                    "source_report_id": entry.source_report_id,
                }
            )
    warnings = [
        {"concept": cid, "reason": "no qualifying sentences in the test split"}
        for cid in bank.gaps
    ]
    _write_stage(cfg, BANK, "bank", records, warnings=warnings,
                 extra={"entries": len(records), "gaps": len(bank.gaps)})
    return {"entries": len(records), "gaps": len(bank.gaps)}


def stage_perturb(cfg: RunConfig) -> dict[str, int]:
    lexicon = cfg.lexicon
    by_tag = _split_rows_by_tag(cfg)
    reference = by_tag["train"] + by_tag["val"]
    if not reference:
        raise CorpaForgeError("no train/val rows to build the valid-vector index")
    index = build_valid_index(reference, lexicon)
    test_rows = sorted(
        by_tag["test"], key=lambda r: (r.report_id, lexicon.class_index(r.label))
    )

    def perturb_row(row: DatasetRow):
        return perturb_all(
            row, index, lexicon,
            global_seed=cfg.seed, k_inter=cfg.k_inter, k_outer=cfg.k_outer,
        )

    results = _pmap(perturb_row, test_rows, cfg.workers)
    records: list[dict[str, Any]] = []
    warnings: list[dict[str, Any]] = []
    for (recs, warns) in results:
        for r in recs:
            records.append(
                {
                    "adversarial_id": r.adversarial_id,
                    "report_id": r.report_id,
                    "kind": r.kind,
                    "original_class": r.original_class,
                    "target_class": r.target_class,
                    "original_vector": bits_to_string(r.original_vector),
                    "perturbed_vector": bits_to_string(r.perturbed_vector),
                    "seed_lineage": r.seed_lineage,
                }
            )
        warnings.extend({"reason": w} for w in warns)
    _write_stage(
        cfg, PERTURBATIONS, "perturb", records, warnings=warnings,
        extra={"k_inter": cfg.k_inter, "k_outer": cfg.k_outer,
               "test_rows": len(test_rows), "records": len(records)},
    )
    return {"test_rows": len(test_rows), "records": len(records),
            "warnings": len(warnings)}


def _load_perturbation_records(cfg: RunConfig) -> list[PerturbationRecord]:
    return [
        record_from_mapping(r) for r in _read_stage(cfg, PERTURBATIONS, "perturb")
    ]


def record_from_mapping(raw: dict[str, Any]) -> PerturbationRecord:
    return PerturbationRecord(
        adversarial_id=raw["adversarial_id"],
        report_id=raw["report_id"],
        kind=raw["kind"],
        original_class=raw["original_class"],
        target_class=raw.get("target_class"),
        original_vector=string_to_bits(raw["original_vector"]),
        perturbed_vector=string_to_bits(raw["perturbed_vector"]),
        seed_lineage=raw.get("seed_lineage", {}),
    )


def _load_bank(cfg: RunConfig) -> SentenceBank:
    bank = SentenceBank()
    for record in _read_stage(cfg, BANK, "bank"):
        entry = BankEntry(
            tuple(record["words"]),
            frozenset(record["concepts"]),
            record["source_report_id"],
        )
        bank.entries.setdefault(record["concept"], []).append(entry)
    return bank


def stage_synthesize(cfg: RunConfig) -> dict[str, int]:
    lexicon = cfg.lexicon
    matcher = ConceptMatcher(lexicon)
    sentences = _cleaned_sentences(cfg)
    bank = _load_bank(cfg)
    records = _load_perturbation_records(cfg)

    def synthesize_one(record: PerturbationRecord):
        rng = derive_rng(cfg.seed, "synthesize", record.adversarial_id)
        originals = [words for _, words in sentences.get(record.report_id, [])]
        try:
            report = synthesize(record, originals, bank, lexicon, rng, matcher)
        except CorpaForgeError as exc:
            return None, {"adversarial_id": record.adversarial_id,
                          "reason": str(exc)}
        return report, None

    results = _pmap(synthesize_one, records, cfg.workers)
    out_records: list[dict[str, Any]] = []
    warnings: list[dict[str, Any]] = []
    record_by_id = {r.adversarial_id: r for r in records}
    for report, warning in results:
        if warning is not None:
            warnings.append(warning)
            continue
        source = record_by_id[report.adversarial_id]
        out_records.append(
            {
                "adversarial_id": report.adversarial_id,
                "report_id": report.report_id,
                "kind": report.kind,
                "original_class": report.original_class,
                "target_class": report.target_class,
                "target_vector": bits_to_string(source.perturbed_vector),
                "sentences": [list(words) for words in report.sentences],
                "edits": [
                    {"op": e.op, "index": e.index, "words": list(e.words)}
                    for e in report.edits
                ],
                "prompt": report.prompt_text,
            }
        )
    out_records.sort(key=lambda r: r["adversarial_id"])
    _write_stage(
        cfg, ADVERSARIAL, "synthesize", out_records, warnings=warnings,
        extra={"synthesized": len(out_records), "unsynthesizable": len(warnings)},
    )
    return {"synthesized": len(out_records), "unsynthesizable": len(warnings)}


def stage_prompts(cfg: RunConfig) -> dict[str, int]:
    records = _read_stage(cfg, ADVERSARIAL, "synthesize")
    prompts = [
        {
            "adversarial_id": r["adversarial_id"],
            "report_id": r["report_id"],
            "kind": r["kind"],
            "original_class": r["original_class"],
            "target_class": r["target_class"],
            "target_vector": r["target_vector"],
            "prompt": r["prompt"],
        }
        for r in records
    ]
    prompts.sort(key=lambda r: r["adversarial_id"])
    _write_stage(cfg, PROMPTS, "prompts", prompts,
                 extra={"prompts": len(prompts)})
    return {"prompts": len(prompts)}


RUN_ALL_STAGES: tuple[tuple[str, Callable[[RunConfig], dict]], ...] = (
    ("ingest", stage_ingest),
    ("clean", stage_clean),
    ("extract", stage_extract),
    ("label", stage_label),
    ("undersample", stage_undersample),
    ("split", stage_split),
    ("bank", stage_bank),
    ("perturb", stage_perturb),
    ("synthesize", stage_synthesize),
    ("prompts", stage_prompts),
)


def run_all(cfg: RunConfig) -> dict[str, dict[str, int]]:
    summary: dict[str, dict[str, int]] = {}
    for name, stage in RUN_ALL_STAGES:
        summary[name] = stage(cfg)
    return summary


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def run_evaluate(
    cfg: RunConfig,
    original_path: Path,
    adversarial_path: Path | None,
    records_path: Path | None = None,
    curves: dict[str, Path] | None = None,
    adv_truth: str = metrics.ADV_TRUTH_BOTH,
    render_figures: bool = True,
) -> metrics.MetricsReport:
    lexicon = cfg.lexicon
    original = metrics.load_predictions(original_path, lexicon)
    adversarial = (
        metrics.load_predictions(adversarial_path, lexicon)
        if adversarial_path is not None
        else None
    )
    records: list[PerturbationRecord] = []
    if adversarial is not None:
        path = records_path or cfg.path(PERTURBATIONS)
        _, raw = read_records(
            path, expect_stage="perturb",
            expect_lexicon_hash=lexicon.content_hash(),
        )
        records = [record_from_mapping(r) for r in raw]
    report = metrics.evaluate(original, adversarial, records, lexicon, adv_truth)

    curve_data: dict[str, tuple[list[tuple[float, float]], float]] = {}
    for name, path in (curves or {}).items():
        points = metrics.load_curve(path)
        auc = metrics.asr_curve_auc(points)
        report.curve_aucs[name] = auc
        curve_data[name] = (points, auc)

    out_dir = cfg.path(METRICS_DIR)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_records(
        out_dir / "metrics.jsonl",
        "evaluate",
        [report.to_mapping()],
        lexicon_hash=lexicon.content_hash(),
        seed=cfg.seed,
    )
    (out_dir / "metrics_table.txt").write_text(
        metrics.format_table(report), encoding="utf-8"
    )
    if render_figures:
        figures.render_metrics_figures(report, out_dir)
        if curve_data:
            figures.render_asr_curves(curve_data, out_dir / "asr_curves.png")
    return report
