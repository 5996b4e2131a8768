"""Report ingestion: section parsing, pairing manifests, quarantine.

Only the FINDINGS and IMPRESSION sections feed the analysis text; other
sections (HISTORY, COMPARISON, INDICATION, ...) are discarded. Reports
without a non-empty FINDINGS or IMPRESSION section are quarantined with
a reason instead of aborting the run.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CorpusError

ANALYSIS_SECTIONS = ("FINDINGS", "IMPRESSION")

# "FINDINGS:", "Impression :", bare "FINDINGS" — case-insensitive for the
# two analysis sections; any other line shaped like an ALL-CAPS heading
# with a colon closes the current section.
_HEADER_RE = re.compile(r"^\s*([A-Za-z][A-Za-z /&_-]{0,40}?)\s*:\s*(.*)$")
_BARE_RE = re.compile(r"^\s*(FINDINGS|IMPRESSION)\s*$", re.IGNORECASE)


@dataclass
class Report:
    report_id: str
    image_id: str | None
    raw_text: str
    sections: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ManifestEntry:
    report_id: str
    image_id: str | None
    source: str
    split: str = "none"
    labels: tuple[str, ...] = ()
    vector: str | None = None


@dataclass(frozen=True)
class QuarantineEntry:
    report_id: str
    reason: str
    source: str


def parse_sections(raw_text: str) -> dict[str, str]:
    """Extract the analysis sections from raw report text."""
    collected: dict[str, list[str]] = {}
    current: str | None = None
    for line in raw_text.splitlines():
        bare = _BARE_RE.match(line)
        if bare:
            current = bare.group(1).upper()
            collected.setdefault(current, [])
            continue
        header = _HEADER_RE.match(line)
        if header:
            name = header.group(1).strip()
            rest = header.group(2)
            if name.upper() in ANALYSIS_SECTIONS:
                current = name.upper()
                collected.setdefault(current, [])
                if rest.strip():
                    collected[current].append(rest)
                continue
            if name.isupper() and len(name) >= 2:
                current = None  # some other section starts here
                continue
        if current is not None:
            collected[current].append(line)
    return {
        name: "\n".join(lines).strip()
        for name, lines in collected.items()
        if "\n".join(lines).strip()
    }


def load_report(source: str | Path, report_id: str, image_id: str | None) -> Report:
    with open(source, "r", encoding="utf-8") as handle:
        raw = handle.read()
    return Report(report_id, image_id, raw, parse_sections(raw))


def section_text(report: Report) -> str:
    """FINDINGS then IMPRESSION (whichever exist), newline-joined."""
    parts = [report.sections[s] for s in ANALYSIS_SECTIONS if s in report.sections]
    if not parts:
        raise CorpusError(f"report {report.report_id}: no analysis sections")
    return "\n".join(parts)


def read_pairing(pairing_path: str | Path) -> list[tuple[str, str, str | None]]:
    """Parse the pairing manifest: rows of (file, report_id, image_id)."""
    rows: list[tuple[str, str, str | None]] = []
    with open(pairing_path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        required = {"file", "report_id"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise CorpusError(
                f"pairing file {pairing_path} needs columns: file, report_id[, image_id]"
            )
        for row in reader:
            image = (row.get("image_id") or "").strip() or None
            rows.append((row["file"].strip(), row["report_id"].strip(), image))
    return rows


def ingest(
    report_dir: str | Path, pairing_path: str | Path
) -> tuple[list[ManifestEntry], list[QuarantineEntry]]:
    """Build the corpus manifest from a report directory and pairing file.

    Unreadable files and reports lacking analysis sections are
    quarantined; a duplicate report_id aborts.
    """
    report_dir = Path(report_dir)
    pairs = read_pairing(pairing_path)
    seen: set[str] = set()
    for _, report_id, _ in pairs:
        if report_id in seen:
            raise CorpusError(f"duplicate report_id in pairing file: {report_id!r}")
        seen.add(report_id)

    entries: list[ManifestEntry] = []
    quarantined: list[QuarantineEntry] = []
    for file_name, report_id, image_id in pairs:
        source = str(report_dir / file_name)
        try:
            report = load_report(source, report_id, image_id)
        except OSError as exc:
            quarantined.append(
                QuarantineEntry(report_id, f"unreadable: {exc.strerror}", source)
            )
            continue
        if not any(report.sections.get(s) for s in ANALYSIS_SECTIONS):
            quarantined.append(
                QuarantineEntry(
                    report_id, "no non-empty FINDINGS or IMPRESSION section", source
                )
            )
            continue
        entries.append(ManifestEntry(report_id, image_id, source))
    entries.sort(key=lambda e: e.report_id)
    quarantined.sort(key=lambda q: q.report_id)
    return entries, quarantined
