"""Line-delimited JSON record streams with a provenance header.

Every stage output starts with a header record carrying the tool
version, stage name, schema version, lexicon hash and seed, so a run
directory is self-describing and stages can refuse inputs produced
under a different lexicon.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from . import __version__
from .errors import RecordError

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Header:
    stage: str
    schema: int = SCHEMA_VERSION
    tool_version: str = __version__
    lexicon_hash: str | None = None
    seed: int | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def to_record(self) -> dict[str, Any]:
        record = {
            "_header": True,
            "stage": self.stage,
            "schema": self.schema,
            "tool_version": self.tool_version,
            "lexicon_hash": self.lexicon_hash,
            "seed": self.seed,
        }
        record.update(self.extra)
        return record


def _dumps(record: dict[str, Any]) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def write_records(
    path: str | Path,
    stage: str,
    records: Iterable[dict[str, Any]],
    *,
    lexicon_hash: str | None = None,
    seed: int | None = None,
    extra: dict[str, Any] | None = None,
) -> int:
    """Write a header plus records; returns the record count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = Header(stage, lexicon_hash=lexicon_hash, seed=seed, extra=extra or {})
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(_dumps(header.to_record()) + "\n")
        for record in records:
            handle.write(_dumps(record) + "\n")
            count += 1
    return count


def read_records(
    path: str | Path,
    *,
    expect_stage: str | None = None,
    expect_lexicon_hash: str | None = None,
) -> tuple[Header, list[dict[str, Any]]]:
    """Read a stage file, validating header, schema and lexicon hash."""
    path = Path(path)
    if not path.exists():
        raise RecordError(f"missing stage input: {path}")
    with open(path, "r", encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines or not lines[0].strip():
        raise RecordError(f"{path}: empty record file (no header)")
    try:
        raw = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise RecordError(f"{path}:1: bad header: {exc}") from exc
    if not isinstance(raw, dict) or not raw.get("_header"):
        raise RecordError(f"{path}: first record is not a header")
    if raw.get("schema") != SCHEMA_VERSION:
        raise RecordError(
            f"{path}: schema version {raw.get('schema')} != {SCHEMA_VERSION}"
        )
    if expect_stage is not None and raw.get("stage") != expect_stage:
        raise RecordError(
            f"{path}: produced by stage {raw.get('stage')!r}, expected {expect_stage!r}"
        )
    if (
        expect_lexicon_hash is not None
        and raw.get("lexicon_hash") is not None
        and raw["lexicon_hash"] != expect_lexicon_hash
    ):
        raise RecordError(
            f"{path}: lexicon hash {raw['lexicon_hash']} does not match the "
            f"loaded lexicon ({expect_lexicon_hash})"
        )
    header = Header(
        stage=raw.get("stage", ""),
        schema=raw["schema"],
        tool_version=raw.get("tool_version", ""),
        lexicon_hash=raw.get("lexicon_hash"),
        seed=raw.get("seed"),
        extra={
            k: v
            for k, v in raw.items()
            if k not in {"_header", "stage", "schema", "tool_version",
                         "lexicon_hash", "seed"}
        },
    )
    records: list[dict[str, Any]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise RecordError(f"{path}:{lineno}: bad record: {exc}") from exc
    return header, records
