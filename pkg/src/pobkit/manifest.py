"""Benchmark records and their JSONL manifest format.

A manifest is a UTF-8 JSONL file, one record per line, with a JSON
sidecar (``<manifest>.meta.json`` next to it, extension replaced) that
carries the generation configuration, input checksums, and report.
Writing then reading a manifest is an exact round trip.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Iterable

from pobkit.phonemes import TokenSeq, tokens
from pobkit.util import atomic_write_text, dump_json

FORMAT_VERSION = 1

_FIELDS = (
    "id",
    "anchor_text",
    "query_text",
    "anchor_phonemes",
    "query_phonemes",
    "first_diff_index",
    "label",
    "source",
    "audio_path",
)


class ManifestError(ValueError):
    """Malformed manifest content; carries the offending line when known."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


@dataclass(frozen=True)
class PairRecord:
    """One (anchor text, query audio text, label) benchmark row.

    ``audio_path`` is reserved for an external synthesis step and stays
    None at generation time.
    """

    id: str
    anchor_text: str
    query_text: str
    anchor_phonemes: tuple[str, ...]
    query_phonemes: tuple[str, ...]
    first_diff_index: int
    label: bool
    source: str
    audio_path: str | None = None

    def validate(self) -> None:
        if not self.id:
            raise ManifestError("record id is empty")
        if not self.anchor_text or not self.query_text:
            raise ManifestError(f"record {self.id}: empty anchor or query text")
        for name in ("anchor_phonemes", "query_phonemes"):
            seq = getattr(self, name)
            if not all(isinstance(s, str) and s for s in seq):
                raise ManifestError(f"record {self.id}: bad {name}")
        if self.first_diff_index < 0:
            raise ManifestError(f"record {self.id}: negative first_diff_index")
        if not self.source:
            raise ManifestError(f"record {self.id}: empty source")
        if self.label != (self.anchor_text == self.query_text):
            raise ManifestError(
                f"record {self.id}: label inconsistent with text equality"
            )


def sidecar_path(manifest_path: str | Path) -> Path:
    return Path(manifest_path).with_suffix(".meta.json")


def _record_to_json(rec: PairRecord) -> str:
    obj = asdict(rec)
    obj["anchor_phonemes"] = list(rec.anchor_phonemes)
    obj["query_phonemes"] = list(rec.query_phonemes)
    return json.dumps(obj)


def _record_from_obj(obj: dict, lineno: int) -> PairRecord:
    missing = [f for f in _FIELDS if f not in obj]
    if missing:
        raise ManifestError(f"missing field(s) {', '.join(missing)}", lineno)
    if not isinstance(obj["label"], bool):
        raise ManifestError("label must be a JSON boolean", lineno)
    if not (obj["audio_path"] is None or isinstance(obj["audio_path"], str)):
        raise ManifestError("audio_path must be a string or null", lineno)
    try:
        rec = PairRecord(
            id=str(obj["id"]),
            anchor_text=str(obj["anchor_text"]),
            query_text=str(obj["query_text"]),
            anchor_phonemes=tuple(obj["anchor_phonemes"]),
            query_phonemes=tuple(obj["query_phonemes"]),
            first_diff_index=int(obj["first_diff_index"]),
            label=obj["label"],
            source=str(obj["source"]),
            audio_path=obj["audio_path"],
        )
    except (TypeError, ValueError) as exc:
        raise ManifestError(str(exc), lineno) from exc
    try:
        rec.validate()
    except ManifestError as exc:
        raise ManifestError(str(exc), lineno) from None
    return rec


def write_manifest(
    records: Iterable[PairRecord], meta: dict, path: str | Path
) -> Path:
    """Write records as JSONL plus the metadata sidecar; returns the sidecar path.

    Records are validated first, so a failure never leaves partial output.
    """
    records = list(records)
    for rec in records:
        rec.validate()
    meta = {"format_version": FORMAT_VERSION, **meta}
    atomic_write_text(path, "".join(_record_to_json(r) + "\n" for r in records))
    side = sidecar_path(path)
    atomic_write_text(side, dump_json(meta))
    return side


def read_manifest(path: str | Path) -> tuple[list[PairRecord], dict | None]:
    """Inverse of write_manifest.

    Returns (records, meta); meta is None when no sidecar file exists.
    """
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"invalid JSON: {exc}", lineno) from exc
            records.append(_record_from_obj(obj, lineno))
    side = sidecar_path(path)
    meta = None
    if side.exists():
        meta = json.loads(side.read_text(encoding="utf-8"))
        version = meta.get("format_version")
        if version != FORMAT_VERSION:
            raise ManifestError(f"unknown format_version {version!r}")
    return records, meta


def read_phrase_rows(path: str | Path) -> list[tuple[TokenSeq, TokenSeq, bool]]:
    """Read (anchor_tokens, query_tokens, label) rows from CSV or JSONL.

    CSV needs a header with anchor/query/label columns (``anchor_text``
    and ``query_text`` are accepted as aliases).  JSONL expects the same
    keys per line.  Labels may be booleans or 0/1/true/false strings.
    """
    path = Path(path)
    rows = []
    if path.suffix.lower() == ".csv":
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            for lineno, row in enumerate(reader, start=2):
                rows.append(_phrase_row(row, lineno))
    else:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ManifestError(f"invalid JSON: {exc}", lineno) from exc
                rows.append(_phrase_row(obj, lineno))
    return rows


def _phrase_row(obj: dict, lineno: int) -> tuple[TokenSeq, TokenSeq, bool]:
    def pick(*names):
        for n in names:
            if obj.get(n) is not None:
                return obj[n]
        raise ManifestError(f"missing column {names[0]!r}", lineno)

    anchor = str(pick("anchor", "anchor_text"))
    query = str(pick("query", "query_text"))
    raw = pick("label")
    if isinstance(raw, bool):
        label = raw
    elif str(raw).strip().lower() in ("1", "true"):
        label = True
    elif str(raw).strip().lower() in ("0", "false"):
        label = False
    else:
        raise ManifestError(f"unparseable label {raw!r}", lineno)
    return tokens(anchor), tokens(query), label
