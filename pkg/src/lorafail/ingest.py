"""Transmission records: CSV parsing, cleaning, clock correction, latency and storage.

The store is an append-only JSON-lines file, one record per line, guarded by
an advisory ``<store>.lock`` file for writers.  Readers never lock.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Sequence

from filelock import FileLock

from .errors import InvalidDirection, MalformedRow, StoreIo

log = logging.getLogger(__name__)

UPLINK = "uplink"
DOWNLINK = "downlink"
DIRECTIONS = (UPLINK, DOWNLINK)

CSV_COLUMNS = (
    "device_id",
    "direction",
    "device_timestamp",
    "server_timestamp",
    "payload_size_bytes",
    "failure_label",
)

_MS = timedelta(milliseconds=1)


@dataclass(frozen=True)
class TransmissionRecord:
    device_id: str
    direction: str
    device_timestamp: datetime | None
    server_timestamp: datetime | None
    payload_size_bytes: int = 0
    failure_label: int | None = None  # None means "unknown"

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")
        for name in ("device_timestamp", "server_timestamp"):
            ts = getattr(self, name)
            if ts is not None:
                object.__setattr__(self, name, _to_ms_utc(ts))

    @property
    def sender_timestamp(self) -> datetime | None:
        return self.device_timestamp if self.direction == UPLINK else self.server_timestamp

    @property
    def receiver_timestamp(self) -> datetime | None:
        return self.server_timestamp if self.direction == UPLINK else self.device_timestamp


@dataclass(frozen=True)
class LatencySample:
    record_ref: int
    latency_seconds: float
    direction: str


def _to_ms_utc(ts: datetime) -> datetime:
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    ts = ts.astimezone(timezone.utc)
    return ts.replace(microsecond=ts.microsecond - ts.microsecond % 1000)


def parse_timestamp(text: str) -> datetime:
    """ISO 8601 instant; naive values are taken as UTC.  Truncated to milliseconds."""
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    return _to_ms_utc(datetime.fromisoformat(text))


def format_timestamp(ts: datetime | None) -> str:
    if ts is None:
        return ""
    ts = _to_ms_utc(ts)
    return ts.strftime("%Y-%m-%dT%H:%M:%S.") + f"{ts.microsecond // 1000:03d}Z"


def _format_label(label: int | None) -> str:
    return "unknown" if label is None else str(label)


def _parse_label(text: str) -> int | None:
    text = text.strip()
    if text in ("", "unknown"):
        return None
    if text in ("0", "1"):
        return int(text)
    raise ValueError(f"failure_label must be 0, 1 or unknown, got {text!r}")


def parse_csv(text: str | bytes) -> list[TransmissionRecord]:
    """Parse the exchange CSV format.

    An empty timestamp cell is accepted as a missing value (``clean`` drops
    it later); a non-empty one that does not parse is a ``MalformedRow``.
    Columns not in ``CSV_COLUMNS`` are ignored.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedRow(1, "missing header row") from None
    header = [h.strip() for h in header]
    missing = [c for c in CSV_COLUMNS if c not in header and c not in ("payload_size_bytes", "failure_label")]
    if missing:
        raise MalformedRow(1, f"header lacks required columns {missing}")
    index = {name: header.index(name) for name in CSV_COLUMNS if name in header}

    records = []
    for row in reader:
        line_no = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise MalformedRow(line_no, f"expected {len(header)} fields, got {len(row)}")

        def cell(name, default=""):
            return row[index[name]].strip() if name in index else default

        direction = cell("direction")
        if direction not in DIRECTIONS:
            raise InvalidDirection(line_no, f"direction {direction!r} is not uplink or downlink")
        try:
            device_ts = parse_timestamp(cell("device_timestamp")) if cell("device_timestamp") else None
            server_ts = parse_timestamp(cell("server_timestamp")) if cell("server_timestamp") else None
        except ValueError as exc:
            raise MalformedRow(line_no, f"unparseable timestamp ({exc})") from None
        try:
            payload = int(cell("payload_size_bytes", "0") or "0")
            if payload < 0:
                raise ValueError("payload_size_bytes is negative")
            label = _parse_label(cell("failure_label", "unknown"))
        except ValueError as exc:
            raise MalformedRow(line_no, str(exc)) from None
        records.append(TransmissionRecord(cell("device_id"), direction, device_ts, server_ts, payload, label))
    return records


def to_csv(records: Iterable[TransmissionRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        writer.writerow([
            r.device_id,
            r.direction,
            format_timestamp(r.device_timestamp),
            format_timestamp(r.server_timestamp),
            r.payload_size_bytes,
            _format_label(r.failure_label),
        ])
    return buf.getvalue()


def latency_seconds(record: TransmissionRecord) -> float:
    """Receiver timestamp minus sender timestamp, in seconds."""
    ms = (record.receiver_timestamp - record.sender_timestamp) // _MS
    return ms / 1000.0


@dataclass(frozen=True)
class DroppedRecord:
    index: int
    record: TransmissionRecord
    reason: str


def clean(records: Sequence[TransmissionRecord]) -> tuple[list[TransmissionRecord], list[DroppedRecord]]:
    """Partition records into kept and dropped, preserving input order.

    Drops missing timestamps, negative latency, and repeats of the key
    ``(device_id, direction, device_timestamp)`` after the first occurrence.
    Apply any clock offset before calling this.
    """
    kept, dropped = [], []
    seen = set()
    for i, r in enumerate(records):
        if r.device_timestamp is None or r.server_timestamp is None:
            dropped.append(DroppedRecord(i, r, "missing timestamp"))
            continue
        if latency_seconds(r) < 0:
            dropped.append(DroppedRecord(i, r, "negative latency"))
            continue
        key = (r.device_id, r.direction, r.device_timestamp)
        if key in seen:
            dropped.append(DroppedRecord(i, r, "duplicate"))
            continue
        seen.add(key)
        kept.append(r)
    return kept, dropped


def apply_clock_offset(records: Iterable[TransmissionRecord], offset: float) -> list[TransmissionRecord]:
    """Shift every device timestamp by ``offset`` seconds (millisecond resolution)."""
    if offset != offset or offset in (float("inf"), float("-inf")):
        raise ValueError("clock offset must be finite")
    shift = timedelta(milliseconds=round(offset * 1000))
    out = []
    for r in records:
        if r.device_timestamp is None or not shift:
            out.append(r)
        else:
            out.append(replace(r, device_timestamp=r.device_timestamp + shift))
    return out


def compute_latencies(records: Sequence[TransmissionRecord]) -> list[LatencySample]:
    return [LatencySample(i, latency_seconds(r), r.direction) for i, r in enumerate(records)]


# --- JSON-lines store ------------------------------------------------------

def _record_to_doc(r: TransmissionRecord) -> dict:
    return {
        "device_id": r.device_id,
        "direction": r.direction,
        "device_timestamp": format_timestamp(r.device_timestamp) or None,
        "server_timestamp": format_timestamp(r.server_timestamp) or None,
        "payload_size_bytes": r.payload_size_bytes,
        "failure_label": _format_label(r.failure_label),
    }


def _doc_to_record(doc: dict) -> TransmissionRecord:
    def ts(name):
        value = doc.get(name)
        return parse_timestamp(value) if value else None

    payload = doc.get("payload_size_bytes", 0)
    if not isinstance(payload, int) or payload < 0:
        raise ValueError("payload_size_bytes must be a non-negative integer")
    return TransmissionRecord(
        device_id=str(doc["device_id"]),
        direction=doc["direction"],
        device_timestamp=ts("device_timestamp"),
        server_timestamp=ts("server_timestamp"),
        payload_size_bytes=payload,
        failure_label=_parse_label(str(doc.get("failure_label", "unknown"))),
    )


def _lock_for(store_path: Path) -> FileLock:
    return FileLock(str(store_path) + ".lock")


def store_append(store_path: str | Path, records: Iterable[TransmissionRecord]) -> int:
    store_path = Path(store_path)
    lines = [json.dumps(_record_to_doc(r), separators=(",", ":")) + "\n" for r in records]
    try:
        store_path.parent.mkdir(parents=True, exist_ok=True)
        with _lock_for(store_path):
            with store_path.open("a", encoding="utf-8", newline="\n") as fh:
                fh.writelines(lines)
    except OSError as exc:
        raise StoreIo(f"cannot append to {store_path}: {exc}") from exc
    return len(lines)


def store_read(store_path: str | Path) -> tuple[list[TransmissionRecord], list[StoreIo]]:
    """All readable records plus one ``StoreIo`` per corrupt line."""
    store_path = Path(store_path)
    try:
        fh = store_path.open("r", encoding="utf-8")
    except OSError as exc:
        raise StoreIo(f"cannot read {store_path}: {exc}") from exc
    records, errors = [], []
    with fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                if not isinstance(doc, dict):
                    raise ValueError("line is not a JSON object")
                records.append(_doc_to_record(doc))
            except (ValueError, KeyError, TypeError) as exc:
                errors.append(StoreIo(f"corrupt store line: {exc}", line_no))
    return records, errors


def store_export_csv(
    store_path: str | Path,
    direction: str | None = None,
    device_id: str | None = None,
    start: datetime | None = None,
    end: datetime | None = None,
) -> str:
    """Export stored records as CSV, optionally filtered.

    The time range applies to the server timestamp, ``start <= ts < end``.
    Corrupt lines are logged and skipped.
    """
    records, errors = store_read(store_path)
    for err in errors:
        log.warning("%s", err)
    start = _to_ms_utc(start) if start is not None else None
    end = _to_ms_utc(end) if end is not None else None

    def keep(r: TransmissionRecord) -> bool:
        if direction is not None and r.direction != direction:
            return False
        if device_id is not None and r.device_id != device_id:
            return False
        if start is not None or end is not None:
            ts = r.server_timestamp
            if ts is None:
                return False
            if start is not None and ts < start:
                return False
            if end is not None and ts >= end:
                return False
        return True

    return to_csv(r for r in records if keep(r))
