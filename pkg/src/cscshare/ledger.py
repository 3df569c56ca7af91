"""Tamper-evident audit log for per-slot energy records and coefficients.

Each record carries the public identifier of its counting point, the slot
timestamp, a payload, and the hash of the previous record; the chain makes
any later modification of a stored record detectable. This is a single
process, single chain structure: no consensus, no replication, no payload
encryption.

Serialization is canonical (fixed field order, integers in decimal, no
whitespace) so that re-reading a ledger file reproduces the exact bytes
and hashes. Payloads are therefore restricted to JSON trees of strings,
integers, booleans and null; floats are rejected because their textual
form is not canonical across writers. Render decimals as strings.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Any, Iterable, Mapping, TextIO

from cscshare.model import parse_timestamp

GENESIS_HASH = "0" * 64

# Reserved counting-point key for repartition coefficient records.
KOR_COUNTING_POINT = "KOR"


def _check_payload(value: Any, path: str = "payload") -> None:
    if value is None or isinstance(value, (str, bool, int)):
        return
    if isinstance(value, dict):
        for key, item in value.items():
            if not isinstance(key, str):
                raise ValueError(f"{path}: non-string key {key!r}")
            _check_payload(item, f"{path}.{key}")
        return
    if isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            _check_payload(item, f"{path}[{i}]")
        return
    raise ValueError(
        f"{path}: {type(value).__name__} is not canonically serializable; "
        "use strings for decimals"
    )


def _canonical(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def _record_hash(
    counting_point_key: str, timestamp_iso: str, payload: Any, prev_hash: str
) -> str:
    material = _canonical([counting_point_key, timestamp_iso, payload, prev_hash])
    return hashlib.sha256(material.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class AuditRecord:
    counting_point_key: str
    timestamp: datetime
    payload: Mapping[str, Any]
    prev_hash: str
    hash: str

    def __post_init__(self):
        object.__setattr__(self, "payload", dict(self.payload))

    def timestamp_iso(self) -> str:
        return self.timestamp.isoformat()

    def to_line(self) -> str:
        """Canonical one-line serialization, including the record hash."""
        return _canonical(
            {
                "counting_point_key": self.counting_point_key,
                "timestamp": self.timestamp_iso(),
                "payload": self.payload,
                "prev_hash": self.prev_hash,
                "hash": self.hash,
            }
        )

    def recompute_hash(self) -> str:
        return _record_hash(
            self.counting_point_key, self.timestamp_iso(), self.payload, self.prev_hash
        )


@dataclass(frozen=True)
class ChainReport:
    intact: bool
    first_break: int | None = None
    message: str = "intact"


class Ledger:
    """Append-only hash chain. Single writer; snapshots are safe to share."""

    def __init__(self, records: Iterable[AuditRecord] = ()):
        self._records: list[AuditRecord] = list(records)
        self._last_ts: dict[str, datetime] = {}
        for r in self._records:
            self._last_ts[r.counting_point_key] = r.timestamp

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self):
        return iter(self._records)

    @property
    def records(self) -> tuple[AuditRecord, ...]:
        return tuple(self._records)

    @property
    def head_hash(self) -> str:
        return self._records[-1].hash if self._records else GENESIS_HASH

    def append(
        self,
        payload: Mapping[str, Any],
        counting_point_key: str,
        timestamp: datetime,
    ) -> AuditRecord:
        """Chain a new record to the head.

        Timestamps must not regress within one counting point; equal
        timestamps are allowed (several policies may log the same slot).
        """
        if timestamp.tzinfo is None or timestamp.utcoffset() is None:
            raise ValueError("record timestamp has no UTC offset")
        _check_payload(dict(payload))
        last = self._last_ts.get(counting_point_key)
        if last is not None and timestamp < last:
            raise ValueError(
                f"timestamp regression for {counting_point_key}: "
                f"{timestamp.isoformat()} < {last.isoformat()}"
            )
        prev_hash = self.head_hash
        record = AuditRecord(
            counting_point_key=counting_point_key,
            timestamp=timestamp,
            payload=dict(payload),
            prev_hash=prev_hash,
            hash=_record_hash(
                counting_point_key, timestamp.isoformat(), dict(payload), prev_hash
            ),
        )
        self._records.append(record)
        self._last_ts[counting_point_key] = timestamp
        return record


def verify_chain(ledger: Ledger | Iterable[AuditRecord]) -> ChainReport:
    """Recompute every hash and link; report the first break, if any.

    Truncating records off the tail is not detectable without an external
    anchor for the head hash; persist the head out of band if that matters.
    """
    records = list(ledger)
    prev_hash = GENESIS_HASH
    for i, record in enumerate(records):
        if record.prev_hash != prev_hash:
            return ChainReport(False, i, f"broken link at record {i}")
        if record.recompute_hash() != record.hash:
            return ChainReport(False, i, f"hash mismatch at record {i}")
        prev_hash = record.hash
    return ChainReport(True)


def write_ledger(ledger: Ledger | Iterable[AuditRecord], target: str | Path | TextIO) -> None:
    text = "".join(r.to_line() + "\n" for r in ledger)
    if isinstance(target, (str, Path)):
        Path(target).write_text(text, encoding="utf-8")
    else:
        target.write(text)


def read_ledger(source: str | Path | TextIO) -> Ledger:
    """Parse a ledger file. Chain integrity is checked by verify_chain,
    not here; reading a tampered file must succeed so it can be reported."""
    if isinstance(source, (str, Path)):
        lines = Path(source).read_text(encoding="utf-8").splitlines()
    else:
        lines = source.read().splitlines()
    records = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            timestamp = parse_timestamp(obj["timestamp"])
            # datetime parsing is more lenient than the canonical form
            # (e.g. any date/time separator); a record whose stored text
            # does not round-trip has been altered
            if timestamp.isoformat() != obj["timestamp"]:
                raise ValueError(f"non-canonical timestamp {obj['timestamp']!r}")
            record = AuditRecord(
                counting_point_key=obj["counting_point_key"],
                timestamp=timestamp,
                payload=obj["payload"],
                prev_hash=obj["prev_hash"],
                hash=obj["hash"],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"ledger line {lineno}: malformed record ({exc})") from None
        records.append(record)
    return Ledger(records)
