"""Append-only event log: one JSON line per event, checksummed and gapless.

The log is the system of record. Every record carries a sha256 checksum over
its canonical content; reading verifies checksums, the gapless 1-based
sequence, and per-kind payload schemas, so corruption or tampering surfaces
as CORRUPT_LOG instead of silently wrong state.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Union

from ..errors import EngineError
from ..model import canonical_json, sha256_hex

# Payload schema per event kind: these fields must be present (values may be null).
EVENT_SCHEMAS: dict[str, frozenset[str]] = {
    "EnvironmentRegistered": frozenset({"environment"}),
    "GroupCreated": frozenset({"group"}),
    "ProtocolRegistered": frozenset({"protocol", "scope"}),
    "VersionDerived": frozenset({"version", "parent_version", "patch", "group_id", "negotiation_ref"}),
    "ProcessInstantiated": frozenset({"process_id", "protocol_version", "group_id", "start_state"}),
    "TransitionTriggered": frozenset(
        {"process_id", "transition_id", "actor", "from_state", "to_state", "action_result"}
    ),
    "ActionFailed": frozenset({"process_id", "transition_id", "actor", "state", "error"}),
    "GroupSplit": frozenset({"process_id", "partition", "child_process_ids", "child_group_ids"}),
    "GroupsMerged": frozenset({"process_ids", "process_id", "group_id"}),
    "NegotiationOpened": frozenset(
        {"session_id", "process_id", "group_id", "base_version", "participants", "rule", "opened_by", "proposal"}
    ),
    "ProposalMade": frozenset({"session_id", "proposal"}),
    "VoteCast": frozenset({"session_id", "proposal_id", "voter", "value"}),
    "NegotiationClosed": frozenset({"session_id", "ruling", "result_version"}),
    "HistoryRecorded": frozenset({"session_id", "record"}),
    "Propagated": frozenset({"report"}),
    "ProcessMigrated": frozenset({"process_id", "from_version", "to_version"}),
}


@dataclass(frozen=True)
class EventRecord:
    global_seq: int
    kind: str
    timestamp: str
    payload: dict
    checksum: str

    def to_doc(self) -> dict:
        return {
            "global_seq": self.global_seq,
            "kind": self.kind,
            "timestamp": self.timestamp,
            "payload": self.payload,
            "checksum": self.checksum,
        }


def _checksum(global_seq: int, kind: str, timestamp: str, payload: dict) -> str:
    return sha256_hex(
        canonical_json({"global_seq": global_seq, "kind": kind, "timestamp": timestamp, "payload": payload})
    )


def make_record(global_seq: int, kind: str, timestamp: str, payload: dict) -> EventRecord:
    if kind not in EVENT_SCHEMAS:
        raise EngineError("CORRUPT_LOG", f"unknown event kind {kind!r}")
    missing = EVENT_SCHEMAS[kind] - set(payload)
    if missing:
        raise EngineError("CORRUPT_LOG", f"{kind} payload missing fields: {sorted(missing)}")
    return EventRecord(
        global_seq=global_seq,
        kind=kind,
        timestamp=timestamp,
        payload=payload,
        checksum=_checksum(global_seq, kind, timestamp, payload),
    )


def verify_record(record: EventRecord, expected_seq: int) -> None:
    if record.global_seq != expected_seq:
        raise EngineError(
            "CORRUPT_LOG", f"sequence gap: expected event {expected_seq}, found {record.global_seq}"
        )
    if record.kind not in EVENT_SCHEMAS:
        raise EngineError("CORRUPT_LOG", f"unknown event kind {record.kind!r} at seq {record.global_seq}")
    missing = EVENT_SCHEMAS[record.kind] - set(record.payload)
    if missing:
        raise EngineError(
            "CORRUPT_LOG", f"{record.kind} at seq {record.global_seq} missing fields: {sorted(missing)}"
        )
    if record.checksum != _checksum(record.global_seq, record.kind, record.timestamp, record.payload):
        raise EngineError("CORRUPT_LOG", f"checksum mismatch at seq {record.global_seq}")


class EventLog:
    """File-backed (or in-memory) append-only record store.

    Appends are flushed and fsynced before returning so a committed event
    survives a crash; state changes are applied only after the append returns.
    """

    def __init__(self, path: Optional[Union[str, Path]] = None):
        self.path = Path(path) if path is not None else None
        self.records: list[EventRecord] = []
        if self.path is not None and self.path.exists():
            self.records = list(read_log(self.path))

    @property
    def next_seq(self) -> int:
        return len(self.records) + 1

    def append(self, kind: str, timestamp: str, payload: dict) -> EventRecord:
        record = make_record(self.next_seq, kind, timestamp, payload)
        if self.path is not None:
            try:
                line = canonical_json(record.to_doc()) + "\n"
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(line)
                    fh.flush()
                    os.fsync(fh.fileno())
            except OSError as exc:
                raise EngineError("STORAGE_FAILURE", f"cannot append to event log: {exc}") from exc
        self.records.append(record)
        return record

    def since(self, seq: int) -> list[EventRecord]:
        """Records with global_seq greater than ``seq``."""
        return self.records[max(seq, 0):]


def read_log(path: Union[str, Path]) -> Iterator[EventRecord]:
    """Parse and verify a log file; any defect raises CORRUPT_LOG."""
    expected = 1
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise EngineError("STORAGE_FAILURE", f"cannot read event log: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise EngineError("CORRUPT_LOG", f"line {lineno} is not valid JSON: {exc}") from exc
        try:
            record = EventRecord(
                global_seq=doc["global_seq"],
                kind=doc["kind"],
                timestamp=doc["timestamp"],
                payload=doc["payload"],
                checksum=doc["checksum"],
            )
        except KeyError as exc:
            raise EngineError("CORRUPT_LOG", f"line {lineno} missing field {exc}") from exc
        verify_record(record, expected)
        expected += 1
        yield record
