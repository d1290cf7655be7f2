"""Event-sourced durability: a hash-chained, line-delimited event log plus
periodic state snapshots.

Log format: one canonical-JSON entry per UTF-8 line. Each entry carries the
SHA-256 of the previous entry's exact bytes (``prev_digest``), so any
corruption or reordering breaks the chain at a pinpointable sequence
number. The first entry chains from 64 zeros. Appends are fsync-durable
before the mutation is acknowledged (configurable down to flush/none for
bulk simulation).

Snapshots (``snapshot-<seq>.json``) record the full canonical state and its
digest at an entry boundary; they bound startup replay time and give replay
verification fixed points to cross-check.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

from .core import CloudError, ErrorCode, canonical_bytes, sha256_hex, state_digest

GENESIS_DIGEST = "0" * 64

LOG_FILENAME = "events.log"
SNAPSHOT_PREFIX = "snapshot-"


def replay_error(seq: int, message: str) -> CloudError:
    return CloudError(ErrorCode.REPLAY_ERROR, f"seq {seq}: {message}")


@dataclass(frozen=True)
class EventLogEntry:
    seq: int
    tick: int
    op: str
    payload: dict
    prev_digest: str

    def to_canonical(self) -> dict:
        return {
            "op": self.op,
            "payload": self.payload,
            "prev_digest": self.prev_digest,
            "seq": self.seq,
            "tick": self.tick,
        }

    def encode(self) -> bytes:
        return canonical_bytes(self.to_canonical())

    @classmethod
    def from_dict(cls, raw: dict) -> "EventLogEntry":
        return cls(
            seq=raw["seq"],
            tick=raw["tick"],
            op=raw["op"],
            payload=raw["payload"],
            prev_digest=raw["prev_digest"],
        )


def decode_line(line: bytes, expected_seq: int) -> EventLogEntry:
    try:
        raw = json.loads(line.decode("utf-8"))
        entry = EventLogEntry.from_dict(raw)
    except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
        raise replay_error(expected_seq, f"undecodable entry: {exc}") from exc
    return entry


@dataclass
class TailReport:
    """What reading a log found beyond the verified entries."""

    torn_line: bool = False
    dropped_bytes: int = 0


def read_log(path: str | Path, recover: bool = False) -> tuple[list[EventLogEntry], TailReport]:
    """Read and chain-verify a log.

    Corruption raises REPLAY_ERROR naming the offending seq. A torn final
    line (crash mid-append) raises in strict mode; with ``recover=True`` it
    is dropped and reported, which is the startup-recovery behavior.
    """
    path = Path(path)
    report = TailReport()
    if not path.exists():
        return [], report
    data = path.read_bytes()
    entries: list[EventLogEntry] = []
    prev_digest = GENESIS_DIGEST
    lines = data.split(b"\n")
    torn = lines[-1] if lines and lines[-1] != b"" else None
    body = lines[:-1]
    for line in body:
        seq = len(entries) + 1
        entry = decode_line(line, seq)
        if entry.seq != seq:
            raise replay_error(seq, f"sequence gap: entry claims seq {entry.seq}")
        if entry.prev_digest != prev_digest:
            # The previous entry's bytes no longer match what this entry
            # chained to; report the earlier seq as the offender.
            raise replay_error(max(seq - 1, 1), "hash chain broken")
        if entry.encode() != line:
            raise replay_error(seq, "entry bytes are not canonical")
        entries.append(entry)
        prev_digest = sha256_hex(line)
    if torn is not None:
        if not recover:
            raise replay_error(len(entries) + 1, "truncated mid-entry (torn final line)")
        report.torn_line = True
        report.dropped_bytes = len(torn)
    return entries, report


class EventLog:
    """Single-appender log. ``path=None`` keeps entries in memory (tests)."""

    def __init__(
        self,
        path: str | Path | None,
        durability: str = "fsync",
        last_seq: int = 0,
        head_digest: str = GENESIS_DIGEST,
    ):
        self.path = Path(path) if path is not None else None
        self.durability = durability
        self.last_seq = last_seq
        self.head_digest = head_digest
        self.entries: list[EventLogEntry] | None = [] if self.path is None else None
        self._fh = None
        if self.path is not None:
            self._fh = open(self.path, "ab")

    @classmethod
    def open_existing(cls, path: str | Path, durability: str = "fsync") -> tuple["EventLog", list[EventLogEntry], TailReport]:
        """Open for append after crash recovery, returning prior entries."""
        entries, report = read_log(path, recover=True)
        if report.torn_line:
            # Drop the torn tail so the chain continues from a whole entry.
            keep = b"".join(e.encode() + b"\n" for e in entries)
            Path(path).write_bytes(keep)
        head = sha256_hex(entries[-1].encode()) if entries else GENESIS_DIGEST
        log = cls(path, durability, last_seq=len(entries), head_digest=head)
        return log, entries, report

    def make_entry(self, op: str, tick: int, payload: dict) -> EventLogEntry:
        return EventLogEntry(
            seq=self.last_seq + 1,
            tick=tick,
            op=op,
            payload=payload,
            prev_digest=self.head_digest,
        )

    def append_entry(self, entry: EventLogEntry) -> None:
        """Validate chain position and make the entry durable."""
        if entry.seq != self.last_seq + 1:
            raise replay_error(
                entry.seq, f"expected seq {self.last_seq + 1}, refusing to append"
            )
        if entry.prev_digest != self.head_digest:
            raise replay_error(entry.seq, "prev_digest does not match log head")
        line = entry.encode()
        if self._fh is not None:
            self._fh.write(line + b"\n")
            if self.durability != "none":
                self._fh.flush()
            if self.durability == "fsync":
                os.fsync(self._fh.fileno())
        else:
            self.entries.append(entry)
        self.last_seq = entry.seq
        self.head_digest = sha256_hex(line)

    def append(self, op: str, tick: int, payload: dict) -> EventLogEntry:
        entry = self.make_entry(op, tick, payload)
        self.append_entry(entry)
        return entry

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


class SnapshotStore:
    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, seq: int) -> Path:
        return self.directory / f"{SNAPSHOT_PREFIX}{seq}.json"

    def write(self, seq: int, state: dict) -> str:
        digest = state_digest(state)
        doc = {"seq": seq, "state": state, "state_digest": digest}
        tmp = self._path(seq).with_suffix(".tmp")
        tmp.write_bytes(canonical_bytes(doc))
        os.replace(tmp, self._path(seq))
        return digest

    def seqs(self) -> list[int]:
        out = []
        for p in self.directory.glob(f"{SNAPSHOT_PREFIX}*.json"):
            try:
                out.append(int(p.stem[len(SNAPSHOT_PREFIX):]))
            except ValueError:
                continue
        return sorted(out)

    def load(self, seq: int) -> dict:
        doc = json.loads(self._path(seq).read_text("utf-8"))
        recomputed = state_digest(doc["state"])
        if recomputed != doc["state_digest"]:
            raise replay_error(seq, "snapshot digest does not match snapshot state")
        return doc

    def latest(self, max_seq: int | None = None) -> dict | None:
        seqs = [s for s in self.seqs() if max_seq is None or s <= max_seq]
        if not seqs:
            return None
        return self.load(seqs[-1])
