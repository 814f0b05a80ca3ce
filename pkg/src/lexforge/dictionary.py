"""Persistent NSW dictionary: lookup, dynamic insertion, import/export.

Storage is a UTF-8 line-delimited record file, one JSON object per line.
The file is an append log: re-inserting a key appends a new record and the
last record for a key wins on load, so `version` (the mutation count)
survives save/load round-trips.
"""
from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone

VALID_SOURCES = ("seed", "llm")
_FIELDS = ("nsw", "standard_forms", "definition", "examples", "source", "created_at")


class DictionaryError(Exception):
    """Base class for dictionary failures."""


class EntryValidationError(DictionaryError):
    """An entry violates the DictEntry invariants."""


class DictionaryFormatError(DictionaryError):
    """A dictionary file could not be parsed; message names the bad record."""


@dataclass(frozen=True)
class DictEntry:
    """One NSW with its standard forms, definition, examples, and provenance."""

    nsw: str
    standard_forms: tuple[str, ...]
    definition: str = ""
    examples: tuple[str, ...] = ()
    source: str = "seed"
    created_at: datetime = field(
        default_factory=lambda: datetime.now(timezone.utc).replace(microsecond=0)
    )

    def __post_init__(self):
        object.__setattr__(self, "standard_forms", tuple(self.standard_forms))
        object.__setattr__(self, "examples", tuple(self.examples))
        self.validate()

    def validate(self):
        if not self.nsw or self.nsw != self.nsw.lower() or any(
            c.isspace() for c in self.nsw
        ):
            raise EntryValidationError(
                f"nsw key must be non-empty, lowercase, whitespace-free: {self.nsw!r}"
            )
        if not self.standard_forms:
            raise EntryValidationError(f"entry {self.nsw!r} has no standard forms")
        if any(form == self.nsw for form in self.standard_forms):
            raise EntryValidationError(
                f"entry {self.nsw!r} lists itself as a standard form"
            )
        if self.source not in VALID_SOURCES:
            raise EntryValidationError(f"unknown source {self.source!r}")

    def to_record(self) -> dict:
        return {
            "nsw": self.nsw,
            "standard_forms": list(self.standard_forms),
            "definition": self.definition,
            "examples": list(self.examples),
            "source": self.source,
            "created_at": self.created_at.strftime("%Y-%m-%dT%H:%M:%SZ"),
        }

    @classmethod
    def from_record(cls, record: dict) -> "DictEntry":
        missing = [f for f in _FIELDS if f not in record]
        if missing:
            raise DictionaryFormatError(f"record missing fields {missing}")
        raw_ts = record["created_at"]
        try:
            created = datetime.fromisoformat(raw_ts.replace("Z", "+00:00"))
        except ValueError as exc:
            raise DictionaryFormatError(f"bad created_at {raw_ts!r}: {exc}") from exc
        return cls(
            nsw=record["nsw"],
            standard_forms=tuple(record["standard_forms"]),
            definition=record["definition"],
            examples=tuple(record["examples"]),
            source=record["source"],
            created_at=created,
        )


class Dictionary:
    """In-memory NSW dictionary with last-wins append-log persistence.

    Many concurrent readers are fine; mutations are serialized by an
    internal lock and readers only ever observe pre- or post-state.
    """

    def __init__(self, path: str | os.PathLike | None = None):
        self._path = os.fspath(path) if path is not None else None
        self._records: list[DictEntry] = []
        self._entries: dict[str, DictEntry] = {}
        self._lock = threading.Lock()

    @property
    def version(self) -> int:
        return len(self._records)

    @property
    def entries(self) -> dict[str, DictEntry]:
        return dict(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def lookup(self, word: str) -> DictEntry | None:
        return self._entries.get(word.strip().lower())

    def insert(self, entry: DictEntry) -> None:
        """Add (or replace) an entry; durably persisted before returning."""
        entry.validate()
        with self._lock:
            if self._path is not None:
                with open(self._path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry.to_record(), ensure_ascii=False) + "\n")
                    fh.flush()
                    os.fsync(fh.fileno())
            self._records.append(entry)
            self._entries[entry.nsw] = entry

    def save(self, path: str | os.PathLike) -> None:
        """Write the full append log; atomic via rename."""
        path = os.fspath(path)
        tmp = path + ".tmp"
        with self._lock:
            with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
                for entry in self._records:
                    fh.write(json.dumps(entry.to_record(), ensure_ascii=False) + "\n")
            os.replace(tmp, path)
            self._path = path

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Dictionary":
        path = os.fspath(path)
        dictionary = cls(path=path)
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DictionaryFormatError(
                        f"{path}:{lineno}: invalid JSON at column {exc.colno}"
                    ) from exc
                try:
                    entry = DictEntry.from_record(record)
                except (DictionaryFormatError, EntryValidationError) as exc:
                    raise DictionaryFormatError(f"{path}:{lineno}: {exc}") from exc
                dictionary._records.append(entry)
                dictionary._entries[entry.nsw] = entry
        return dictionary
