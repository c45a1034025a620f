"""JSON Lines formats: environment event streams in, unit traces out."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable


class TraceSchemaMismatch(ValueError):
    pass


@dataclass
class UnitRecord:
    unit: int
    tells: list = field(default_factory=list)
    fired: list = field(default_factory=list)
    choices: list = field(default_factory=list)
    calls: list = field(default_factory=list)
    natives: list = field(default_factory=list)
    outputs: dict = field(default_factory=dict)
    status: str = "ok"
    processes: int = 0

    FIELDS = ("unit", "tells", "fired", "choices", "calls", "natives", "outputs",
              "status", "processes")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.FIELDS}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> UnitRecord:
        missing = [k for k in cls.FIELDS if k not in d]
        if missing:
            raise TraceSchemaMismatch(f"trace record lacks {', '.join(missing)}")
        extra = set(d) - set(cls.FIELDS)
        if extra:
            raise TraceSchemaMismatch(f"unexpected trace keys {sorted(extra)}")
        if not isinstance(d["unit"], int) or not isinstance(d["outputs"], dict):
            raise TraceSchemaMismatch("malformed trace record")
        return cls(**{k: d[k] for k in cls.FIELDS})


@dataclass
class Trace:
    records: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def outputs(self, name: str) -> list:
        """Per-unit value of output ``name`` (None where undetermined)."""
        return [r.outputs.get(name) for r in self.records]

    def dumps(self) -> str:
        return "".join(r.to_json() + "\n" for r in self.records)

    def write(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def loads(cls, text: str) -> Trace:
        recs = [UnitRecord.from_dict(json.loads(line)) for line in text.splitlines() if line.strip()]
        for prev, cur in zip(recs, recs[1:]):
            if cur.unit != prev.unit + 1:
                raise TraceSchemaMismatch(f"units not contiguous at {cur.unit}")
        return cls(recs)

    @classmethod
    def read(cls, path) -> Trace:
        return cls.loads(Path(path).read_text(encoding="utf-8"))


class EventStream(dict):
    """Environment input: time-unit -> list of constraint texts."""

    @classmethod
    def from_records(cls, records: Iterable[dict]) -> EventStream:
        out = cls()
        last = 0
        for i, rec in enumerate(records, 1):
            unit, tells = rec.get("unit"), rec.get("tells", [])
            if not isinstance(unit, int) or unit < 1:
                raise ValueError(f"event {i}: 'unit' must be a positive integer")
            if unit < last:
                raise ValueError(f"event {i}: units must be non-decreasing")
            if not isinstance(tells, list) or not all(isinstance(t, str) for t in tells):
                raise ValueError(f"event {i}: 'tells' must be a list of strings")
            last = unit
            out.setdefault(unit, []).extend(tells)
        return out

    @classmethod
    def loads(cls, text: str) -> EventStream:
        records = []
        for n, line in enumerate(text.splitlines(), 1):
            if line.strip():
                try:
                    records.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise ValueError(f"line {n}: {exc.msg}") from None
        return cls.from_records(records)

    @classmethod
    def read(cls, path) -> EventStream:
        return cls.loads(Path(path).read_text(encoding="utf-8"))

    def dumps(self) -> str:
        return "".join(json.dumps({"tells": self[u], "unit": u}, sort_keys=True) + "\n"
                       for u in sorted(self))

    @property
    def last_unit(self) -> int:
        return max(self, default=0)
