"""Shipped models, sample environments and trace checkers.

The ``.ntcc`` sources live next to this module. ``load_builtin`` parses and
validates one of them; the ``*_stream`` helpers build deterministic
environment inputs; the ``check_*`` functions are pure predicates over traces.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, replace
from importlib import resources
from typing import Mapping, Sequence

from ..dsl import ast as A
from ..dsl.parser import parse, parse_constraint
from ..dsl.validate import ValidationFailed, validate
from ..oracle import FactorOracle
from ..trace import EventStream, Trace, TraceSchemaMismatch, UnitRecord

BUILTINS = ("chord", "factorial", "ccfomi", "filters", "stress")

# Notes the scripted player performs in the ccfomi demos.
PLAYER_NOTES = (60, 62, 64, 60, 62, 64, 65, 67, 60, 62,
                64, 60, 62, 64, 65, 67, 69, 67, 65, 64)


class UnknownModel(LookupError):
    code = "UnknownModel"


def builtin_source(name: str) -> str:
    if name not in BUILTINS:
        raise UnknownModel(f"no builtin model {name!r}; choose one of {', '.join(BUILTINS)}")
    return resources.files(__name__).joinpath(f"{name}.ntcc").read_text(encoding="utf-8")


def load_builtin(name: str) -> A.ModelAst:
    model = parse(builtin_source(name))
    errors = validate(model)
    if errors:
        raise ValidationFailed(errors)
    return model


def with_consts(model: A.ModelAst, overrides: Mapping[str, int]) -> A.ModelAst:
    """Copy of ``model`` with some ``const`` values replaced."""
    known = {c.name for c in model.consts}
    unknown = set(overrides) - known
    if unknown:
        raise KeyError(f"model has no constant(s) {', '.join(sorted(unknown))}")
    consts = tuple(replace(c, value=overrides.get(c.name, c.value)) for c in model.consts)
    return replace(model, consts=consts)


# -- sample environments -----------------------------------------------------

def player_stream(notes: Sequence[int] = PLAYER_NOTES, start: int = 1) -> EventStream:
    """The i-th note is played in unit ``start + i - 1`` together with ``go = i``."""
    return EventStream({start + i: [f"note = {n}", f"go = {i + 1}"]
                        for i, n in enumerate(notes)})


def filters_stream(seed: int, units: int = 100, p_input: float = 0.3,
                   p_end: float = 0.25) -> EventStream:
    """Random 0/1 values for every input[i] and end[j], every unit."""
    rng = random.Random(seed)
    out = EventStream()
    for u in range(1, units + 1):
        tells = [f"input[{i}] = {int(rng.random() < p_input)}" for i in range(1, 5)]
        tells += [f"end[{j}] = {int(rng.random() < p_end)}" for j in (1, 2)]
        out[u] = tells
    return out


def sample_input(name: str) -> EventStream | None:
    """Environment shipped alongside a builtin (None when it needs none)."""
    if name not in BUILTINS:
        raise UnknownModel(f"no builtin model {name!r}")
    path = resources.files(__name__).joinpath(f"{name}.input.jsonl")
    if not path.is_file():
        return None
    return EventStream.loads(path.read_text(encoding="utf-8"))


# -- checkers ----------------------------------------------------------------

@dataclass(frozen=True)
class CheckReport:
    property: str
    passed: bool
    unit: int | None = None
    witness: str | None = None

    def __post_init__(self):
        if not self.passed and not self.witness:
            raise ValueError("a failing report needs a witness")

    def to_dict(self) -> dict:
        return {"property": self.property, "passed": self.passed,
                "unit": self.unit, "witness": self.witness}


_CALL = re.compile(r"^([A-Za-z_][A-Za-z_0-9]*)\((.*)\)$")


def _records(trace) -> list[UnitRecord]:
    if isinstance(trace, Trace):
        recs = list(trace.records)
    else:
        recs = []
        for r in trace:
            if isinstance(r, UnitRecord):
                recs.append(r)
            elif isinstance(r, dict):
                recs.append(UnitRecord.from_dict(r))
            else:
                raise TraceSchemaMismatch(f"not a trace record: {r!r}")
    for i, r in enumerate(recs, 1):
        if r.unit != i:
            raise TraceSchemaMismatch(f"expected unit {i}, found {r.unit}")
        if not isinstance(r.calls, list) or not isinstance(r.outputs, dict):
            raise TraceSchemaMismatch(f"malformed record for unit {r.unit}")
    return recs


def _calls(rec: UnitRecord):
    for text in rec.calls:
        m = _CALL.match(text)
        if m is None:
            raise TraceSchemaMismatch(f"unit {rec.unit}: bad call entry {text!r}")
        args = m.group(2).strip()
        try:
            values = tuple(int(a) for a in args.split(",")) if args else ()
        except ValueError:
            values = None  # local-variable arguments; not used by the checkers
        yield m.group(1), values


_FILTER_STATES = {"IdleFilter", "WaitingFilter", "BusyFilter"}
_OBJECT_STATES = {"IdleObject", "BusyObject"}


def check_mutual_exclusion(trace) -> CheckReport:
    """Each object is held by at most one filter at a time.

    A filter's state in a unit is the last of its Idle/Waiting/Busy calls.
    Beyond counting busy filters, ``work[j]`` may only change hands in a unit
    where object ``j`` was idle, and a busy filter must be the one named by
    the latest ``work[j]``.
    """
    name = "mutual_exclusion"
    holder: dict[int, int] = {}
    for rec in _records(trace):
        filt: dict[tuple, str] = {}
        obj_seen: dict[int, set] = {}
        for call, args in _calls(rec):
            if call in _FILTER_STATES and args and len(args) == 2:
                filt[args] = call
            elif call in _OBJECT_STATES and args and len(args) == 1:
                obj_seen.setdefault(args[0], set()).add(call)
        busy: dict[int, list] = {}
        for (i, j), state in sorted(filt.items()):
            if state == "BusyFilter":
                busy.setdefault(j, []).append(i)
        for j, ids in sorted(busy.items()):
            if len(ids) > 1:
                return CheckReport(name, False, rec.unit,
                                   f"object {j} held by filters {ids} in unit {rec.unit}")
        for key, w in sorted(rec.outputs.items()):
            m = re.fullmatch(r"work\[(\d+)\]", key)
            if m is None:
                continue
            j = int(m.group(1))
            if "IdleObject" not in obj_seen.get(j, ()):
                return CheckReport(name, False, rec.unit,
                                   f"work[{j}] = {w} decided while object {j} was busy")
            holder[j] = w
        for j, ids in sorted(busy.items()):
            if holder.get(j) != ids[0]:
                return CheckReport(name, False, rec.unit,
                                   f"filter {ids[0]} busy on object {j} but work[{j}] is "
                                   f"{holder.get(j)}")
    return CheckReport(name, True)


def _go_lower_bound(rec: UnitRecord) -> int | None:
    best = rec.outputs.get("go")
    for text in rec.tells:
        try:
            c = parse_constraint(text)
        except Exception:
            raise TraceSchemaMismatch(f"unit {rec.unit}: unparseable tell {text!r}") from None
        parts = c.parts if isinstance(c, A.Conj) else (c,)
        for p in parts:
            if not (isinstance(p, A.Rel) and isinstance(p.lhs, A.Name) and p.lhs.id == "go"
                    and isinstance(p.rhs, A.Num)):
                continue
            v = p.rhs.value
            bound = v if p.op in ("=", ">=") else v + 1 if p.op == ">" else None
            if bound is not None and (best is None or bound > best):
                best = bound
    return best


def check_improv_consistency(trace, fo: FactorOracle, wait: int | None = None) -> CheckReport:
    """Replay a ccfomi trace against the oracle learned from the same input.

    Checks, per unit: oracle growth only once ``go`` covers the note count;
    learned symbols agree with ``fo``; every ``out`` follows from the IMPROV
    position of the previous unit, either along the spine (``sigma[k+1]``) or
    through a factor link leaving ``S[k]``. With ``wait`` set, no ``out`` may
    appear before the unit after ``go >= wait``.
    """
    name = "improv_consistency"
    recs = _records(trace)
    learned = 0
    gate_open_at = None
    prev_pos: list[int] = []
    for rec in recs:
        go = _go_lower_bound(rec)
        if wait is not None and gate_open_at is None and go is not None and go >= wait:
            gate_open_at = rec.unit
        for text in rec.natives:
            m = re.fullmatch(r"oracle\.add\((-?\d+)\)", text)
            if m is None:
                raise TraceSchemaMismatch(f"unit {rec.unit}: bad native entry {text!r}")
            learned += 1
            s = int(m.group(1))
            if go is None or go < learned:
                return CheckReport(name, False, rec.unit,
                                   f"note {learned} learned while go >= {learned} was not told")
            if learned > fo.n or fo.symbol(learned) != s:
                return CheckReport(name, False, rec.unit,
                                   f"learned symbol {learned} = {s} disagrees with the oracle")
        positions = [args[0] for call, args in _calls(rec)
                     if call == "IMPROV" and args and len(args) == 1]
        out = rec.outputs.get("out")
        if out is not None:
            if wait is not None and (gate_open_at is None or gate_open_at >= rec.unit):
                return CheckReport(name, False, rec.unit,
                                   f"out = {out} before {wait} notes were played")
            if not prev_pos:
                return CheckReport(name, False, rec.unit,
                                   f"out = {out} with no improviser in the previous unit")
            k = prev_pos[-1]
            if not 0 <= k <= fo.n:
                return CheckReport(name, False, rec.unit, f"IMPROV position {k} beyond oracle")
            targets = set()
            if k + 1 <= fo.n and out == fo.symbol(k + 1):
                targets.add(k + 1)
            sk = fo.suffix(k)
            if sk >= 0 and out in fo.from_set(sk):
                targets.add(fo.delta(sk, out))
            if not targets:
                return CheckReport(name, False, rec.unit,
                                   f"out = {out} at position {k}: neither sigma[{k + 1}] nor "
                                   f"in from(S[{k}])")
            if not targets & set(positions):
                return CheckReport(name, False, rec.unit,
                                   f"after out = {out} from position {k} the improviser moved to "
                                   f"{positions}, expected one of {sorted(targets)}")
        prev_pos = positions
    return CheckReport(name, True)


def replay_oracle(trace, alphabet: tuple[int, int] | None = None) -> FactorOracle:
    """Rebuild the oracle from the ``oracle.add`` entries of a trace."""
    fo = FactorOracle(alphabet)
    for rec in _records(trace):
        for text in rec.natives:
            m = re.fullmatch(r"oracle\.add\((-?\d+)\)", text)
            if m:
                fo.add_symbol(int(m.group(1)))
    return fo


__all__ = [
    "BUILTINS",
    "CheckReport",
    "PLAYER_NOTES",
    "UnknownModel",
    "builtin_source",
    "check_improv_consistency",
    "check_mutual_exclusion",
    "filters_stream",
    "load_builtin",
    "player_stream",
    "replay_oracle",
    "sample_input",
    "with_consts",
]
