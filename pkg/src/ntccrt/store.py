"""Finite-domain constraint store.

The store holds one time-unit's worth of information: integer domains,
lower-bounded set variables, posted constraints and reified guards. A
:class:`PersistentFactBase` outlives :meth:`Store.reset_for_next_unit` and
re-seeds persistent stream cells every unit.

Entailment is three-valued. Propagation is incremental: every ``tell`` runs
the affected propagators to fixpoint immediately, and :meth:`Store.propagate`
refreshes the reified guard booleans.
"""

from __future__ import annotations

import enum
import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Union

from .domain import BOOL, EMPTY, INT64, INT64_MAX, INT64_MIN, FDDomain

__all__ = [
    "Arith",
    "Between",
    "Conj",
    "ConstraintError",
    "Entailment",
    "Eq",
    "Ge",
    "Gt",
    "InvalidDomain",
    "Le",
    "Lit",
    "Lt",
    "Member",
    "Neq",
    "PersistentConflict",
    "PersistentFactBase",
    "QueryOnFailedStore",
    "ArithmeticOverflow",
    "Rel",
    "Status",
    "Store",
    "TellResult",
    "Top",
    "VarId",
]

# Value sets larger than this fall back to interval hulls.
ENUM_CAP = 4096


class ConstraintError(Exception):
    pass


class InvalidDomain(ConstraintError):
    pass


class QueryOnFailedStore(ConstraintError):
    pass


class PersistentConflict(ConstraintError):
    pass


class ArithmeticOverflow(ConstraintError):
    pass


class Entailment(enum.Enum):
    TRUE = "true"
    FALSE = "false"
    UNKNOWN = "unknown"


class TellResult(enum.Enum):
    OK = "ok"
    INCONSISTENT = "inconsistent"


class Status(enum.Enum):
    STABLE = "stable"
    PENDING = "pending"
    FAILED = "failed"


class VarId:
    """Opaque variable handle; hashing is by identity."""

    __slots__ = ("id", "name", "kind", "init", "fact_key")

    def __init__(self, id: int, name: str, kind: str, init: FDDomain | None,
                 fact_key: tuple | None = None):
        self.id = id
        self.name = name
        self.kind = kind
        self.init = init
        self.fact_key = fact_key

    def __repr__(self) -> str:
        return self.name


# -- constraint language ----------------------------------------------------

@dataclass(frozen=True)
class Lit:
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class Arith:
    op: str  # '+', '-', '*'
    left: "Expr"
    right: "Expr"

    def __hash__(self) -> int:
        h = self.__dict__.get("_h")
        if h is None:
            h = hash((self.op, self.left, self.right))
            object.__setattr__(self, "_h", h)
        return h

    def __str__(self) -> str:
        return f"({self.left} {self.op} {self.right})"


Expr = Union[Lit, Arith, VarId]

_FLIP = {"=": "=", "!=": "!=", "<": ">", "<=": ">=", ">": "<", ">=": "<="}


@dataclass(frozen=True)
class Rel:
    op: str
    lhs: Expr
    rhs: Expr

    def __post_init__(self):
        if self.op not in _FLIP:
            raise ValueError(f"unknown relation {self.op!r}")

    def __hash__(self) -> int:
        h = self.__dict__.get("_h")
        if h is None:
            h = hash((self.op, self.lhs, self.rhs))
            object.__setattr__(self, "_h", h)
        return h

    def __str__(self) -> str:
        return f"{self.lhs} {self.op} {self.rhs}"


@dataclass(frozen=True)
class Member:
    elem: Expr
    set: VarId

    def __hash__(self) -> int:
        h = self.__dict__.get("_h")
        if h is None:
            h = hash((self.elem, self.set))
            object.__setattr__(self, "_h", h)
        return h

    def __str__(self) -> str:
        return f"{self.elem} in {self.set}"


@dataclass(frozen=True)
class Conj:
    parts: tuple

    def __hash__(self) -> int:
        h = self.__dict__.get("_h")
        if h is None:
            h = hash((self.parts,))
            object.__setattr__(self, "_h", h)
        return h

    def __str__(self) -> str:
        return " /\\ ".join(str(p) for p in self.parts)


@dataclass(frozen=True)
class Top:
    def __str__(self) -> str:
        return "true"


Constraint = Union[Rel, Member, Conj, Top]


def _expr(e) -> Expr:
    return Lit(e) if isinstance(e, int) else e


def Eq(x, e) -> Rel:
    return Rel("=", _expr(x), _expr(e))


def Neq(x, e) -> Rel:
    return Rel("!=", _expr(x), _expr(e))


def Lt(x, e) -> Rel:
    return Rel("<", _expr(x), _expr(e))


def Le(x, e) -> Rel:
    return Rel("<=", _expr(x), _expr(e))


def Gt(x, e) -> Rel:
    return Rel(">", _expr(x), _expr(e))


def Ge(x, e) -> Rel:
    return Rel(">=", _expr(x), _expr(e))


def Between(lo, x, hi) -> Conj:
    """Strict ``lo < x < hi``."""
    return Conj((Lt(lo, x), Lt(x, hi)))


def holds(op: str, a: int, b: int) -> bool:
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    return a >= b


def _apply(op: str, a: int, b: int) -> int:
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    return a * b


def expr_vars(e, acc: list) -> list:
    if isinstance(e, VarId):
        acc.append(e)
    elif isinstance(e, Arith):
        expr_vars(e.left, acc)
        expr_vars(e.right, acc)
    return acc


def constraint_vars(c, acc: list | None = None) -> list:
    """All variable occurrences in ``c``, repeats included."""
    if acc is None:
        acc = []
    if isinstance(c, Rel):
        expr_vars(c.lhs, acc)
        expr_vars(c.rhs, acc)
    elif isinstance(c, Member):
        expr_vars(c.elem, acc)
        acc.append(c.set)
    elif isinstance(c, Conj):
        for p in c.parts:
            constraint_vars(p, acc)
    return acc


# -- persistent facts -------------------------------------------------------

@dataclass
class PersistentFactBase:
    """Monotone ground facts that survive time-unit boundaries."""

    values: dict = field(default_factory=dict)
    members: dict = field(default_factory=dict)

    def assert_value(self, key: tuple, value: int) -> bool:
        """Record ``key = value``; returns True when the fact is new."""
        old = self.values.get(key)
        if old is None:
            self.values[key] = value
            return True
        if old != value:
            raise PersistentConflict(
                f"{_key_str(key)} already fixed to {old}, cannot become {value}")
        return False

    def add_member(self, key: tuple, value: int) -> bool:
        s = self.members.setdefault(key, set())
        if value in s:
            return False
        s.add(value)
        return True


def _key_str(key: tuple) -> str:
    name, index = key
    if index == ():
        return name
    return f"{name}[{', '.join(map(str, index))}]"


@dataclass
class _StreamDecl:
    kind: str
    init: FDDomain | None
    persistent: bool


class _Prop:
    __slots__ = ("c", "vars", "alive", "queued")

    def __init__(self, c, vars):
        self.c = c
        self.vars = vars
        self.alive = True
        self.queued = False


# -- the store --------------------------------------------------------------

class Store:
    def __init__(self, facts: PersistentFactBase | None = None):
        self.facts = facts if facts is not None else PersistentFactBase()
        self._ids = itertools.count()
        self._streams: dict[str, _StreamDecl] = {}
        self._cells: dict[tuple, VarId] = {}
        self._locals: dict[object, VarId] = {}
        self._clear()

    def _clear(self) -> None:
        self._domains: dict[VarId, FDDomain] = {}
        self._members: dict[VarId, set] = {}
        self.posted: list = []
        self._watch: dict[VarId, list[_Prop]] = {}
        self._queue: deque[_Prop] = deque()
        self._pending_members: list[_Prop] = []
        self.guards: dict = {}
        self._guard_watch: dict[VarId, list] = {}
        self._open_guards: set = set()
        self._dirty: set[VarId] = set()
        self._newly_true: list[VarId] = []
        self.status = Status.STABLE

    # variables ---------------------------------------------------------

    def _new(self, name, kind, init, fact_key=None) -> VarId:
        return VarId(next(self._ids), name, kind, init, fact_key)

    def new_fd_var(self, name: str, lo: int, hi: int) -> VarId:
        if lo > hi:
            raise InvalidDomain(f"{name}: empty domain {lo}..{hi}")
        return self._new(name, "fd", FDDomain.range(lo, hi))

    def new_bool_var(self, name: str) -> VarId:
        return self._new(name, "bool", BOOL)

    def new_set_var(self, name: str) -> VarId:
        return self._new(name, "set", None)

    def declare_stream(self, name: str, lo: int | None = None, hi: int | None = None,
                       *, kind: str = "fd", persistent: bool = False) -> None:
        """Declare an indexed family of variables; cells are created lazily."""
        if kind == "set":
            init = None
        else:
            lo = INT64_MIN if lo is None else lo
            hi = INT64_MAX if hi is None else hi
            if lo > hi:
                raise InvalidDomain(f"{name}: empty domain {lo}..{hi}")
            init = FDDomain.range(lo, hi)
        self._streams[name] = _StreamDecl(kind, init, persistent)

    def has_stream(self, name: str) -> bool:
        return name in self._streams

    def cell(self, name: str, index) -> VarId:
        """The variable at ``name[index]``, created on first access."""
        if not isinstance(index, tuple):
            index = (index,)
        key = (name, index)
        v = self._cells.get(key)
        if v is None:
            decl = self._streams.get(name)
            if decl is None:
                raise ConstraintError(f"undeclared stream {name!r}")
            v = self._new(_key_str(key), decl.kind, decl.init,
                          key if decl.persistent else None)
            self._cells[key] = v
        return v

    def local_var(self, key, name: str, init: FDDomain = INT64) -> VarId:
        """A variable whose identity is tied to ``key`` across time-units."""
        v = self._locals.get(key)
        if v is None:
            v = self._new(name, "fd", init)
            self._locals[key] = v
        return v

    def domain(self, v: VarId) -> FDDomain:
        d = self._domains.get(v)
        if d is None:
            d = v.init
            if v.fact_key is not None:
                fact = self.facts.values.get(v.fact_key)
                if fact is not None:
                    d = d.intersect(FDDomain.single(fact))
            self._domains[v] = d
        return d

    def members(self, v: VarId) -> set:
        m = self._members.get(v)
        if m is None:
            m = set()
            if v.fact_key is not None:
                m.update(self.facts.members.get(v.fact_key, ()))
            self._members[v] = m
        return m

    def value(self, v: VarId) -> int | None:
        return self.domain(v).value

    def is_failed(self) -> bool:
        return self.status is Status.FAILED

    # narrowing ---------------------------------------------------------

    def _fail(self) -> None:
        self.status = Status.FAILED
        for p in self._queue:
            p.queued = False
        self._queue.clear()

    def _set_domain(self, v: VarId, d: FDDomain) -> bool:
        old = self.domain(v)
        if d is old or d == old:
            return True
        if d.is_empty():
            self._domains[v] = EMPTY
            self._fail()
            return False
        self._domains[v] = d
        self._touch(v)
        return True

    def _touch(self, v: VarId) -> None:
        self._dirty.add(v)
        for p in self._watch.get(v, ()):
            if p.alive and not p.queued:
                p.queued = True
                self._queue.append(p)

    def _add_member(self, s: VarId, value: int) -> None:
        m = self.members(s)
        if value not in m:
            m.add(value)
            self._touch(s)

    # tell / propagate --------------------------------------------------

    def tell(self, c) -> TellResult:
        """Post ``c`` and propagate it to fixpoint."""
        if self.status is Status.FAILED:
            return TellResult.INCONSISTENT
        self._post(c)
        self._fixpoint()
        return TellResult.INCONSISTENT if self.status is Status.FAILED else TellResult.OK

    def _post(self, c) -> None:
        if isinstance(c, Top):
            return
        if isinstance(c, Conj):
            for p in c.parts:
                self._post(p)
            return
        if not isinstance(c, (Rel, Member)):
            raise TypeError(f"not a constraint: {c!r}")
        self.posted.append(c)
        vs = constraint_vars(c)
        if isinstance(c, Member):
            vs = expr_vars(c.elem, [])
        p = _Prop(c, tuple(dict.fromkeys(vs)))
        for v in p.vars:
            self._watch.setdefault(v, []).append(p)
        p.queued = True
        self._queue.append(p)

    def _fixpoint(self) -> None:
        q = self._queue
        while q and self.status is not Status.FAILED:
            p = q.popleft()
            p.queued = False
            if p.alive:
                self._run(p)

    def propagate(self) -> Status:
        """Run pending propagators, then refresh every affected guard."""
        self._fixpoint()
        if self.status is Status.FAILED:
            return Status.FAILED
        if self._dirty:
            dirty, self._dirty = self._dirty, set()
            seen = set()
            for v in dirty:
                for g in self._guard_watch.get(v, ()):
                    if g not in seen:
                        seen.add(g)
                        self._refresh_guard(g)
        return self.status

    def _run(self, p: _Prop) -> None:
        c = p.c
        if isinstance(c, Member):
            d, _ = self._vals(c.elem)
            if d.is_empty():
                return
            v = d.value
            if v is not None:
                self._add_member(c.set, v)
                p.alive = False
            return
        op, lhs, rhs = c.op, c.lhs, c.rhs
        lvar = isinstance(lhs, VarId)
        rvar = isinstance(rhs, VarId)
        if lvar and rvar and lhs is not rhs:
            self._narrow(lhs, op, self.domain(rhs), True)
            self._narrow(rhs, _FLIP[op], self.domain(lhs), True)
            if op == "=" and self.status is not Status.FAILED:
                self._narrow(lhs, op, self.domain(rhs), True)
        elif lvar and not _mentions(rhs, lhs):
            d, exact = self._vals(rhs)
            self._narrow(lhs, op, d, exact)
        elif rvar and not _mentions(lhs, rhs):
            d, exact = self._vals(lhs)
            self._narrow(rhs, _FLIP[op], d, exact)
        else:
            self._gac(p)
        if self.status is Status.FAILED:
            return
        e = self.entails(c)
        if e is Entailment.FALSE:
            self._fail()
        elif e is Entailment.TRUE:
            p.alive = False

    def _narrow(self, x: VarId, op: str, other: FDDomain, exact: bool) -> None:
        if self.status is Status.FAILED:
            return
        if other.is_empty():
            self._set_domain(x, EMPTY)
            return
        d = self.domain(x)
        if op == "=":
            nd = d.intersect(other) if exact else d.restrict(other.lo, other.hi)
        elif op == "!=":
            v = other.value
            nd = d.remove(v) if v is not None else d
        elif op == "<":
            nd = d.restrict(INT64_MIN * 2, other.hi - 1)
        elif op == "<=":
            nd = d.restrict(INT64_MIN * 2, other.hi)
        elif op == ">":
            nd = d.restrict(other.lo + 1, INT64_MAX * 2)
        else:
            nd = d.restrict(other.lo, INT64_MAX * 2)
        self._set_domain(x, nd)

    def _gac(self, p: _Prop) -> None:
        """Support-based filtering for small compound constraints."""
        vs = p.vars
        doms = [self.domain(v) for v in vs]
        total = 1
        for d in doms:
            total *= d.size()
            if total > ENUM_CAP:
                return
        supported = [set() for _ in vs]
        c = p.c
        for combo in itertools.product(*doms):
            env = dict(zip(vs, combo))
            if holds(c.op, _eval(c.lhs, env), _eval(c.rhs, env)):
                for i, val in enumerate(combo):
                    supported[i].add(val)
        for v, s in zip(vs, supported):
            if not self._set_domain(v, FDDomain.from_values(s)):
                return

    # value sets --------------------------------------------------------

    def _vals(self, e) -> tuple[FDDomain, bool]:
        """Over-approximate the values of ``e``; flag False once a hull is used."""
        if isinstance(e, VarId):
            return self.domain(e), True
        if isinstance(e, Lit):
            return FDDomain.single(e.value), True
        a, ea = self._vals(e.left)
        b, eb = self._vals(e.right)
        if a.is_empty() or b.is_empty():
            return EMPTY, True
        op = e.op
        va, vb = a.value, b.value
        if va is not None and vb is not None:
            r = _apply(op, va, vb)
            if r < INT64_MIN or r > INT64_MAX:
                raise ArithmeticOverflow(f"{va} {op} {vb} leaves the 64-bit range")
            return FDDomain.single(r), ea and eb
        if a.size() * b.size() <= ENUM_CAP:
            out = {_apply(op, x, y) for x in a for y in b}
            out = {v for v in out if INT64_MIN <= v <= INT64_MAX}
            return FDDomain.from_values(out), ea and eb
        if op == "+":
            lo, hi = a.lo + b.lo, a.hi + b.hi
        elif op == "-":
            lo, hi = a.lo - b.hi, a.hi - b.lo
        else:
            corners = (a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi)
            lo, hi = min(corners), max(corners)
        return FDDomain.range(max(lo, INT64_MIN), min(hi, INT64_MAX)), False

    # entailment --------------------------------------------------------

    def entails(self, c) -> Entailment:
        if self.status is Status.FAILED:
            raise QueryOnFailedStore("store is failed")
        return self._entails(c)

    def _entails(self, c) -> Entailment:
        if isinstance(c, Rel):
            return self._entails_rel(c)
        if isinstance(c, Member):
            return self._entails_member(c)
        if isinstance(c, Conj):
            results = [self._entails(p) for p in c.parts]
            if all(r is Entailment.TRUE for r in results):
                return Entailment.TRUE
            if any(r is Entailment.FALSE for r in results):
                return Entailment.FALSE
            return self._enumerate(c)
        if isinstance(c, Top):
            return Entailment.TRUE
        raise TypeError(f"not a constraint: {c!r}")

    def _entails_rel(self, c: Rel) -> Entailment:
        op, lhs, rhs = c.op, c.lhs, c.rhs
        # Fast path: variable against literal.
        if isinstance(lhs, VarId) and isinstance(rhs, Lit):
            return _decide(op, self.domain(lhs), FDDomain.single(rhs.value))
        if isinstance(lhs, Lit) and isinstance(rhs, VarId):
            return _decide(op, FDDomain.single(lhs.value), self.domain(rhs))
        a, ea = self._vals(lhs)
        b, eb = self._vals(rhs)
        r = _decide(op, a, b)
        if r is not Entailment.UNKNOWN:
            return r
        occ = constraint_vars(c)
        if ea and eb and len(occ) == len(set(occ)):
            return r
        return self._enumerate(c)

    def _entails_member(self, c: Member) -> Entailment:
        d, _ = self._vals(c.elem)
        m = self.members(c.set)
        if d.is_empty():
            return Entailment.TRUE
        if d.size() <= len(m) and all(v in m for v in d):
            return Entailment.TRUE
        return Entailment.UNKNOWN

    def _enumerate(self, c) -> Entailment:
        """Decide ``c`` by walking the joint domain of its integer variables."""
        vs = [v for v in dict.fromkeys(constraint_vars(c)) if v.kind != "set"]
        doms = [self.domain(v) for v in vs]
        total = 1
        for d in doms:
            total *= d.size()
            if total > ENUM_CAP:
                return Entailment.UNKNOWN
        everywhere = True
        somewhere = False
        for combo in itertools.product(*doms):
            r = self._truth(c, dict(zip(vs, combo)))
            if r != 2:
                everywhere = False
            if r != 0:
                somewhere = True
            if somewhere and not everywhere:
                return Entailment.UNKNOWN
        if everywhere:
            return Entailment.TRUE
        return Entailment.FALSE if not somewhere else Entailment.UNKNOWN

    def _truth(self, c, env) -> int:
        """0 = false, 1 = true for some set extension, 2 = true for all."""
        if isinstance(c, Rel):
            return 2 if holds(c.op, _eval(c.lhs, env), _eval(c.rhs, env)) else 0
        if isinstance(c, Member):
            return 2 if _eval(c.elem, env) in self.members(c.set) else 1
        if isinstance(c, Conj):
            return min(self._truth(p, env) for p in c.parts)
        return 2

    # guards ------------------------------------------------------------

    def reify(self, c) -> VarId:
        """Boolean tracking the entailment of ``c``; idempotent per constraint."""
        b = self.guards.get(c)
        if b is not None:
            return b
        b = self.new_bool_var(f"b[{c}]")
        self.guards[c] = b
        for v in dict.fromkeys(constraint_vars(c)):
            self._guard_watch.setdefault(v, []).append(c)
        self._open_guards.add(c)
        if self.status is not Status.FAILED:
            self._fixpoint()
            self._refresh_guard(c)
        return b

    def _refresh_guard(self, c) -> None:
        if c not in self._open_guards or self.status is Status.FAILED:
            return
        b = self.guards[c]
        e = self._entails(c)
        if e is Entailment.TRUE:
            self._domains[b] = FDDomain.single(1)
            self._open_guards.discard(c)
            self._newly_true.append(b)
        elif e is Entailment.FALSE:
            self._domains[b] = FDDomain.single(0)
            self._open_guards.discard(c)

    def pop_newly_true(self) -> list[VarId]:
        """Guard booleans that became true since the last call."""
        out, self._newly_true = self._newly_true, []
        return out

    # persistence -------------------------------------------------------

    def assert_fact(self, target: VarId, value: int) -> TellResult:
        """Record a persistent fact and apply it to the current unit."""
        if target.fact_key is None:
            raise ConstraintError(f"{target.name} is not a persistent cell")
        if target.kind == "set":
            self.facts.add_member(target.fact_key, value)
            if self.status is not Status.FAILED:
                self._add_member(target, value)
        else:
            self.facts.assert_value(target.fact_key, value)
            if self.status is not Status.FAILED:
                self._set_domain(target, self.domain(target).intersect(FDDomain.single(value)))
        self._fixpoint()
        return TellResult.INCONSISTENT if self.status is Status.FAILED else TellResult.OK

    def reset_for_next_unit(self) -> Store:
        """Drop every temporal constraint; facts and variable identities stay."""
        self._clear()
        return self


def _mentions(e, v: VarId) -> bool:
    if e is v:
        return True
    if isinstance(e, Arith):
        return _mentions(e.left, v) or _mentions(e.right, v)
    return False


def _eval(e, env: dict) -> int:
    if isinstance(e, VarId):
        return env[e]
    if isinstance(e, Lit):
        return e.value
    return _apply(e.op, _eval(e.left, env), _eval(e.right, env))


def _decide(op: str, a: FDDomain, b: FDDomain) -> Entailment:
    """Entailment of ``x op y`` for independent x in ``a`` and y in ``b``."""
    if a.is_empty() or b.is_empty():
        return Entailment.TRUE
    T, F, U = Entailment.TRUE, Entailment.FALSE, Entailment.UNKNOWN
    if op == "=" or op == "!=":
        va, vb = a.value, b.value
        if va is not None and va == vb:
            return T if op == "=" else F
        if a.hi < b.lo or b.hi < a.lo or a.disjoint(b):
            return F if op == "=" else T
        return U
    if op == "<":
        return T if a.hi < b.lo else F if a.lo >= b.hi else U
    if op == "<=":
        return T if a.hi <= b.lo else F if a.lo > b.hi else U
    if op == ">":
        return T if a.lo > b.hi else F if a.hi <= b.lo else U
    return T if a.lo >= b.hi else F if a.hi < b.lo else U

