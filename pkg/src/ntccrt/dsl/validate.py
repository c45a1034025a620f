"""Static checks run on a parsed model before execution."""

from __future__ import annotations

from dataclasses import dataclass, replace

from . import ast as A

ORACLE_INT_FAMILIES = {"S": 1, "sigma": 1, "delta": 2}
ORACLE_SET_FAMILIES = {"from": 1}
NATIVES = {"oracle.add": 1}


@dataclass(frozen=True)
class ValidationError:
    code: str
    message: str
    definition: str | None = None
    line: int | None = None
    column: int | None = None

    def __str__(self) -> str:
        where = f"{self.line}:{self.column}: " if self.line is not None else ""
        ctx = f" (in {self.definition})" if self.definition else ""
        return f"{where}{self.code}: {self.message}{ctx}"

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "definition": self.definition,
                "line": self.line, "column": self.column}


class ValidationFailed(Exception):
    def __init__(self, errors: list[ValidationError]):
        super().__init__("; ".join(str(e) for e in errors))
        self.errors = errors


def const_value(e: A.Expr, consts: dict) -> int | None:
    """Evaluate ``e`` using integer literals and constants only."""
    if isinstance(e, A.Num):
        return e.value
    if isinstance(e, A.Name):
        return consts.get(e.id)
    if isinstance(e, A.Neg):
        v = const_value(e.operand, consts)
        return None if v is None else -v
    if isinstance(e, A.BinOp):
        a = const_value(e.left, consts)
        b = const_value(e.right, consts)
        if a is None or b is None:
            return None
        return a + b if e.op == "+" else a - b if e.op == "-" else a * b
    return None


class _Checker:
    def __init__(self, model: A.ModelAst):
        self.m = model
        self.errors: list[ValidationError] = []
        self.consts = {c.name: c.value for c in model.consts}
        self.decls = {}
        self.defs = {}
        self.edges: dict[str, set] = {}
        self.ctx: str | None = None

    def err(self, code, message, pos=None, definition=None):
        line, col = pos if pos else (None, None)
        self.errors.append(ValidationError(code, message, definition or self.ctx, line, col))

    def run(self) -> list[ValidationError]:
        m = self.m
        seen = {}
        for item in list(m.consts) + list(m.declarations):
            if item.name in seen:
                self.err("DuplicateDeclaration", f"{item.name!r} declared twice", item.pos)
            seen[item.name] = item
        for d in m.declarations:
            self.decls.setdefault(d.name, d)
            if d.kind == "var" and d.lo > d.hi:
                self.err("InvalidDomain", f"{d.name}: empty domain {d.lo}..{d.hi}", d.pos)
        if m.alphabet is not None and m.alphabet[0] > m.alphabet[1]:
            self.err("InvalidDomain", "empty oracle alphabet")
        for d in m.definitions:
            if d.name in self.defs:
                self.err("DuplicateDefinition", f"{d.name!r} defined twice", d.pos, d.name)
                continue
            self.defs[d.name] = d
        for d in m.definitions:
            self.ctx = d.name
            if len(set(d.params)) != len(d.params):
                self.err("DuplicateParameter", f"repeated parameter in {d.name}", d.pos)
            self.edges.setdefault(d.name, set())
            self.proc(d.body, frozenset(d.params), False)
        self.ctx = None
        if m.system is None:
            self.err("MissingSystem", "no 'system = ...' entry")
        else:
            self.ctx = "system"
            self.proc(m.system, frozenset(), False)
            self.ctx = None
        for o in m.outputs:
            self.expr(o, frozenset())
        self.recursion()
        return self.errors

    # walkers -------------------------------------------------------------

    def proc(self, p, scope, guarded):
        if isinstance(p, A.Tell):
            self.constraint(p.c, scope)
        elif isinstance(p, A.When):
            self.constraint(p.c, scope)
            self.proc(p.body, scope, guarded)
        elif isinstance(p, A.Unless):
            self.constraint(p.c, scope)
            self.proc(p.body, scope, True)
        elif isinstance(p, A.Par):
            for i in p.items:
                self.proc(i, scope, guarded)
        elif isinstance(p, A.Next):
            self.proc(p.body, scope, True)
        elif isinstance(p, A.Sum):
            for b in p.branches:
                self.constraint(b.guard, scope)
                self.proc(b.body, scope, guarded)
        elif isinstance(p, A.SumOver):
            self.range_(p.rng, scope, p.pos, empty_code="EmptySumRange")
            inner = scope | {p.var}
            self.constraint(p.guard, inner)
            self.proc(p.body, inner, guarded)
        elif isinstance(p, A.ParOver):
            self.range_(p.rng, scope, p.pos)
            self.proc(p.body, scope | {p.var}, guarded)
        elif isinstance(p, (A.Star, A.Bang)):
            self.proc(p.body, scope, guarded)
        elif isinstance(p, A.Local):
            self.proc(p.body, scope | {v.name for v in p.vars}, guarded)
        elif isinstance(p, A.Call):
            for a in p.args:
                self.expr(a, scope)
            d = self.defs.get(p.name)
            if d is None:
                self.err("UnknownDefinition", f"no definition named {p.name!r}", p.pos)
                return
            if len(d.params) != len(p.args):
                self.err("ArityMismatch",
                         f"{p.name} takes {len(d.params)} argument(s), got {len(p.args)}", p.pos)
            if self.ctx in self.defs and not guarded:
                self.edges[self.ctx].add(p.name)
        elif isinstance(p, A.NativeCall):
            for a in p.args:
                self.expr(a, scope)
            arity = NATIVES.get(p.name)
            if arity is None:
                self.err("UnknownNative", f"unknown builtin {p.name!r}", p.pos)
            elif arity != len(p.args):
                self.err("ArityMismatch",
                         f"{p.name} takes {arity} argument(s), got {len(p.args)}", p.pos)
        elif isinstance(p, A.Skip):
            pass
        else:
            raise TypeError(f"not a process: {p!r}")

    def range_(self, rng, scope, pos, empty_code=None):
        items = (rng.lo, rng.hi) if isinstance(rng, A.Range) else rng.items
        for e in items:
            self.expr(e, scope)
        if empty_code is None:
            return
        if isinstance(rng, A.SetLit):
            if not rng.items:
                self.err(empty_code, "sum over an empty set", pos)
        else:
            lo = const_value(rng.lo, self.consts)
            hi = const_value(rng.hi, self.consts)
            if lo is not None and hi is not None and lo > hi:
                self.err(empty_code, f"sum over empty range {lo}..{hi}", pos)

    def constraint(self, c, scope):
        if isinstance(c, A.Rel):
            self.expr(c.lhs, scope)
            self.expr(c.rhs, scope)
        elif isinstance(c, A.Member):
            self.expr(c.elem, scope)
            self.setref(c.target, scope)
        elif isinstance(c, A.Conj):
            for p in c.parts:
                self.constraint(p, scope)

    def _declared_before(self, decl, pos) -> bool:
        return decl.pos is None or pos is None or decl.pos <= pos

    def setref(self, t, scope):
        if isinstance(t, A.OracleRef):
            arity = ORACLE_SET_FAMILIES.get(t.family)
            if arity is None:
                self.err("UnknownOracleFamily", f"oracle.{t.family} is not a set family", t.pos)
            elif arity != len(t.index):
                self.err("ArityMismatch", f"oracle.{t.family} takes {arity} index", t.pos)
            for i in t.index:
                self.expr(i, scope)
            return
        name = t.id if isinstance(t, A.Name) else t.name
        indexed = isinstance(t, A.Cell)
        d = self.decls.get(name)
        if d is None or not self._declared_before(d, t.pos):
            self.err("UndeclaredVariable", f"set {name!r} is not declared before use", t.pos)
        elif d.kind != "set" or d.indexed != indexed:
            self.err("KindMismatch", f"{name!r} is not a{'n indexed' if indexed else ''} set",
                     t.pos)
        if indexed:
            for i in t.index:
                self.expr(i, scope)

    def expr(self, e, scope):
        if isinstance(e, A.Num):
            return
        if isinstance(e, A.Name):
            if e.id in scope or e.id in self.consts:
                return
            d = self.decls.get(e.id)
            if d is None or not self._declared_before(d, e.pos):
                self.err("UndeclaredVariable", f"{e.id!r} is not declared before use", e.pos)
            elif d.kind != "var" or d.indexed:
                self.err("KindMismatch", f"{e.id!r} is not a scalar variable", e.pos)
        elif isinstance(e, A.Cell):
            d = self.decls.get(e.name)
            if d is None or not self._declared_before(d, e.pos):
                self.err("UndeclaredVariable", f"{e.name!r} is not declared before use", e.pos)
            elif d.kind != "var" or not d.indexed:
                self.err("KindMismatch", f"{e.name!r} is not an indexed variable", e.pos)
            for i in e.index:
                self.expr(i, scope)
        elif isinstance(e, A.OracleRef):
            arity = ORACLE_INT_FAMILIES.get(e.family)
            if arity is None:
                self.err("UnknownOracleFamily", f"oracle.{e.family} is not an integer family",
                         e.pos)
            elif arity != len(e.index):
                self.err("ArityMismatch", f"oracle.{e.family} takes {arity} index(es)", e.pos)
            for i in e.index:
                self.expr(i, scope)
        elif isinstance(e, A.Neg):
            self.expr(e.operand, scope)
        elif isinstance(e, A.BinOp):
            self.expr(e.left, scope)
            self.expr(e.right, scope)

    # guarded recursion ---------------------------------------------------

    def recursion(self):
        """Every call cycle must pass through a ``next`` (or ``unless``)."""
        index, low, stack, on = {}, {}, [], set()
        counter = [0]
        sccs = []

        def visit(v):
            index[v] = low[v] = counter[0]
            counter[0] += 1
            stack.append(v)
            on.add(v)
            for w in sorted(self.edges.get(v, ())):
                if w not in self.defs:
                    continue
                if w not in index:
                    visit(w)
                    low[v] = min(low[v], low[w])
                elif w in on:
                    low[v] = min(low[v], index[w])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                sccs.append(comp)

        for v in self.defs:
            if v not in index:
                visit(v)
        for comp in sccs:
            if len(comp) > 1 or comp[0] in self.edges.get(comp[0], ()):
                names = sorted(comp, key=lambda n: self.defs[n].pos or (0, 0))
                for n in names:
                    d = self.defs[n]
                    cycle = " -> ".join(names + [names[0]])
                    self.err("RecursionNotGuarded",
                             f"call cycle {cycle} is not under 'next'", d.pos, n)


def validate(model: A.ModelAst) -> list[ValidationError]:
    """Return every violation found; an empty list means the model is valid."""
    return _Checker(model).run()


def validate_constraint(model: A.ModelAst, c: A.Constraint) -> list[ValidationError]:
    """Check an environment constraint against the model's declarations."""
    ck = _Checker(model)
    for d in model.declarations:
        ck.decls.setdefault(d.name, replace(d, pos=None))
    ck.constraint(c, frozenset())
    return ck.errors
