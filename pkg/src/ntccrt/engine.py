"""Execution of ntcc process terms over discrete time-units.

Each unit runs to quiescence:

1. queued processes are installed (tells post to the store, ``when``,
   ``unless`` and ``sum`` register watchers on reified guards);
2. the store propagates and reports guards that became entailed;
3. ``when`` watchers with an entailed guard install their bodies;
4. once no ``when`` can fire, the oldest enabled ``sum`` commits to one of
   its currently entailed branches, chosen uniformly with the seeded RNG;
5. steps 1-4 repeat until nothing changes.

At quiescence every ``unless`` whose guard is not entailed schedules its body
for the next unit, outputs are read, and the store is reset.
"""

from __future__ import annotations

import itertools
import math
import random
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from . import store as S
from .domain import FDDomain, INT64
from .dsl import ast as A
from .dsl.parser import parse_constraint
from .dsl.printer import constraint_str, expr_str
from .dsl.validate import ValidationFailed, validate
from .oracle import FactorOracle
from .trace import Trace, UnitRecord

__all__ = [
    "Engine",
    "EngineError",
    "StarPolicy",
    "StoreFailed",
    "choose",
    "run",
    "star_delay",
]


class EngineError(Exception):
    code = "EngineError"


class UnknownDefinition(EngineError):
    code = "UnknownDefinition"


class ArityMismatch(EngineError):
    code = "ArityMismatch"


class UndeterminedValue(EngineError):
    code = "UndeterminedValue"


class StoreFailed(EngineError):
    code = "StoreFailed"

    def __init__(self, unit: int, record: UnitRecord | None = None):
        super().__init__(f"store became inconsistent in time-unit {unit}")
        self.unit = unit
        self.record = record


# -- star policy and choice ----------------------------------------------------

@dataclass(frozen=True)
class StarPolicy:
    """How far ``star P`` postpones ``P``: ``fixed:k``, ``geometric:p`` or ``schedule:a,b,...``."""

    kind: str = "geometric"
    k: int = 0
    p: float = 0.5
    schedule: tuple = ()

    @classmethod
    def parse(cls, text: str) -> StarPolicy:
        kind, _, arg = text.partition(":")
        try:
            if kind == "fixed":
                k = int(arg)
                if k < 0:
                    raise ValueError
                return cls("fixed", k=k)
            if kind == "geometric":
                p = float(arg)
                if not 0 < p <= 1:
                    raise ValueError
                return cls("geometric", p=p)
            if kind == "schedule":
                items = tuple(int(x) for x in arg.split(","))
                if not items or min(items) < 0:
                    raise ValueError
                return cls("schedule", schedule=items)
        except ValueError:
            pass
        raise ValueError(f"bad star policy {text!r}; use fixed:K, geometric:P or schedule:A,B,...")

    def __str__(self) -> str:
        if self.kind == "fixed":
            return f"fixed:{self.k}"
        if self.kind == "geometric":
            return f"geometric:{self.p}"
        return "schedule:" + ",".join(map(str, self.schedule))


def star_delay(policy: StarPolicy, rng: random.Random, draw: int = 0) -> int:
    """Delay in units for one ``star`` instance; ``draw`` indexes a schedule (cyclic)."""
    if policy.kind == "fixed":
        return policy.k
    if policy.kind == "schedule":
        return policy.schedule[draw % len(policy.schedule)]
    if policy.p >= 1:
        return 0
    # failures before the first success: P(d) = p (1-p)^d
    u = rng.random()
    return int(math.floor(math.log1p(-u) / math.log1p(-policy.p)))


def choose(rng: random.Random, enabled: Sequence):
    """Uniform pick; ``enabled`` is taken in the caller's (stable) order."""
    if not enabled:
        raise ValueError("nothing to choose from")
    if len(enabled) == 1:
        return enabled[0]
    return enabled[rng.randrange(len(enabled))]


# -- runtime helpers -----------------------------------------------------------

class LocalRef:
    __slots__ = ("key", "name", "init")

    def __init__(self, key: int, name: str, init: FDDomain):
        self.key = key
        self.name = name
        self.init = init


class _SumInst:
    __slots__ = ("id", "branches", "alive")

    def __init__(self, id: int, branches: list):
        self.id = id
        self.branches = branches  # (guard bool, constraint, body, env)
        self.alive = True


class Engine:
    """One run of a validated model; owns its store, oracle and RNG."""

    def __init__(self, model: A.ModelAst, seed: int = 0,
                 star_policy: StarPolicy | None = None,
                 continue_on_fail: bool = False, check: bool = True):
        if check:
            errors = validate(model)
            if errors:
                raise ValidationFailed(errors)
        self.model = model
        self.seed = seed
        self.star_policy = star_policy or StarPolicy()
        self.continue_on_fail = continue_on_fail
        self.rng = random.Random(seed)
        self.defs = {d.name: d for d in model.definitions}
        self.consts = {c.name: c.value for c in model.consts}
        self.oracle = FactorOracle(model.alphabet)
        self.store = S.Store()
        for d in model.declarations:
            if d.kind == "set":
                self.store.declare_stream(d.name, kind="set", persistent=d.persistent)
            else:
                self.store.declare_stream(d.name, d.lo, d.hi, persistent=d.persistent)
        lo, hi = model.alphabet if model.alphabet else (None, None)
        # unconstrained until learned, so "S[k] >= -1" holds only once S[k] exists
        self.store.declare_stream("oracle.S", None, None, persistent=True)
        self.store.declare_stream("oracle.sigma", lo, hi, persistent=True)
        self.store.declare_stream("oracle.delta", 0, None, persistent=True)
        self.store.declare_stream("oracle.from", kind="set", persistent=True)
        self.store.assert_fact(self.store.cell("oracle.S", 0), -1)
        self.store.reset_for_next_unit()
        self.unit = 0
        self.next_queue: list = [(model.system, {})] if model.system is not None else []
        self.delayed: dict[int, list] = {}
        self._local_ids = itertools.count(1)
        self._star_draws = 0
        self._static: dict = {}
        self._var_names = frozenset(d.name for d in model.declarations)
        self._resolved: dict = {}

    # resolution ----------------------------------------------------------

    def _expr(self, e, env):
        t = type(e)
        if t is A.Num:
            return S.Lit(e.value)
        if t is A.Name:
            v = env.get(e.id)
            if v is not None:
                if type(v) is int:
                    return S.Lit(v)
                return self.store.local_var(v.key, f"{v.name}#{v.key}", v.init)
            c = self.consts.get(e.id)
            if c is not None:
                return S.Lit(c)
            return self.store.cell(e.id, ())
        if t is A.Cell:
            return self.store.cell(e.name, tuple(self._int(i, env) for i in e.index))
        if t is A.OracleRef:
            return self.store.cell("oracle." + e.family,
                                   tuple(self._int(i, env) for i in e.index))
        if t is A.BinOp:
            left = self._expr(e.left, env)
            right = self._expr(e.right, env)
            if type(left) is S.Lit and type(right) is S.Lit:
                return S.Lit(S._apply(e.op, left.value, right.value))
            return S.Arith(e.op, left, right)
        if t is A.Neg:
            inner = self._expr(e.operand, env)
            if type(inner) is S.Lit:
                return S.Lit(-inner.value)
            return S.Arith("-", S.Lit(0), inner)
        raise TypeError(f"not an expression: {e!r}")

    def _int(self, e, env) -> int:
        r = self._expr(e, env)
        if type(r) is S.Lit:
            return r.value
        if self.store.is_failed():
            raise UndeterminedValue(f"{expr_str(e)} cannot be evaluated on a failed store")
        d, _ = self.store._vals(r)
        v = d.value
        if v is None:
            raise UndeterminedValue(f"{expr_str(e)} is not determined in unit {self.unit}")
        return v

    def _set(self, t, env):
        if isinstance(t, A.Name):
            return self.store.cell(t.id, ())
        if isinstance(t, A.Cell):
            return self.store.cell(t.name, tuple(self._int(i, env) for i in t.index))
        return self.store.cell("oracle." + t.family, tuple(self._int(i, env) for i in t.index))

    def resolve(self, c, env: Mapping | None = None):
        """Translate a syntax-level constraint into a store constraint."""
        if env is None:
            env = {}
        # Cells keep their identity across units, so a constraint whose
        # indices need no store lookups resolves the same way every time.
        static = self._static.get(id(c))
        if static is None:
            static = self._static[id(c)] = (c, _index_free(c, self._var_names))
        if static[1]:
            items = tuple(env.items())
            if all(type(v) is int for _, v in items):
                key = (id(c), items)
                r = self._resolved.get(key)
                if r is None:
                    if len(self._resolved) > 200_000:
                        self._resolved.clear()
                    r = self._resolved[key] = self._resolve(c, env)
                return r
        return self._resolve(c, env)

    def _resolve(self, c, env):
        t = type(c)
        if t is A.Rel:
            return S.Rel(c.op, self._expr(c.lhs, env), self._expr(c.rhs, env))
        if t is A.Member:
            return S.Member(self._expr(c.elem, env), self._set(c.target, env))
        if t is A.Conj:
            return S.Conj(tuple(self._resolve(p, env) for p in c.parts))
        if t is A.TrueC:
            return S.Top()
        raise TypeError(f"not a constraint: {c!r}")

    def _range(self, rng, env) -> list[int]:
        if isinstance(rng, A.Range):
            return list(range(self._int(rng.lo, env), self._int(rng.hi, env) + 1))
        return list(dict.fromkeys(self._int(i, env) for i in rng.items))

    # one time-unit -------------------------------------------------------

    def run_time_unit(self, env_tells: Iterable = ()) -> UnitRecord:
        self.unit += 1
        unit = self.unit
        store = self.store
        rec = UnitRecord(unit)
        queue = deque(self.next_queue)
        queue.extend(self.delayed.pop(unit, ()))
        self.next_queue = []
        self._rec = rec
        self._queue = queue
        self._whens: dict = {}
        self._sums: list[_SumInst] = []
        self._sum_by_guard: dict = {}
        self._enabled: set[int] = set()
        self._unlesses: list = []
        self._natives: list = []
        try:
            for c in env_tells:
                if isinstance(c, str):
                    rec.tells.append(c)
                    c = parse_constraint(c)
                else:
                    rec.tells.append(constraint_str(c))
                store.tell(self.resolve(c, {}))
            if not store.is_failed():
                self._quiesce()
        except S.ArithmeticOverflow:
            store._fail()
        if store.is_failed():
            rec.status = "failed"
            store.reset_for_next_unit()
            if not self.continue_on_fail:
                raise StoreFailed(unit, rec)
            return rec
        for b, body, env in self._unlesses:
            if store.value(b) != 1:
                self.next_queue.append((body, env))
        for o in self.model.outputs:
            v = store.value(self._output_var(o))
            if v is not None:
                rec.outputs[expr_str(o)] = v
        store.reset_for_next_unit()
        return rec

    def _output_var(self, o):
        if isinstance(o, A.Name):
            return self.store.cell(o.id, ())
        r = self._expr(o, {})
        if not isinstance(r, S.VarId):
            raise EngineError(f"output {expr_str(o)} is not a variable")
        return r

    def _quiesce(self) -> None:
        store = self.store
        queue = self._queue
        while True:
            while queue:
                self._install(*queue.popleft())
                if store.is_failed():
                    return
            if store.propagate() is S.Status.FAILED:
                return
            for b in store.pop_newly_true():
                for body, env, text in self._whens.pop(b, ()):
                    self._rec.fired.append(text)
                    queue.append((body, env))
                for s in self._sum_by_guard.get(b, ()):
                    if s.alive:
                        self._enabled.add(s.id)
            if queue:
                continue
            if self._natives and self._retry_natives():
                continue
            if self._enabled:
                self._commit(self._sums[min(self._enabled)])
                continue
            return

    def _commit(self, s: _SumInst) -> None:
        self._enabled.discard(s.id)
        s.alive = False
        value = self.store.value
        enabled = [i for i, br in enumerate(s.branches) if value(br[0]) == 1]
        i = choose(self.rng, enabled)
        _, c, body, env = s.branches[i]
        self._rec.fired.append(str(c))
        self._rec.choices.append({"branch": i, "enabled": len(enabled), "of": len(s.branches)})
        self._queue.append((body, env))

    # installation --------------------------------------------------------

    def _install(self, p, env) -> None:
        rec = self._rec
        rec.processes += 1
        store = self.store
        t = type(p)
        if t is A.Tell:
            store.tell(self.resolve(p.c, env))
        elif t is A.When:
            c = self.resolve(p.c, env)
            b = store.reify(c)
            if store.value(b) == 1:
                rec.fired.append(str(c))
                self._queue.append((p.body, env))
            else:
                self._whens.setdefault(b, []).append((p.body, env, str(c)))
        elif t is A.Par:
            q = self._queue
            for item in p.items:
                q.append((item, env))
        elif t is A.Next:
            self.next_queue.append((p.body, env))
        elif t is A.Unless:
            b = store.reify(self.resolve(p.c, env))
            self._unlesses.append((b, p.body, env))
        elif t is A.Call:
            self._call(p, env)
        elif t is A.Sum:
            self._register_sum([(br.guard, br.body, env) for br in p.branches])
        elif t is A.SumOver:
            branches = []
            for v in self._range(p.rng, env):
                inner = dict(env)
                inner[p.var] = v
                branches.append((p.guard, p.body, inner))
            if branches:
                self._register_sum(branches)
        elif t is A.ParOver:
            q = self._queue
            for v in self._range(p.rng, env):
                inner = dict(env)
                inner[p.var] = v
                q.append((p.body, inner))
        elif t is A.Bang:
            self._queue.append((p.body, env))
            self.next_queue.append((p, env))
        elif t is A.Star:
            d = star_delay(self.star_policy, self.rng, self._star_draws)
            self._star_draws += 1
            if d == 0:
                self._queue.append((p.body, env))
            else:
                self.delayed.setdefault(self.unit + d, []).append((p.body, env))
        elif t is A.Local:
            inner = dict(env)
            for v in p.vars:
                init = INT64 if v.lo is None else FDDomain.range(v.lo, v.hi)
                inner[v.name] = LocalRef(next(self._local_ids), v.name, init)
            self._queue.append((p.body, inner))
        elif t is A.NativeCall:
            self._native(p, env, defer=True)
        elif t is A.Skip:
            pass
        else:
            raise TypeError(f"not a process: {p!r}")

    def _register_sum(self, branches) -> None:
        store = self.store
        inst = _SumInst(len(self._sums), [])
        self._sums.append(inst)
        enabled = False
        for guard, body, env in branches:
            c = self.resolve(guard, env)
            b = store.reify(c)
            inst.branches.append((b, c, body, env))
            self._sum_by_guard.setdefault(b, []).append(inst)
            if store.value(b) == 1:
                enabled = True
        if enabled:
            self._enabled.add(inst.id)

    def _call(self, p: A.Call, env) -> None:
        d = self.defs.get(p.name)
        if d is None:
            raise UnknownDefinition(f"no definition named {p.name!r}")
        if len(d.params) != len(p.args):
            raise ArityMismatch(f"{p.name} takes {len(d.params)} argument(s), got {len(p.args)}")
        values = []
        for a in p.args:
            if type(a) is A.Name and isinstance(env.get(a.id), LocalRef):
                values.append(env[a.id])
            else:
                values.append(self._int(a, env))
        self._rec.calls.append(
            f"{p.name}({', '.join(v.name if isinstance(v, LocalRef) else str(v) for v in values)})")
        self._queue.append((d.body, dict(zip(d.params, values))))

    # oracle bridge -------------------------------------------------------

    def _native(self, p: A.NativeCall, env, defer: bool) -> bool:
        arg = self._expr(p.args[0], env)
        d, _ = self.store._vals(arg)
        v = d.value
        if v is None:
            if defer:
                self._natives.append((p, env))
            return False
        self._oracle_add(v)
        return True

    def _retry_natives(self) -> bool:
        pending, self._natives = self._natives, []
        progressed = False
        for p, env in pending:
            if self._native(p, env, defer=False):
                progressed = True
            else:
                self._natives.append((p, env))
        return progressed

    def _oracle_add(self, symbol: int) -> None:
        store = self.store
        added = self.oracle.add_symbol(symbol)
        n = self.oracle.n
        self._rec.natives.append(f"oracle.add({symbol})")
        store.assert_fact(store.cell("oracle.sigma", n), symbol)
        store.assert_fact(store.cell("oracle.S", n), self.oracle.suffix(n))
        for k, s in added:
            store.assert_fact(store.cell("oracle.delta", (k, s)), n)
            store.assert_fact(store.cell("oracle.from", k), s)


def _index_free(node, var_names) -> bool:
    """True when no index inside ``node`` reads a variable or oracle cell."""
    if isinstance(node, (A.Cell, A.OracleRef)):
        return all(_const_expr(i, var_names) for i in node.index)
    if isinstance(node, A.BinOp):
        return _index_free(node.left, var_names) and _index_free(node.right, var_names)
    if isinstance(node, A.Neg):
        return _index_free(node.operand, var_names)
    if isinstance(node, A.Rel):
        return _index_free(node.lhs, var_names) and _index_free(node.rhs, var_names)
    if isinstance(node, A.Member):
        return _index_free(node.elem, var_names) and _index_free(node.target, var_names)
    if isinstance(node, A.Conj):
        return all(_index_free(p, var_names) for p in node.parts)
    return True


def _const_expr(e, var_names) -> bool:
    """Built from literals, parameters and constants only."""
    if isinstance(e, A.Num):
        return True
    if isinstance(e, A.Name):
        return e.id not in var_names
    if isinstance(e, A.BinOp):
        return _const_expr(e.left, var_names) and _const_expr(e.right, var_names)
    if isinstance(e, A.Neg):
        return _const_expr(e.operand, var_names)
    return False


def run(model: A.ModelAst, inputs: Mapping[int, Sequence] | None = None, units: int = 10,
        seed: int = 0, star_policy: StarPolicy | None = None,
        continue_on_fail: bool = False) -> Trace:
    """Execute ``units`` time-units, feeding ``inputs[unit]`` as environment tells."""
    eng = Engine(model, seed, star_policy, continue_on_fail)
    inputs = inputs or {}
    trace = Trace()
    for _ in range(units):
        try:
            trace.records.append(eng.run_time_unit(inputs.get(eng.unit + 1, ())))
        except StoreFailed as exc:
            trace.records.append(exc.record)
            exc.trace = trace
            raise
    return trace
