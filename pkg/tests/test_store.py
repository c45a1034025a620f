import itertools
import operator
import random

import pytest
from hypothesis import given, settings, strategies as st

from ntccrt.domain import FDDomain
from ntccrt.store import (
    Arith, ArithmeticOverflow, Between, Conj, Entailment, Eq, Ge, Gt, InvalidDomain, Le, Lit,
    Lt, Member, Neq, PersistentConflict, QueryOnFailedStore, Rel, Status, Store, TellResult,
)

T, F, U = Entailment.TRUE, Entailment.FALSE, Entailment.UNKNOWN


# -- an independent reference -------------------------------------------------

OPS = {"=": operator.eq, "!=": operator.ne, "<": operator.lt, "<=": operator.le,
       ">": operator.gt, ">=": operator.ge}
ARITH = {"+": operator.add, "-": operator.sub, "*": operator.mul}


def ref_eval(e, env):
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Arith):
        return ARITH[e.op](ref_eval(e.left, env), ref_eval(e.right, env))
    return env[e]


def ref_holds(c, env, members):
    """True / False / None (None = depends on how a set grows)."""
    if isinstance(c, Rel):
        return OPS[c.op](ref_eval(c.lhs, env), ref_eval(c.rhs, env))
    if isinstance(c, Member):
        return True if ref_eval(c.elem, env) in members.get(c.set, ()) else None
    results = [ref_holds(p, env, members) for p in c.parts]
    if any(r is False for r in results):
        return False
    if all(r is True for r in results):
        return True
    return None


def ref_entails(c, domains, members):
    """Exhaustive walk of the product of the domains of the variables in ``c``."""
    vs = list(dict.fromkeys(ref_vars(c, [])))
    seen = set()
    for combo in itertools.product(*(sorted(domains[v]) for v in vs)):
        seen.add(ref_holds(c, dict(zip(vs, combo)), members))
    if seen <= {True}:
        return T
    if seen == {False}:
        return F
    return U


def ref_vars(c, acc):
    if isinstance(c, Rel):
        for side in (c.lhs, c.rhs):
            _expr_vars(side, acc)
    elif isinstance(c, Member):
        _expr_vars(c.elem, acc)
    elif isinstance(c, Conj):
        for p in c.parts:
            ref_vars(p, acc)
    return acc


def _expr_vars(e, acc):
    if isinstance(e, Arith):
        _expr_vars(e.left, acc)
        _expr_vars(e.right, acc)
    elif not isinstance(e, Lit):
        acc.append(e)


# -- random stores ------------------------------------------------------------

def random_expr(rng, vs):
    r = rng.random()
    if r < 0.55:
        return rng.choice(vs)
    if r < 0.75:
        return Lit(rng.randint(-2, 7))
    return Arith(rng.choice("+-*"), rng.choice(vs), Lit(rng.randint(-2, 3)))


def random_rel(rng, vs):
    return Rel(rng.choice(list(OPS)), random_expr(rng, vs), random_expr(rng, vs))


def random_query(rng, vs, sets):
    r = rng.random()
    if r < 0.15 and sets:
        return Member(rng.choice(vs), rng.choice(sets))
    if r < 0.3:
        return Conj(tuple(random_rel(rng, vs) for _ in range(2)))
    return random_rel(rng, vs)


def build_random_store(seed):
    """Up to 4 variables and at most 64 domain values in total."""
    rng = random.Random(seed)
    s = Store()
    vs = []
    budget = 64
    for i in range(rng.randint(1, 4)):
        width = rng.randint(1, min(16, budget - (3 - i)))
        lo = rng.randint(-3, 6)
        budget -= width
        vs.append(s.new_fd_var(f"x{i}", lo, lo + width - 1))
    sets = [s.new_set_var("S")]
    for _ in range(rng.randint(0, 3)):
        s.tell(random_rel(rng, vs))
    for _ in range(rng.randint(0, 2)):
        s.tell(Member(Lit(rng.randint(-1, 6)), sets[0]))
    s.propagate()
    return s, vs, sets, rng


def test_entailment_agrees_with_enumeration_on_500_stores():
    checked = 0
    for seed in range(1000):
        s, vs, sets, rng = build_random_store(seed)
        if s.is_failed():
            continue
        domains = {v: set(s.domain(v)) for v in vs}
        assert sum(len(d) for d in domains.values()) <= 64
        members = {sets[0]: set(s.members(sets[0]))}
        for _ in range(4):
            q = random_query(rng, vs, sets)
            assert s.entails(q) == ref_entails(q, domains, members), (seed, str(q), domains)
        checked += 1
    assert checked >= 500


def test_propagation_never_drops_a_solution():
    for seed in range(300):
        rng = random.Random(seed)
        s = Store()
        init = {}
        vs = []
        for i in range(rng.randint(1, 3)):
            lo = rng.randint(-3, 4)
            v = s.new_fd_var(f"x{i}", lo, lo + rng.randint(0, 5))
            init[v] = set(s.domain(v))
            vs.append(v)
        told = [random_rel(rng, vs) for _ in range(rng.randint(1, 3))]
        for c in told:
            s.tell(c)
        s.propagate()
        for combo in itertools.product(*(sorted(init[v]) for v in vs)):
            env = dict(zip(vs, combo))
            if all(ref_holds(c, env, {}) for c in told):
                assert not s.is_failed(), (seed, [str(c) for c in told])
                assert all(env[v] in s.domain(v) for v in vs)


def test_pitch_between_40_and_59_entails_not_60():
    s = Store()
    pitch = s.new_fd_var("pitch", 0, 127)
    s.tell(Gt(pitch, 40))
    s.tell(Lt(pitch, 59))
    assert s.propagate() is Status.STABLE
    assert s.domain(pitch) == FDDomain.range(41, 58)
    assert s.entails(Neq(pitch, 60)) is T


# -- operation examples -------------------------------------------------------

def test_new_fd_var_domains():
    s = Store()
    assert len(s.domain(s.new_fd_var("pitch", 0, 127))) == 128
    assert -1 in s.domain(s.new_fd_var("S", -1, 10))
    assert s.value(s.new_fd_var("x", 5, 5)) == 5
    with pytest.raises(InvalidDomain):
        s.new_fd_var("bad", 3, 2)


def test_tell_examples():
    s = Store()
    p1 = s.new_fd_var("pitch1", 0, 127)
    assert s.tell(Eq(p1, 60)) is TellResult.OK
    assert s.entails(Eq(p1, 60)) is T
    p2 = s.new_fd_var("pitch2", 0, 127)
    s.tell(Between(60, p2, 100))
    assert s.domain(p2) == FDDomain.range(61, 99)
    x = s.new_fd_var("x", 0, 9)
    s.tell(Eq(x, 3))
    assert s.tell(Eq(x, 4)) is TellResult.INCONSISTENT
    assert s.is_failed()


def test_failure_is_absorbing_and_queries_raise():
    s = Store()
    x = s.new_fd_var("x", 0, 9)
    s.tell(Lt(x, 3))
    s.tell(Gt(x, 5))
    assert s.propagate() is Status.FAILED
    assert s.tell(Eq(x, 1)) is TellResult.INCONSISTENT
    with pytest.raises(QueryOnFailedStore):
        s.entails(Eq(x, 1))


def test_entails_examples():
    s = Store()
    x = s.new_fd_var("x", 0, 9)
    assert s.entails(Eq(x, 5)) is U
    s.tell(Eq(x, 3))
    assert s.entails(Eq(x, 4)) is F


def test_empty_store_propagates_to_stable():
    s = Store()
    x = s.new_fd_var("x", 0, 3)
    assert s.propagate() is Status.STABLE
    assert s.domain(x) == FDDomain.range(0, 3)


def test_var_var_propagation():
    s = Store()
    a, b = s.new_fd_var("a", 0, 10), s.new_fd_var("b", 3, 5)
    s.tell(Lt(a, b))
    assert s.domain(a) == FDDomain.range(0, 4)
    c = s.new_fd_var("c", 3, 9)
    s.tell(Eq(a, c))
    assert s.domain(a) == s.domain(c) == FDDomain.range(3, 4)
    s.tell(Eq(a, b))
    assert s.is_failed()


def test_arithmetic_expressions():
    s = Store()
    x, y = s.new_fd_var("x", 0, 20), s.new_fd_var("y", 0, 20)
    s.tell(Eq(y, Arith("*", x, Lit(3))))
    s.tell(Eq(x, 4))
    s.propagate()
    assert s.value(y) == 12


def test_overflow_is_an_error_not_wraparound():
    s = Store()
    x = s.new_fd_var("x", 2**62, 2**62)
    with pytest.raises(ArithmeticOverflow):
        s._vals(Arith("*", x, Lit(4)))


def test_set_membership_is_lower_bound_only():
    s = Store()
    w = s.new_set_var("wait")
    s.tell(Member(Lit(2), w))
    assert s.entails(Member(Lit(2), w)) is T
    assert s.entails(Member(Lit(3), w)) is U


# -- reification --------------------------------------------------------------

def test_reify_follows_entailment():
    s = Store()
    a, c = s.new_fd_var("a", 0, 9), s.new_fd_var("c", 0, 9)
    assert s.value(s.reify(Eq(a, c))) is None
    x = s.new_fd_var("x", 0, 9)
    s.tell(Eq(x, 5))
    assert s.value(s.reify(Eq(x, 5))) == 1
    y = s.new_fd_var("y", 0, 9)
    s.tell(Eq(y, 6))
    assert s.value(s.reify(Eq(y, 5))) == 0


def test_reify_is_idempotent_and_updates_on_propagate():
    s = Store()
    x = s.new_fd_var("x", 0, 9)
    b = s.reify(Ge(x, 4))
    assert s.reify(Ge(x, 4)) is b
    s.tell(Gt(x, 6))
    s.propagate()
    assert s.value(b) == 1
    assert b in s.pop_newly_true()
    assert s.pop_newly_true() == []


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6))
def test_reified_coherence_and_monotonicity(seed):
    s, vs, sets, rng = build_random_store(seed)
    if s.is_failed():
        return
    queries = [random_query(rng, vs, sets) for _ in range(4)]
    bools = [s.reify(q) for q in queries]
    before = [s.entails(q) for q in queries]
    s.tell(random_rel(rng, vs))
    if s.propagate() is Status.FAILED:
        return
    for q, b, old in zip(queries, bools, before):
        now = s.entails(q)
        if old is not U:
            assert now is old
        assert s.value(b) == {T: 1, F: 0, U: None}[now]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_propagate_twice_changes_nothing(seed):
    s, vs, _, _ = build_random_store(seed)
    first = [s.domain(v) for v in vs]
    s.propagate()
    assert [s.domain(v) for v in vs] == first


# -- persistence --------------------------------------------------------------

def test_facts_survive_reset_and_temporal_constraints_do_not():
    s = Store()
    s.declare_stream("S", -1, None, persistent=True)
    s.declare_stream("pitch", 0, 127)
    p1 = s.cell("pitch", 1)
    s.tell(Eq(p1, 60))
    s.assert_fact(s.cell("S", 0), -1)
    s.reset_for_next_unit()
    assert s.entails(Eq(p1, 60)) is U
    assert s.entails(Eq(s.cell("S", 0), -1)) is T


def test_set_fact_membership():
    s = Store()
    s.declare_stream("wait", kind="set", persistent=True)
    s.assert_fact(s.cell("wait", 1), 2)
    assert s.entails(Member(Lit(2), s.cell("wait", 1))) is T
    s.reset_for_next_unit()
    assert s.entails(Member(Lit(2), s.cell("wait", 1))) is T


def test_conflicting_fact_raises():
    s = Store()
    s.declare_stream("S", -1, None, persistent=True)
    s.assert_fact(s.cell("S", 3), 1)
    with pytest.raises(PersistentConflict):
        s.assert_fact(s.cell("S", 3), 2)


def test_cells_are_unique_and_lazy():
    s = Store()
    s.declare_stream("work", 0, 4)
    assert s.cell("work", 1) is s.cell("work", (1,))
    assert s.cell("work", 1) is not s.cell("work", 2)
    assert s.domain(s.cell("work", 99)) == FDDomain.range(0, 4)


def test_reset_on_empty_store():
    s = Store()
    assert s.reset_for_next_unit() is s
    assert s.posted == [] and s.status is Status.STABLE


def test_comparison_helpers():
    s = Store()
    x = s.new_fd_var("x", 0, 9)
    s.tell(Le(x, 4))
    s.tell(Ge(x, 4))
    assert s.value(x) == 4
