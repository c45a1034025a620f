import pytest

from ntccrt.engine import run
from ntccrt.models import (
    PLAYER_NOTES, CheckReport, UnknownModel, check_improv_consistency, check_mutual_exclusion,
    filters_stream, load_builtin, player_stream, replay_oracle, sample_input, with_consts,
)
from ntccrt.oracle import FactorOracle
from ntccrt.trace import EventStream, Trace, TraceSchemaMismatch, UnitRecord

ALPHABET = (48, 84)


def test_unknown_model():
    with pytest.raises(UnknownModel):
        load_builtin("symphony")


def test_chord_is_a_three_unit_sequence():
    m = load_builtin("chord")
    assert run(m, units=3).outputs("pitch") == [60, 64, 67]


def test_sample_inputs():
    assert sample_input("chord") is None
    assert sample_input("ccfomi") == player_stream()
    assert sample_input("factorial") == {1: ["n = 5"]}
    assert sample_input("filters") == filters_stream(0)


def test_check_report_requires_witness_on_failure():
    with pytest.raises(ValueError):
        CheckReport("p", False)


# -- ccfomi ----------------------------------------------------------------------

def ccfomi(n=4):
    m = load_builtin("ccfomi")
    return m if n == 4 else with_consts(m, {"N": n})


@pytest.mark.parametrize("seed", range(10))
def test_improvisation_is_consistent_with_the_oracle(seed):
    trace = run(ccfomi(), player_stream(), units=60, seed=seed)
    fo = FactorOracle.build(PLAYER_NOTES, ALPHABET)
    report = check_improv_consistency(trace, fo, wait=4)
    assert report.passed, report
    assert replay_oracle(trace, ALPHABET) == fo
    outs = [v for v in trace.outputs("out") if v is not None]
    assert outs and set(outs) <= set(PLAYER_NOTES)
    # once the improviser walks past the last learned note it waits for more input
    last = max(int(c[7:-1]) for r in trace for c in r.calls if c.startswith("IMPROV("))
    if last == len(PLAYER_NOTES) + 1:
        assert trace[-1].calls[-1] == f"IMPROV({last})" and "out" not in trace[-1].outputs


def test_abb_player_with_n_2():
    a, b = 60, 62
    for seed in range(10):
        trace = run(ccfomi(2), player_stream([a, b, b]), units=25, seed=seed)
        fo = FactorOracle.build([a, b, b], ALPHABET)
        report = check_improv_consistency(trace, fo, wait=2)
        assert report.passed, report
        assert set(trace.outputs("out")) - {None} <= {a, b}


def test_no_oracle_growth_without_go():
    events = EventStream({u: [f"note = {n}"] for u, n in enumerate(PLAYER_NOTES, 1)})
    trace = run(ccfomi(), events, units=25)
    assert all(r.natives == [] for r in trace)
    assert all(r.outputs.get("out") is None for r in trace)


def test_sync_gating_with_lagging_go():
    # notes every unit, but go trails by three units
    events = EventStream({u: [f"note = {n}", f"go = {max(u - 3, 0)}"]
                          for u, n in enumerate(PLAYER_NOTES, 1)})
    trace = run(ccfomi(), events, units=30, seed=1)
    learned = 0
    for r in trace:
        learned += len(r.natives)
        go = r.outputs.get("go")
        if r.natives:
            assert go is not None and learned <= go
    assert learned == len(PLAYER_NOTES) - 3
    fo = replay_oracle(trace, ALPHABET)
    assert check_improv_consistency(trace, fo, wait=4).passed


def test_sync_reinstalls_itself_until_go_allows():
    events = EventStream({1: ["note = 60", "go = 1"], 3: ["note = 62", "go = 2"],
                          5: ["note = 64", "go = 3"]})
    trace = run(ccfomi(), events, units=6)
    syncs = [[c for c in r.calls if c.startswith("SYNC")] for r in trace]
    assert syncs == [["SYNC(1)"], ["SYNC(2)"], ["SYNC(2)"], ["SYNC(3)"], ["SYNC(3)"],
                     ["SYNC(4)"]]
    assert [len(r.natives) for r in trace] == [1, 0, 1, 0, 1, 0]


@pytest.mark.parametrize("n", [1, 4, 6])
def test_wait_gate(n):
    trace = run(ccfomi(n), player_stream(), units=30, seed=2)
    outs = trace.outputs("out")
    first = next(i for i, v in enumerate(outs, 1) if v is not None)
    assert first == n + 1  # go reaches n in unit n; IMPROV speaks one unit later


def test_forged_symbol_outside_from_set_fails():
    fo = FactorOracle.build([60, 62, 62], ALPHABET)
    recs = [UnitRecord(1, calls=["IMPROV(1)"]),
            UnitRecord(2, calls=["IMPROV(2)"], outputs={"out": 70})]
    report = check_improv_consistency(Trace(recs), fo)
    assert not report.passed and report.unit == 2 and "70" in report.witness


def test_forged_early_learning_fails():
    fo = FactorOracle.build([60], ALPHABET)
    recs = [UnitRecord(1, tells=["note = 60"], natives=["oracle.add(60)"])]
    report = check_improv_consistency(Trace(recs), fo)
    assert not report.passed and report.unit == 1


def test_improv_checker_is_pure():
    trace = run(ccfomi(), player_stream(), units=40, seed=5)
    fo = FactorOracle.build(PLAYER_NOTES, ALPHABET)
    assert check_improv_consistency(trace, fo) == check_improv_consistency(trace, fo)


# -- filters ---------------------------------------------------------------------

def idle_env(units, **overrides):
    ev = EventStream()
    for u in range(1, units + 1):
        ev[u] = [f"input[{i}] = 0" for i in range(1, 5)] + ["end[1] = 0", "end[2] = 0"]
    for key, units_on in overrides.items():
        name, idx = key.split("_")
        for u in units_on:
            ev[u] = [t for t in ev[u] if not t.startswith(f"{name}[{idx}]")]
            ev[u].append(f"{name}[{idx}] = 1")
    return ev


@pytest.mark.parametrize("seed", range(10))
def test_mutual_exclusion_under_random_traffic(seed):
    trace = run(load_builtin("filters"), filters_stream(seed, 100), units=100, seed=seed)
    report = check_mutual_exclusion(trace)
    assert report.passed, report
    assert any("BusyFilter" in c for r in trace for c in r.calls)


def test_single_waiter_gets_object_next_unit():
    trace = run(load_builtin("filters"), idle_env(4, input_1=[1]), units=4)
    assert "WaitingFilter(1, 1)" in trace[0].calls
    assert trace.outputs("work[1]")[:2] == [None, 1]
    assert "BusyObject(1)" in trace[2].calls and "BusyFilter(1, 1)" in trace[2].calls


def test_two_requests_same_unit_exactly_one_proceeds():
    winners = set()
    for seed in range(12):
        trace = run(load_builtin("filters"), idle_env(6, input_1=[1], input_3=[1]), units=6,
                    seed=seed)
        assert check_mutual_exclusion(trace).passed
        w = trace.outputs("work[1]")[1]
        assert w in (1, 3)
        loser = 4 - w
        assert f"WaitingFilter({loser}, 1)" in trace[4].calls
        winners.add(w)
    assert winners == {1, 3}


def test_waiting_filter_retells_membership_until_served():
    trace = run(load_builtin("filters"), idle_env(6, input_1=[1], input_3=[1]), units=6, seed=0)
    loser = 4 - trace.outputs("work[1]")[1]
    for r in trace[1:]:
        assert f"WaitingFilter({loser}, 1)" in r.calls


def test_object_released_then_handed_over():
    ev = idle_env(8, input_1=[1], input_3=[1], end_1=[4])
    trace = run(load_builtin("filters"), ev, units=8, seed=0)
    first = trace.outputs("work[1]")[1]
    second = trace.outputs("work[1]")[3]
    assert {first, second} == {1, 3}
    assert "BusyFilter(%d, 1)" % second in trace[4].calls
    assert check_mutual_exclusion(trace).passed


def test_empty_trace_passes():
    assert check_mutual_exclusion(Trace()).passed


def test_forged_double_busy_fails_with_witness():
    recs = [UnitRecord(1), UnitRecord(2, calls=["BusyFilter(1, 1)", "BusyFilter(3, 1)"])]
    report = check_mutual_exclusion(Trace(recs))
    assert not report.passed and report.unit == 2
    assert "[1, 3]" in report.witness


def test_forged_reassignment_while_busy_fails():
    recs = [UnitRecord(1, calls=["IdleObject(1)"], outputs={"work[1]": 1}),
            UnitRecord(2, calls=["BusyObject(1)"], outputs={"work[1]": 3})]
    report = check_mutual_exclusion(Trace(recs))
    assert not report.passed and report.unit == 2


def test_schema_mismatch():
    with pytest.raises(TraceSchemaMismatch):
        check_mutual_exclusion([{"unit": 1}])
    with pytest.raises(TraceSchemaMismatch):
        check_mutual_exclusion([UnitRecord(2)])


def test_improviser_waits_for_unlearned_material_then_resumes():
    notes = [60, 62, 64, 65]
    events = player_stream(notes)
    events[30] = ["note = 67", "go = 5"]
    fo = FactorOracle.build(notes + [67], ALPHABET)
    stalled_runs = resumed = 0
    for seed in range(12):
        trace = run(ccfomi(), events, units=40, seed=seed)
        assert check_improv_consistency(trace, fo, wait=4).passed
        stalled = [r.unit for r in trace if "IMPROV(5)" in r.calls and r.unit < 30]
        if not stalled:
            continue
        stalled_runs += 1
        # parked at position 5: nothing to say until S[5] is learned in unit 30
        assert stalled == list(range(stalled[0], 30))
        assert all(trace[u - 1].outputs.get("out") is None for u in stalled[1:])
        resumed += any(r.outputs.get("out") is not None for r in trace[30:])
    assert stalled_runs and resumed
