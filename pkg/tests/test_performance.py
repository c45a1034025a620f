import pytest

from ntccrt.cli import execute
from ntccrt.models import load_builtin, sample_input

BUDGET_MS = 30.0


@pytest.mark.parametrize("model,units", [("ccfomi", 300), ("stress", 100)])
def test_mean_unit_latency_under_budget(model, units):
    m = load_builtin(model)
    # warm-up run so imports and first-touch costs do not count
    execute(m, sample_input(model), 5, seed=0)
    _, stats, failure = execute(m, sample_input(model), units, seed=0, timed=True)
    assert failure is None
    assert len(stats.latencies_ms) == units
    print(f"{model}: mean {stats.mean:.2f} ms, p95 {stats.p95:.2f} ms, "
          f"max processes {max(stats.processes)}")
    assert stats.mean < BUDGET_MS


def test_stress_model_has_several_hundred_processes():
    _, stats, _ = execute(load_builtin("stress"), None, 3, seed=0, timed=True)
    assert min(stats.processes) >= 500
