import io
from pathlib import Path

import pytest

from ntccrt.cli import main

GOLDEN = Path(__file__).parent / "golden"

# model, units, input
RUNS = [
    ("chord", 5, None),
    ("factorial", 8, "@sample"),
    ("ccfomi", 300, "@sample"),
    ("filters", 100, "@sample"),
    ("stress", 10, None),
]


def run_to(path, model, units, inp, seed, command="run"):
    argv = [command, model, "--units", str(units), "--seed", str(seed), "--trace", str(path)]
    if inp:
        argv += ["--input", inp]
    assert main(argv, out=io.StringIO(), err=io.StringIO()) == 0
    return path.read_bytes()


@pytest.mark.parametrize("model,units,inp", RUNS, ids=[r[0] for r in RUNS])
def test_same_seed_same_bytes(tmp_path, model, units, inp):
    a = run_to(tmp_path / "a.jsonl", model, units, inp, seed=11)
    b = run_to(tmp_path / "b.jsonl", model, units, inp, seed=11)
    assert a == b


@pytest.mark.parametrize("model,units,inp", RUNS, ids=[r[0] for r in RUNS])
def test_matches_golden_trace(tmp_path, model, units, inp):
    fresh = run_to(tmp_path / "t.jsonl", model, units, inp, seed=7)
    assert fresh == (GOLDEN / f"{model}.seed7.jsonl").read_bytes()


def test_bench_does_not_perturb_the_run(tmp_path):
    a = run_to(tmp_path / "a.jsonl", "ccfomi", 120, "@sample", seed=5)
    b = run_to(tmp_path / "b.jsonl", "ccfomi", 120, "@sample", seed=5, command="bench")
    assert a == b


def test_seed_matters(tmp_path):
    a = run_to(tmp_path / "a.jsonl", "filters", 100, "@sample", seed=1)
    b = run_to(tmp_path / "b.jsonl", "filters", 100, "@sample", seed=2)
    assert a != b
