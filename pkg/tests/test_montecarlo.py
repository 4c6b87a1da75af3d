import csv
import io
import json
import math

import pytest

from antrw.graph import cycle, complete
from antrw.montecarlo import (CSV_COLUMNS, ExperimentSpec, binomial, exact_turn_probability,
                              path_distribution, run_experiment, summarize)
from antrw.circuits import TrapObserver
from antrw.walker import RngStream, WalkerState, run

SIG1 = 0.73105857863000487925


def test_path_distribution_sums_to_one():
    for g in (cycle(3), complete(4)):
        d = path_distribution(WalkerState.fresh(g), 4)
        assert math.fsum(d.values()) == pytest.approx(1.0, abs=1e-14)
        assert all(len(p) == 5 for p in d)


def test_exact_one_turn_probability():
    g = cycle(3)
    p = exact_turn_probability(g, (0, 1, 2), 1, 1.0)
    d = path_distribution(WalkerState.fresh(g), 3)
    assert p == pytest.approx(d[(0, 1, 2, 0)] + d[(0, 2, 1, 0)], abs=1e-15)
    assert p == pytest.approx(SIG1 ** 2, abs=1e-15)
    assert p >= 1 / 27


def test_spec_validation_happens_first():
    bad = [
        dict(kind="nope"),
        dict(kind="lln", trials=0),
        dict(kind="trap_census", epsilon=1.5),
        dict(kind="escape_decay", graph="zdball:2,15", radii=[]),
        dict(kind="escape_decay", graph="zdball:2,15", radii=[6, 3]),
        dict(kind="lln", beta=0.0),
        dict(kind="trap_census", beta=-1.0),
        dict(kind="coupling", radii=[1], jobs=0),
    ]
    for kw in bad:
        with pytest.raises(ValueError):
            run_experiment(ExperimentSpec(**kw))
    with pytest.raises(ValueError):
        run_experiment(ExperimentSpec("coupling", graph="zdball:2,5", radii=[3, 5]))


def test_binomial_standard_error():
    b = binomial(30, 100)
    assert b["p"] == 0.3 and b["se"] == pytest.approx(math.sqrt(0.3 * 0.7 / 100))
    assert binomial(10, 10)["se"] == 0.0


def test_reproducible_serialisation():
    spec = dict(kind="trap_census", graph="torus:3x3", trials=30, seed=5)
    a = run_experiment(ExperimentSpec(**spec))
    b = run_experiment(ExperimentSpec(**spec))
    assert a.to_json() == b.to_json() and a.to_csv() == b.to_csv()


def test_jobs_do_not_change_results():
    spec = dict(kind="trap_census", graph="complete:4", trials=24, seed=2)
    one = run_experiment(ExperimentSpec(**spec))
    many = run_experiment(ExperimentSpec(**spec, jobs=3))
    assert one.to_json() == many.to_json() and one.to_csv() == many.to_csv()


def test_trial_order_is_irrelevant():
    g = complete(4)
    recs = [run(WalkerState.fresh(g), RngStream(1, i), 10_000, [TrapObserver()]) for i in range(20)]
    fwd, back = summarize(recs), summarize(recs[::-1])
    assert fwd.aggregates == back.aggregates


def test_summarize_edge_cases():
    with pytest.raises(ValueError):
        summarize([])
    g = cycle(3)
    recs = [run(WalkerState.fresh(g), RngStream(0, i), 100_000, [TrapObserver()]) for i in range(10)]
    agg = summarize(recs).aggregates
    assert agg["trapped"]["p"] == 1.0 and "note" in agg["trapped"]
    mixed = recs[:5] + [run(WalkerState.fresh(g), RngStream(0, i), 3) for i in range(5)]
    fr = summarize(mixed).aggregates["stop_fractions"]
    assert math.fsum(fr.values()) == 1.0 and fr["budget"] == 0.5
    with pytest.raises(ValueError):
        summarize(recs[:1] + [run(WalkerState.fresh(g, 0, 2.0), RngStream(0), 3)])


def test_lattice_circuits_are_even():
    s = run_experiment(ExperimentSpec("trap_census", graph="zdball:2,5", trials=40))
    hist = s.aggregates["circuit_length_histogram"]
    assert hist and all(int(k) % 2 == 0 and int(k) >= 4 for k in hist)


def test_csv_rows():
    s = run_experiment(ExperimentSpec("trap_census", graph="cycle:3", trials=5, seed=1))
    rows = list(csv.DictReader(io.StringIO(s.to_csv())))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert [r["trial"] for r in rows] == ["0", "1", "2", "3", "4"]
    assert all(r["stop_reason"] == "trapped" and r["circuit_len"] == "3" for r in rows)


def test_json_floats_have_ten_significant_digits():
    s = run_experiment(ExperimentSpec("lln", trials=3, max_steps=1000))
    d = json.loads(s.to_json())
    assert d["aggregates"]["limit"] == 0.4621171573


@pytest.mark.parametrize("kind,extra", [
    ("lln", dict(max_steps=2000)),
    ("turn_bound", dict(graph="cycle:3", trials=300)),
    ("escape_decay", dict(graph="zdball:2,8", radii=[2, 4, 6], trials=20)),
    ("renewal", dict(graph="cycle:3", trials=20)),
    ("coupling", dict(graph="zdball:2,6", radii=[2, 4], trials=5)),
    ("oned_equiv", dict(graph="zpath:20", trials=3, max_steps=200)),
])
def test_every_kind_runs(kind, extra):
    kw = dict(trials=10) | extra
    s = run_experiment(ExperimentSpec(kind, **kw))
    assert s.kind == kind and len(s.rows) == kw["trials"]
    json.loads(s.to_json())


def test_oned_equivalence_aggregates():
    agg = run_experiment(ExperimentSpec("oned_equiv", graph="zpath:30", trials=5, max_steps=300)).aggregates
    assert agg["max_prob_diff"] <= 1e-12 and agg["field_ok_all"] and agg["kernel_match_all"]
