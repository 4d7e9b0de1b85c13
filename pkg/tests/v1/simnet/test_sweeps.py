"""
1. With delayed links, one validator settles an index through an observed set and another through side consensus, on the same value
2. conflict_attest keeps every correct validator on one recorded value across seeds and splits
3. Decided runs keep their Chosen values when continued under a reseeded network
4. Every index decides in time under partial synchrony for f in {0, 1}, delta in {1, 5} and GST in {0, 50}
5. Without faults and with GST = 0 nearly every run decides by round 1
6. Chosen values always come from the alternatives known at the time
7. Full-size batches: async safety per Byzantine behavior, liveness, continuations and dual-path runs
"""

import pytest

from casanova_sim.app.utils.types import ByzantineKind
from casanova_sim.app.v1.services.bench import bench
from casanova_sim.app.v1.services.checker import (
    check_all, check_eventual_choice, check_lemma1, check_liveness, check_safety, check_stability
)
from casanova_sim.app.v1.services.simulator import Simulator, run
from tests.conftest import CONFLICT_INDEX, double_spend, dual_path, make_tx

HARSH_ASYNC = {"mode": "async", "drop": 0.3, "duplicate": 0.1, "reorder_window": 20}
ASYNC = {"mode": "async", "drop": 0.1, "duplicate": 0.1, "reorder_window": 15}
TOWARDS_ALICE = [
    {"payload": "pay-alice", "conflict_index": CONFLICT_INDEX, "recipients": [0, 1, 2], "at": 0},
    {"payload": "pay-bob", "conflict_index": CONFLICT_INDEX, "recipients": [3], "at": 0},
]


def synchrony(f: int, delta: int, gst: int, **overrides):
    byzantine = {3: "silent"} if f else {}
    network = {"mode": "partial_sync", "delta": delta, "gst": gst}
    return double_spend(f=f, byzantine=byzantine, network=network, horizon=600, **overrides)


def first_chosen(trace, v: int):
    return next(r for r in trace.decisions if r.validator == v and r.chosen is not None)


# ---------------- DUAL PATH ----------------

@pytest.mark.parametrize("seed", range(10))
def test_dual_path_decisions_agree(seed):
    trace = run(dual_path(), seed)
    alice = make_tx("pay-alice").tx_hash.hex()

    lemma1 = check_lemma1(trace)
    assert lemma1.holds and not lemma1.vacuous
    assert lemma1.stats["dual_path_instances"] > 0
    assert check_safety(trace).holds

    assert first_chosen(trace, 0).source == "observed"
    assert first_chosen(trace, 2).source == "side"
    assert {dag.decided[CONFLICT_INDEX] for dag in trace.final_dags if dag.correct} == {alice}


def test_dual_path_needs_the_delays():
    config = dual_path()
    config.network.links = []
    lemma1 = check_lemma1(run(config))
    assert lemma1.holds
    assert lemma1.stats["dual_path_instances"] == 0


# ---------------- CONFLICT ATTEST ----------------

@pytest.mark.parametrize("transactions", [None, TOWARDS_ALICE], ids=["split", "towards-alice"])
@pytest.mark.parametrize("seed", range(10))
def test_conflict_attest_stays_safe(seed, transactions):
    overrides = {"variant": "conflict_attest", "horizon": 120}
    if transactions is not None:
        overrides["transactions"] = transactions
    trace = run(double_spend(**overrides), seed)

    summary = check_all(trace)
    assert summary.verdict("safety").holds
    assert summary.verdict("stability").holds
    assert summary.verdict("eventual_choice").holds
    assert summary.exit_code == 0
    decided = {dag.decided.get(CONFLICT_INDEX) for dag in trace.final_dags}
    assert len(decided) == 1 and None not in decided


# ---------------- CONTINUATIONS ----------------

def _continue(config, seed: int, until: int):
    sim = Simulator(config, seed)
    sim.run_until(until)
    early = {}
    for record in sim.decisions:
        if record.chosen is not None:
            early.setdefault((record.validator, record.conflict_index), record.chosen)
    sim.reseed_network(seed + 1000)
    return early, sim.run()


@pytest.mark.parametrize("seed", range(10))
def test_continuation_under_partial_synchrony(seed):
    config = double_spend(horizon=150 + 10 * 10)
    early, trace = _continue(config, seed, 150)

    assert early
    for (v, i), chosen in early.items():
        assert trace.final_dag(v).decided[i] == chosen
    assert check_stability(trace).holds
    assert check_safety(trace).holds


@pytest.mark.parametrize("kind", [kind.value for kind in ByzantineKind])
@pytest.mark.parametrize("seed", range(3))
def test_continuation_under_asynchrony(kind, seed):
    config = double_spend(f=1, byzantine={3: kind}, network=ASYNC, horizon=200 + 10 * 10)
    early, trace = _continue(config, seed, 200)

    for (v, i), chosen in early.items():
        if trace.final_dag(v).correct:
            assert trace.final_dag(v).decided[i] == chosen
    assert check_stability(trace).holds
    assert check_safety(trace).holds


# ---------------- LIVENESS ----------------

@pytest.mark.parametrize("gst", [0, 50])
@pytest.mark.parametrize("delta", [1, 5])
@pytest.mark.parametrize("f", [0, 1])
@pytest.mark.parametrize("seed", range(3))
def test_liveness_under_partial_synchrony(f, delta, gst, seed):
    trace = run(synchrony(f, delta, gst), seed)

    liveness = check_liveness(trace)
    assert liveness.holds and not liveness.vacuous
    assert liveness.stats["indices"] == 1
    assert check_safety(trace).holds
    assert check_eventual_choice(trace).holds


def test_most_runs_decide_by_round1():
    report = bench(double_spend(), runs=40, first_seed=0)
    assert report.failing_seeds == []
    assert report.decided_by_round1 >= 0.95


@pytest.mark.parametrize("kind", [kind.value for kind in ByzantineKind])
def test_eventual_choice_against_byzantine_validators(kind):
    for seed in range(5):
        trace = run(double_spend(f=1, byzantine={3: kind}, network=HARSH_ASYNC, horizon=200), seed)
        assert check_eventual_choice(trace).holds


# ---------------- FULL SIZE ----------------

@pytest.mark.slow
@pytest.mark.parametrize("kind", [kind.value for kind in ByzantineKind])
def test_async_safety_batch(kind):
    config = double_spend(f=1, byzantine={3: kind}, network=HARSH_ASYNC, horizon=200)
    report = bench(config, runs=1000, first_seed=0)
    assert report.violations == {}
    assert report.failing_seeds == []


@pytest.mark.slow
@pytest.mark.parametrize("gst", [0, 50])
@pytest.mark.parametrize("delta", [1, 5])
@pytest.mark.parametrize("f", [0, 1])
def test_liveness_batch(f, delta, gst):
    report = bench(synchrony(f, delta, gst), runs=200, first_seed=0)
    assert report.failing_seeds == []
    if f == 0 and gst == 0:
        assert report.decided_by_round1 >= 0.95


@pytest.mark.slow
def test_continuation_batch():
    report = bench(double_spend(), runs=200, first_seed=0, continue_for=10)
    assert report.continued_for == 10
    assert report.failing_seeds == []


@pytest.mark.slow
def test_dual_path_batch():
    report = bench(dual_path(), runs=200, first_seed=0)
    assert report.failing_seeds == []
    assert report.dual_path_runs == 200
