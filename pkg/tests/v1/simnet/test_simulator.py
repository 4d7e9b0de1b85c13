"""
1. A single attest validator decides its only transaction
2. A split double spend under partial synchrony is decided on the lowest hash by round 1
3. Side consensus variants decide the split double spend and pass every check
4. attest gives up safety on a split double spend
5. Runs are reproducible from (scenario, seed)
6. Safety holds against every Byzantine behavior on an asynchronous network
7. Scenario files are parsed, validated and overridden
"""

import pytest

from casanova_sim.app.core.base.errors import FaultBoundError, ScenarioError
from casanova_sim.app.utils.types import ByzantineKind
from casanova_sim.app.v1.responses.trace import Trace
from casanova_sim.app.v1.services.checker import check_all, check_safety, check_stability
from casanova_sim.app.v1.services.scenarios import load_scenario, parse_scenario
from casanova_sim.app.v1.services.simulator import Simulator, run
from tests.conftest import CONFLICT_INDEX, double_spend, make_tx

ASYNC = {"mode": "async", "drop": 0.1, "duplicate": 0.1, "reorder_window": 15}


def test_single_attest_validator():
    config = double_spend(
        variant="attest", n=1, horizon=50,
        transactions=[{"payload": "solo", "conflict_index": CONFLICT_INDEX}],
    )
    trace = run(config)
    assert trace.final_dag(0).decided == {CONFLICT_INDEX: make_tx("solo").tx_hash.hex()}
    assert check_all(trace).exit_code == 0


def test_double_spend_decides_lowest_hash(scenario):
    trace = run(scenario)
    low = min(make_tx("pay-alice").tx_hash, make_tx("pay-bob").tx_hash).hex()

    for dag in trace.final_dags:
        assert dag.decided == {CONFLICT_INDEX: low}
    chosen = [r for r in trace.decisions if r.chosen is not None]
    assert {r.validator for r in chosen} == {0, 1, 2, 3}
    assert all(r.round <= 1 and r.source == "observed" for r in chosen)

    summary = check_all(trace)
    assert summary.exit_code == 0
    assert not summary.verdict("liveness").vacuous
    assert summary.statistics.decided_indices == 1


@pytest.mark.parametrize("variant", ["conflict_attest", "conflict_exclude"])
def test_side_consensus_variants(variant):
    trace = run(double_spend(variant=variant, horizon=120))
    summary = check_all(trace)
    assert summary.exit_code == 0
    decided = {dag.decided.get(CONFLICT_INDEX) for dag in trace.final_dags}
    assert len(decided) == 1 and None not in decided


def test_attest_is_unsafe_under_conflicts():
    trace = run(double_spend(variant="attest"))
    safety = check_safety(trace)
    assert not safety.holds
    assert len(safety.counterexample) == 2
    assert check_all(trace).exit_code == 1


def test_runs_are_reproducible(scenario):
    first, second = run(scenario), run(scenario)
    assert first.dumps() == second.dumps()
    assert Trace.from_lines(first.to_lines()).dumps() == first.dumps()
    assert run(scenario, seed=8).dumps() != first.dumps()


def test_decisions_stay_put(scenario):
    sim = Simulator(scenario)
    sim.run_until(150)
    early = {r.validator: r.chosen for r in sim.decisions if r.chosen is not None}
    trace = sim.run()
    assert {dag.validator: dag.decided[CONFLICT_INDEX] for dag in trace.final_dags} == early
    assert check_stability(trace).holds

    with pytest.raises(ValueError):
        sim.inject_client_tx(make_tx("too-late"), [0], 10)


@pytest.mark.parametrize("kind", [kind.value for kind in ByzantineKind])
@pytest.mark.parametrize("seed", [1, 2])
def test_async_safety_against_byzantine_validators(kind, seed):
    config = double_spend(f=1, byzantine={3: kind}, network=ASYNC, horizon=200)
    trace = run(config, seed)
    assert trace.final_dag(3).correct is False
    summary = check_all(trace)
    assert summary.verdict("liveness") is None
    assert summary.verdict("safety").holds
    assert summary.verdict("stability").holds


def test_scenario_files(tmp_path):
    path = tmp_path / "split.toml"
    path.write_text(
        'variant = "conflict_exclude"\nn = 4\nf = 1\nseed = 3\n\n'
        '[byzantine]\n3 = "silent"\n\n'
        '[network]\nmode = "partial_sync"\ndelta = 3\n\n'
        '[[transactions]]\npayload = "pay-alice"\nconflict_index = "coin-1"\nrecipients = [0, 1]\n'
    )
    config = load_scenario(path)
    assert config.byzantine == {3: ByzantineKind.SILENT}
    assert config.network.delta == 3
    assert load_scenario(path, {"seed": 9}).seed == 9

    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "missing.toml")
    with pytest.raises(ScenarioError, match="line"):
        parse_scenario("n = [")
    with pytest.raises(ScenarioError, match="byzantine"):
        parse_scenario("n = 4\nf = 1\n")
    with pytest.raises(FaultBoundError):
        parse_scenario("n = 3\nf = 1\n[byzantine]\n2 = \"silent\"\n")
    assert parse_scenario("n = 3\nf = 1\nstrict_bounds = false\n[byzantine]\n2 = \"silent\"\n").bounds_exceeded
