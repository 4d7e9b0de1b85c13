"""
1. Safety fails on the first pair of correct validators choosing differently, with that pair as counterexample
2. Byzantine validators' answers and bounds-exceeded runs do not count as violations
3. Stability fails when a Chosen value changes or disappears
4. Eventual choice fails when the chosen value is not among the known alternatives
5. Observed-set and side consensus decisions must agree; no dual decisions is vacuous
6. Liveness deadlines, latencies and the async refusal
7. Verdicts and traces validate their records
"""

import pytest
from pydantic import ValidationError

from casanova_sim.app.core.base.errors import TraceError
from casanova_sim.app.v1.responses.trace import BlockRecord, DecisionChange, FinalDag, Trace, TraceHeader
from casanova_sim.app.v1.responses.verdict import PropertyName, Verdict
from casanova_sim.app.v1.services.checker import (
    check_all, check_eventual_choice, check_lemma1, check_liveness, check_safety, check_stability,
    decision_latencies, liveness_deadline
)
from tests.conftest import CONFLICT_INDEX

ALTERNATIVES = ["aa", "bb"]


def header(**overrides) -> TraceHeader:
    data = dict(
        variant="casanova", n=4, f=1, seed=0, horizon=100, block_interval=10, round_length=1,
        network_mode="partial_sync", delta=2, gst=0, byzantine={"3": "silent"},
    )
    data.update(overrides)
    return TraceHeader(**data)


def change(validator, tick, chosen=None, source="observed", alternatives=ALTERNATIVES, index=CONFLICT_INDEX):
    return DecisionChange(
        event=tick, tick=tick, validator=validator, conflict_index=index,
        chosen=chosen, round=0 if chosen else None, source=source if chosen else None,
        alternatives=list(alternatives),
    )


def forged(*decisions, **overrides) -> Trace:
    blocks = [BlockRecord(
        tick=10, block_hash="b1", creator=0, seq=1, label="0:1",
        transactions=[{"tx_hash": "aa", "conflict_index": CONFLICT_INDEX}],
    )]
    final_dags = [FinalDag(validator=v, correct=v != 3, blocks=["b1"]) for v in range(4)]
    return Trace(header=header(**overrides), decisions=list(decisions), blocks=blocks, final_dags=final_dags)


def test_safety_violation():
    trace = forged(change(0, 20, "aa"), change(3, 21, "bb"), change(1, 22, "bb"))
    verdict = check_safety(trace)
    assert not verdict.holds
    assert [r["validator"] for r in verdict.counterexample] == [0, 1]
    assert "validator 1 chose bb" in verdict.detail
    assert check_all(trace, horizon=50).exit_code == 1


def test_safety_holds_and_counts_indices():
    trace = forged(change(0, 20, "aa"), change(1, 22, "aa"), change(3, 23, "bb"))
    verdict = check_safety(trace)
    assert verdict.holds
    assert verdict.counterexample is None
    assert verdict.stats == {"decided_indices": 1}


def test_bounds_exceeded_violations_are_not_counted():
    trace = forged(change(0, 20, "aa"), change(1, 22, "bb"), network_mode="async", bounds_exceeded=True)
    summary = check_all(trace)
    assert summary.bounds_exceeded
    assert not summary.verdict(PropertyName.SAFETY).holds
    assert summary.violations == []
    assert summary.exit_code == 0


def test_stability():
    assert check_stability(forged(change(0, 20), change(0, 30, "aa"), change(0, 40, "aa"))).holds

    flipped = check_stability(forged(change(0, 20, "aa"), change(0, 30, "bb")))
    assert not flipped.holds
    assert [r["tick"] for r in flipped.counterexample] == [20, 30]

    assert not check_stability(forged(change(0, 20, "aa"), change(0, 30))).holds


def test_eventual_choice():
    assert check_eventual_choice(forged(change(0, 20), change(0, 30, "aa"))).holds
    verdict = check_eventual_choice(forged(change(0, 20), change(0, 30, "cc")))
    assert not verdict.holds
    assert len(verdict.counterexample) == 2


def test_lemma1():
    agree = forged(change(0, 20, "aa", "observed"), change(1, 30, "aa", "side"), variant="conflict_exclude")
    assert check_lemma1(agree).holds
    assert check_lemma1(agree).stats == {"dual_path_instances": 1}

    disagree = forged(change(0, 20, "aa", "observed"), change(1, 30, "bb", "side"), variant="conflict_exclude")
    assert not check_lemma1(disagree).holds
    assert check_all(disagree, horizon=50).verdict(PropertyName.LEMMA1) is not None

    one_path = check_lemma1(forged(change(0, 20, "aa", "side")))
    assert one_path.holds and one_path.vacuous


def test_liveness_deadlines():
    assert liveness_deadline(header()) == 12 + 10 * 45 + 2
    assert liveness_deadline(header(variant="conflict_attest")) == 72 + 20 + 2
    assert liveness_deadline(header(gst=50)) == 62 + 10 * 45 + 2


def test_liveness():
    decided = forged(change(0, 15), change(0, 20, "aa"), change(1, 25, "aa"), change(2, 30, "aa"))
    verdict = check_liveness(decided, horizon=50)
    assert verdict.holds and not verdict.vacuous
    assert verdict.stats["latency"] == {CONFLICT_INDEX: 15}
    assert decision_latencies(decided) == {CONFLICT_INDEX: 15}

    stalled = forged(change(0, 20, "aa"))
    verdict = check_liveness(stalled, horizon=50)
    assert not verdict.holds
    assert verdict.counterexample == [{"validator": 1, "conflict_index": CONFLICT_INDEX, "deadline": 50}]

    assert check_liveness(stalled).vacuous
    assert check_liveness(Trace(header=header())).vacuous

    with pytest.raises(TraceError):
        check_liveness(forged(network_mode="async"))


def test_verdict_records():
    with pytest.raises(ValidationError):
        Verdict(property="safety", holds=False)
    with pytest.raises(ValidationError):
        Verdict(property="safety", holds=True, counterexample=[{}])


def test_trace_lines(tmp_path):
    trace = forged(change(0, 20, "aa"))
    path = tmp_path / "trace.jsonl"
    trace.write(path)
    assert Trace.read(path).dumps() == trace.dumps()

    with pytest.raises(TraceError, match=":2:"):
        Trace.from_lines([trace.header.to_line(), "{not json"])
    with pytest.raises(TraceError, match="no header"):
        Trace.from_lines([change(0, 20).to_line()])
    with pytest.raises(TraceError):
        Trace.read(tmp_path / "missing.jsonl")
