"""Safety and liveness definitions as predicates over a finished trace

Every check is a pure function of the trace. Decision records appear in
the order their events were processed, so walking them front to back
replays what every correct validator answered at each point in the run.
"""

from typing import Optional

from casanova_sim.app.core.base.errors import TraceError
from casanova_sim.app.utils.types import NetworkMode, ProtocolVariant
from casanova_sim.app.v1.responses.trace import DecisionChange, Trace, TraceHeader
from casanova_sim.app.v1.responses.verdict import DagStatistics, PropertyName, Verdict, VerdictSummary
from casanova_sim.app.v1.services.dls import DlsSchedule
from casanova_sim.app.v1.services.protocols import alternatives_bound, round_start_offset


def _slice(*records: DecisionChange) -> list[dict]:
    return [record.model_dump() for record in records]


def _verdict(trace: Trace, name: PropertyName, **kwargs) -> Verdict:
    return Verdict(property=name, bounds_exceeded=trace.bounds_exceeded, **kwargs)


# ---------------- SAFETY ----------------

def check_safety(trace: Trace) -> Verdict:
    """Holds iff no two correct validators ever choose different values for one index

    Checked at every decision record, so a divergence that is later
    reverted still counts.
    """

    correct = set(trace.correct_validators())
    first: dict[str, DecisionChange] = {}
    for record in trace.decisions:
        if record.chosen is None or record.validator not in correct:
            continue
        earlier = first.setdefault(record.conflict_index, record)
        if earlier.chosen != record.chosen:
            return _verdict(
                trace, PropertyName.SAFETY, holds=False,
                counterexample=_slice(earlier, record),
                detail=(
                    f"index {record.conflict_index!r}: validator {earlier.validator} chose {earlier.chosen[:8]} "
                    f"at tick {earlier.tick}, validator {record.validator} chose {record.chosen[:8]} "
                    f"at tick {record.tick}"
                ),
            )
    return _verdict(trace, PropertyName.SAFETY, holds=True, stats={"decided_indices": len(first)})


# ---------------- LIVENESS ----------------

def liveness_deadline(header: TraceHeader) -> int:
    """Tick by which every correct validator must have decided

    Counting starts one block interval plus one network bound after the later
    of the last injection and GST. Casanova then gets every round up to one
    past the alternatives bound; side consensus gets the first phase whose
    rounds outlast two network bounds, plus f more phases to reach a correct
    leader, plus two block intervals for the resolution to spread.
    """

    scenario = header.scenario
    last_injection = max((tx.get("at", 0) for tx in scenario.get("transactions", [])), default=0)
    start = max(last_injection, header.gst) + header.block_interval + header.delta

    if ProtocolVariant(header.variant).uses_side_protocol:
        schedule = DlsSchedule(header.n, scenario.get("dls_base", 4), scenario.get("dls_delta", 2))
        phase = schedule.at(start).phase + 1
        while schedule.round_length(phase) <= 2 * header.delta:
            phase += 1
        return schedule.phase_start(phase + header.f + 1) + 2 * header.block_interval + header.delta

    rounds = alternatives_bound(header.n, header.f) + 1
    blocks = header.round_length * round_start_offset(rounds + 1)
    return start + header.block_interval * (blocks + 1) + header.delta


def _indices(trace: Trace) -> dict[str, str]:
    """Conflict index of every transaction in some correct validator's final DAG"""

    stored = set()
    for dag in trace.final_dags:
        if dag.correct:
            stored.update(dag.blocks)
    indices = {}
    for block in trace.blocks:
        if block.block_hash in stored:
            for tx in block.transactions:
                indices[tx["tx_hash"]] = tx["conflict_index"]
    return indices


def decision_latencies(trace: Trace) -> dict[str, int]:
    """Ticks from first conflict discovery to the last correct validator's decision, per index

    Indices that never conflicted are measured from the first time any correct
    validator knew of them. Indices not decided everywhere are left out.
    """

    correct = set(trace.correct_validators())
    discovered: dict[str, int] = {}
    conflicted: dict[str, int] = {}
    decided_at: dict[str, dict[int, int]] = {}
    for record in trace.decisions:
        if record.validator not in correct:
            continue
        i = record.conflict_index
        discovered.setdefault(i, record.tick)
        if len(record.alternatives) >= 2:
            conflicted.setdefault(i, record.tick)
        if record.chosen is not None:
            decided_at.setdefault(i, {}).setdefault(record.validator, record.tick)

    latencies = {}
    for i, ticks in decided_at.items():
        if set(ticks) >= correct:
            latencies[i] = max(ticks.values()) - conflicted.get(i, discovered[i])
    return latencies


def check_liveness(trace: Trace, horizon: Optional[int] = None) -> Verdict:
    """Holds iff every index in a correct final DAG is decided by every correct validator in time

    Raises:
        TraceError: for traces of asynchronous runs, where no liveness is claimed
    """

    header = trace.header
    if NetworkMode(header.network_mode) != NetworkMode.PARTIAL_SYNC:
        raise TraceError("Liveness is only checked on partially synchronous traces")

    deadline = liveness_deadline(header) if horizon is None else horizon
    correct = trace.correct_validators()
    indices = sorted(set(_indices(trace).values()))

    chosen_by: dict[tuple[int, str], Optional[DecisionChange]] = {}
    for record in trace.decisions:
        if record.tick <= deadline:
            chosen_by[(record.validator, record.conflict_index)] = record if record.chosen is not None else None

    latencies = decision_latencies(trace)
    stats = {
        "deadline": deadline,
        "indices": len(indices),
        "latency": dict(sorted(latencies.items())),
        "max_latency": max(latencies.values(), default=0),
        "decision_rounds": sorted({r.round for r in trace.decisions if r.round is not None}),
    }

    missing = [(v, i) for i in indices for v in correct if chosen_by.get((v, i)) is None]
    if not missing:
        return _verdict(trace, PropertyName.LIVENESS, holds=True, vacuous=not indices, stats=stats)

    if header.horizon < deadline:
        return _verdict(
            trace, PropertyName.LIVENESS, holds=True, vacuous=True, stats=stats,
            detail=f"run ended at tick {header.horizon}, before the liveness deadline {deadline}",
        )

    v, i = missing[0]
    last = [r for r in trace.decisions if r.validator == v and r.conflict_index == i]
    return _verdict(
        trace, PropertyName.LIVENESS, holds=False, stats=stats,
        counterexample=_slice(*last) or [{"validator": v, "conflict_index": i, "deadline": deadline}],
        detail=f"{len(missing)} (validator, index) pairs undecided at tick {deadline}, first: validator {v} on {i!r}",
    )


# ---------------- DECISION PATHS ----------------

def check_lemma1(trace: Trace) -> Verdict:
    """Holds iff observed-set and side-consensus decisions name the same value per index

    Vacuous when no index was decided along both paths.
    """

    observed: dict[str, DecisionChange] = {}
    side: dict[str, DecisionChange] = {}
    correct = set(trace.correct_validators())
    for record in trace.decisions:
        if record.chosen is None or record.validator not in correct:
            continue
        if record.source == "observed":
            observed.setdefault(record.conflict_index, record)
        elif record.source == "side":
            side.setdefault(record.conflict_index, record)

    dual = sorted(set(observed) & set(side))
    for i in dual:
        if observed[i].chosen != side[i].chosen:
            return _verdict(
                trace, PropertyName.LEMMA1, holds=False,
                counterexample=_slice(observed[i], side[i]),
                detail=f"index {i!r}: observed set chose {observed[i].chosen[:8]}, side consensus {side[i].chosen[:8]}",
            )
    return _verdict(
        trace, PropertyName.LEMMA1, holds=True, vacuous=not dual,
        stats={"dual_path_instances": len(dual)},
    )


def check_eventual_choice(trace: Trace) -> Verdict:
    """Holds iff every chosen value is one of the alternatives known when it was chosen

    A transition from Alternatives(E) to Chosen(e) with E unchanged must
    pick e from E.
    """

    previous: dict[tuple[int, str], DecisionChange] = {}
    for record in trace.decisions:
        key = (record.validator, record.conflict_index)
        before = previous.get(key)
        previous[key] = record
        if record.chosen is None:
            continue
        unchanged = before is not None and before.chosen is None and before.alternatives == record.alternatives
        if record.chosen not in record.alternatives or (unchanged and record.chosen not in before.alternatives):
            records = (before, record) if before is not None else (record,)
            return _verdict(
                trace, PropertyName.EVENTUAL_CHOICE, holds=False,
                counterexample=_slice(*records),
                detail=f"validator {record.validator} chose {record.chosen[:8]} outside the alternatives of {record.conflict_index!r}",
            )
    return _verdict(trace, PropertyName.EVENTUAL_CHOICE, holds=True)


def check_stability(trace: Trace) -> Verdict:
    """Holds iff no correct validator's Chosen value ever changes or disappears"""

    chosen: dict[tuple[int, str], DecisionChange] = {}
    for record in trace.decisions:
        key = (record.validator, record.conflict_index)
        earlier = chosen.get(key)
        if earlier is not None and record.chosen != earlier.chosen:
            return _verdict(
                trace, PropertyName.STABILITY, holds=False,
                counterexample=_slice(earlier, record),
                detail=f"validator {record.validator} changed its decision on {record.conflict_index!r} at tick {record.tick}",
            )
        if record.chosen is not None and earlier is None:
            chosen[key] = record
    return _verdict(trace, PropertyName.STABILITY, holds=True)


# ---------------- SUMMARY ----------------

def dag_statistics(trace: Trace) -> DagStatistics:
    decided = {(r.validator, r.conflict_index) for r in trace.decisions if r.chosen is not None}
    return DagStatistics(
        blocks_created=len(trace.blocks),
        final_dag_sizes={str(d.validator): len(d.blocks) for d in trace.final_dags},
        excluded={str(d.validator): d.excluded for d in trace.final_dags if d.excluded},
        decided_indices=len({i for _, i in decided}),
        decision_changes=len(trace.decisions),
    )


def check_all(trace: Trace, horizon: Optional[int] = None) -> VerdictSummary:
    """Every verdict that applies to the trace's variant and network mode"""

    verdicts = [check_safety(trace), check_stability(trace), check_eventual_choice(trace)]
    if NetworkMode(trace.header.network_mode) == NetworkMode.PARTIAL_SYNC:
        verdicts.append(check_liveness(trace, horizon))
    if ProtocolVariant(trace.header.variant) == ProtocolVariant.CONFLICT_EXCLUDE:
        verdicts.append(check_lemma1(trace))

    return VerdictSummary(
        seed=trace.header.seed,
        variant=trace.header.variant,
        bounds_exceeded=trace.bounds_exceeded,
        verdicts=verdicts,
        statistics=dag_statistics(trace),
    )
