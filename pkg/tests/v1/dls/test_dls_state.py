"""
1. Phases start at tick 0, rounds grow by the increment and leaders rotate
2. With every processor correct and in sync, the phase 0 leader decides, then keeps taking part in later rounds
3. Locked values steer the leader's proposal
4. Proposals without enough accepts, from non-leaders or out of round are dropped
5. Lock-release evidence frees older locks on other values
6. Bad inputs raise DlsError
"""

import pytest

from casanova_sim.app.core.base.errors import ConflictIndexMismatchError, DlsError
from casanova_sim.app.v1.services.dls import (
    DlsAccept, DlsLock, DlsProposal, DlsRelease, DlsSchedule, RoundKind, dls_add_alternative, dls_init,
    dls_next_boundary, dls_tick
)
from tests.conftest import CONFLICT_INDEX, make_tx

ALICE = make_tx("pay-alice").tx_hash
BOB = make_tx("pay-bob").tx_hash
LOW, HIGH = sorted([ALICE, BOB])


def cluster(n: int = 4, f: int = 1, locks=None):
    locks = locks or {}
    return [dls_init(u, n, f, CONFLICT_INDEX, {ALICE, BOB}, initial_lock=locks.get(u)) for u in range(n)]


def deliver(states, envelopes, now):
    for envelope in envelopes:
        sender = envelope.message.sender
        targets = [envelope.recipient] if envelope.recipient is not None else [
            u for u in range(len(states)) if u != sender
        ]
        for target in targets:
            deliver(states, states[target].receive(envelope.message, now), now)


def run_round(states, now):
    for state in states:
        deliver(states, state.tick(now), now)


def accepts_for(value, phase=0, senders=(0, 2, 3)):
    return tuple(DlsAccept(s, CONFLICT_INDEX, phase, (value,)) for s in senders)


def test_schedule():
    schedule = DlsSchedule(4)
    assert [schedule.phase_start(p) for p in range(3)] == [0, 16, 40]
    assert schedule.round_length(2) == 8

    current = schedule.at(17)
    assert (current.phase, current.leader, current.round_kind) == (1, 1, RoundKind.ACCEPT)
    assert (current.start, current.round_length) == (16, 6)
    assert schedule.at(22).round_kind == RoundKind.PROPOSE
    assert schedule.at(39).round_kind == RoundKind.LOCK_RELEASE
    assert schedule.next_boundary(0) == 4
    assert dls_next_boundary(cluster()[0], 5) == 8


def test_leader_decides_in_first_phase():
    states = cluster()
    for now in (0, 4, 8, 12):
        run_round(states, now)

    leader = states[0]
    assert leader.decided is not None
    assert leader.decided.value == LOW
    assert leader.decided.phase == 0
    assert len(leader.decided.acknowledgers) >= leader.ack_quorum == 2
    for state in states:
        assert state.locks[LOW].phase == 0
        assert state.rejected == 0


def test_decided_leader_keeps_participating():
    states = cluster()
    for now in (0, 4, 8):
        run_round(states, now)
    leader = states[0]
    decision = leader.decided
    assert decision is not None

    releases = leader.tick(12)
    assert [type(e.message) for e in releases] == [DlsRelease]
    assert releases[0].message.locks[0].value == LOW
    deliver(states, releases, 12)

    accepts = leader.tick(16)
    assert [(e.recipient, e.message) for e in accepts] == [(1, DlsAccept(0, CONFLICT_INDEX, 1, (LOW,)))]
    assert leader.decided == decision


def test_locks_steer_the_proposal():
    states = cluster(locks={1: HIGH, 2: HIGH})
    assert states[1].acceptable == {HIGH}
    for now in (0, 4, 8):
        run_round(states, now)
    assert states[0].decided.value == HIGH


def test_tick_runs_each_round_once():
    state = cluster()[1]
    _, sent = dls_tick(state, 0)
    assert len(sent) == 1
    assert sent[0].recipient == 0
    assert dls_tick(state, 1)[1] == []


def test_bad_proposals_are_dropped():
    state = cluster()[1]
    state.tick(4)

    thin = DlsProposal(0, CONFLICT_INDEX, 0, LOW, accepts_for(LOW, senders=(0, 2)))
    state.receive(thin, 4)
    assert state.rejected == 1

    usurper = DlsProposal(2, CONFLICT_INDEX, 0, LOW, accepts_for(LOW))
    state.receive(usurper, 4)
    assert state.rejected == 2

    late = DlsProposal(0, CONFLICT_INDEX, 0, LOW, accepts_for(LOW))
    state.receive(late, 9)
    assert state.rejected == 3

    elsewhere = DlsAccept(0, "other-index", 0, (LOW,))
    state.receive(elsewhere, 9)
    assert state.rejected == 4
    assert not state.locks

    state.receive(DlsAccept(0, CONFLICT_INDEX, 0, (LOW,)), 1)
    assert state.rejected == 5


def test_release_frees_older_locks():
    state = dls_init(1, 4, 1, CONFLICT_INDEX, {ALICE, BOB}, initial_lock=LOW)
    assert state.acceptable == {LOW}

    weak = DlsRelease(2, CONFLICT_INDEX, 0, (DlsLock(HIGH, 0, accepts_for(HIGH, senders=(0, 2))),))
    state.receive(weak, 12)
    assert state.rejected == 1
    assert LOW in state.locks

    strong = DlsRelease(2, CONFLICT_INDEX, 0, (DlsLock(HIGH, 0, accepts_for(HIGH)),))
    state.receive(strong, 12)
    assert not state.locks
    assert state.acceptable == {ALICE, BOB}


def test_fingerprint_tracks_progress():
    first, second = cluster()[1], cluster()[1]
    assert first.fingerprint() == second.fingerprint()
    first.tick(0)
    assert first.fingerprint() != second.fingerprint()


def test_bad_inputs():
    with pytest.raises(DlsError):
        dls_init(0, 4, 1, CONFLICT_INDEX, set())
    with pytest.raises(DlsError):
        dls_init(0, 4, 1, CONFLICT_INDEX, {ALICE}, initial_lock=BOB)
    with pytest.raises(DlsError):
        DlsLock(ALICE, -1, accepts_for(ALICE))
    with pytest.raises(DlsError):
        DlsSchedule(4, base=0)
    with pytest.raises(ConflictIndexMismatchError):
        dls_add_alternative(cluster()[0], make_tx("pay-carol", index="coin-2"))

    state = dls_add_alternative(cluster()[0], make_tx("pay-carol"))
    assert len(state.alternatives) == 3
