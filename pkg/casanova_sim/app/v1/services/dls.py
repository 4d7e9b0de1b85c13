"""Phased, leader-based side consensus for one conflict index

Every phase has a round-robin leader and four rounds: accept, propose,
acknowledge and lock-release. Round lengths grow by a fixed step each
phase so that, once the network stabilises, some phase has rounds long
enough for every message to arrive in time. Phases are anchored at tick 0
so all processors agree on phase numbers without talking to each other.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from casanova_sim.app.core.base.errors import ConflictIndexMismatchError, DlsError
from casanova_sim.app.utils.encoding import digest, encode_bytes, encode_int, encode_seq, encode_str
from casanova_sim.app.utils.logger import logger
from casanova_sim.app.utils.types import ConflictIndex, TxHash, ValidatorId
from casanova_sim.app.v1.models.transaction import Transaction
from casanova_sim.app.v1.services.quorum import quorum_sizes

DEFAULT_BASE_ROUND_LENGTH = 4
DEFAULT_ROUND_INCREMENT = 2


class RoundKind(str, Enum):
    ACCEPT = "accept"
    PROPOSE = "propose"
    ACKNOWLEDGE = "acknowledge"
    LOCK_RELEASE = "lock_release"


ROUND_ORDER = (RoundKind.ACCEPT, RoundKind.PROPOSE, RoundKind.ACKNOWLEDGE, RoundKind.LOCK_RELEASE)


@dataclass(frozen=True)
class DlsPhase:
    phase: int
    leader: ValidatorId
    round_kind: RoundKind
    round_length: int
    start: int


@dataclass(frozen=True)
class DlsSchedule:
    n: int
    base: int = DEFAULT_BASE_ROUND_LENGTH
    delta: int = DEFAULT_ROUND_INCREMENT

    def __post_init__(self):
        if self.base < 1 or self.delta < 1:
            raise DlsError(f"round length base and increment must be positive, got {self.base}, {self.delta}")

    def round_length(self, phase: int) -> int:
        return self.base + phase * self.delta

    def phase_start(self, phase: int) -> int:
        return 4 * (phase * self.base + self.delta * phase * (phase - 1) // 2)

    def at(self, now: int) -> DlsPhase:
        """Phase and round in progress at tick `now`"""

        phase = 0
        while self.phase_start(phase + 1) <= now:
            phase += 1
        length = self.round_length(phase)
        kind = min((now - self.phase_start(phase)) // length, 3)
        return DlsPhase(
            phase=phase,
            leader=phase % self.n,
            round_kind=ROUND_ORDER[kind],
            round_length=length,
            start=self.phase_start(phase) + kind * length,
        )

    def next_boundary(self, now: int) -> int:
        current = self.at(now)
        return current.start + current.round_length


# ---------------- MESSAGES ----------------

@dataclass(frozen=True)
class DlsAccept:
    sender: ValidatorId
    conflict_index: ConflictIndex
    phase: int
    values: tuple[TxHash, ...]

    def encode(self) -> bytes:
        return b"ACCEPT" + encode_int(self.sender) + encode_str(self.conflict_index) + encode_int(self.phase) + encode_seq(self.values)


@dataclass(frozen=True)
class DlsProposal:
    """The leader's lock message: a value and the accepts that justify it"""

    sender: ValidatorId
    conflict_index: ConflictIndex
    phase: int
    value: TxHash
    proof: tuple[DlsAccept, ...]

    def encode(self) -> bytes:
        return (
            b"LOCK" + encode_int(self.sender) + encode_str(self.conflict_index) + encode_int(self.phase)
            + encode_bytes(self.value) + encode_seq(accept.encode() for accept in self.proof)
        )


@dataclass(frozen=True)
class DlsAck:
    sender: ValidatorId
    conflict_index: ConflictIndex
    phase: int
    value: TxHash

    def encode(self) -> bytes:
        return b"ACK" + encode_int(self.sender) + encode_str(self.conflict_index) + encode_int(self.phase) + encode_bytes(self.value)


@dataclass(frozen=True)
class DlsLock:
    """A held lock; phase -1 locks stand for an FTM score seen in the DAG and carry no proof"""

    value: TxHash
    phase: int
    proof: tuple[DlsAccept, ...] = ()

    def __post_init__(self):
        if self.phase < -1:
            raise DlsError(f"lock phase must be >= -1, got {self.phase}")
        if self.phase == -1 and self.proof:
            raise DlsError("phase -1 locks carry no accept proof")

    def encode(self) -> bytes:
        return encode_bytes(self.value) + encode_int(self.phase) + encode_seq(a.encode() for a in self.proof)


@dataclass(frozen=True)
class DlsRelease:
    sender: ValidatorId
    conflict_index: ConflictIndex
    phase: int
    locks: tuple[DlsLock, ...]

    def encode(self) -> bytes:
        return (
            b"RELEASE" + encode_int(self.sender) + encode_str(self.conflict_index) + encode_int(self.phase)
            + encode_seq(lock.encode() for lock in self.locks)
        )


DlsMessage = Union[DlsAccept, DlsProposal, DlsAck, DlsRelease]


def message_id(message: DlsMessage) -> bytes:
    return digest(message.encode())


@dataclass(frozen=True)
class DlsEnvelope:
    """An outgoing message; recipient None means every other processor"""

    recipient: Optional[ValidatorId]
    message: DlsMessage


@dataclass(frozen=True)
class DlsDecision:
    value: TxHash
    phase: int
    acknowledgers: tuple[ValidatorId, ...]


# ---------------- STATE ----------------

@dataclass
class DlsState:
    me: ValidatorId
    n: int
    f: int
    conflict_index: ConflictIndex
    alternatives: set[TxHash]
    schedule: DlsSchedule
    locks: dict[TxHash, DlsLock] = field(default_factory=dict)
    decided: Optional[DlsDecision] = None
    ack_quorum: int = 0
    rejected: int = 0

    _accepts: dict[int, dict[ValidatorId, DlsAccept]] = field(default_factory=dict, init=False, repr=False)
    _proposed: dict[int, TxHash] = field(default_factory=dict, init=False, repr=False)
    _acks: dict[int, set[ValidatorId]] = field(default_factory=dict, init=False, repr=False)
    _to_acknowledge: dict[int, TxHash] = field(default_factory=dict, init=False, repr=False)
    _done_rounds: set[tuple[int, RoundKind]] = field(default_factory=set, init=False, repr=False)
    _outbox: list[DlsEnvelope] = field(default_factory=list, init=False, repr=False)
    _current: Optional[DlsPhase] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self._current = self.schedule.at(0)
        if not self.ack_quorum:
            self.ack_quorum = quorum_sizes(self.n, self.f, strict=False)[0]

    @property
    def acceptable(self) -> set[TxHash]:
        """One locked value is the only acceptable value; two or more lock out everything"""

        if len(self.locks) == 1:
            return set(self.locks)
        if len(self.locks) > 1:
            return set()
        return set(self.alternatives)

    @property
    def current(self) -> DlsPhase:
        return self._current

    # ---------------- SENDING ----------------

    def _send(self, recipient: Optional[ValidatorId], message: DlsMessage, now: int):
        if recipient is None or recipient == self.me:
            self._apply(message, now)
        if recipient != self.me:
            self._outbox.append(DlsEnvelope(recipient, message))

    def _flush(self) -> list[DlsEnvelope]:
        outbox, self._outbox = self._outbox, []
        return outbox

    # ---------------- ROUNDS ----------------

    def tick(self, now: int) -> list[DlsEnvelope]:
        """Runs the round in progress at `now`, once per round; a decided leader keeps taking part

        Returns:
            list: messages for the network
        """

        self._current = self.schedule.at(now)
        key = (self._current.phase, self._current.round_kind)
        if key in self._done_rounds:
            return self._flush()
        self._done_rounds.add(key)

        phase, leader = self._current.phase, self._current.leader
        kind = self._current.round_kind
        if kind == RoundKind.ACCEPT:
            values = tuple(sorted(self.acceptable))
            if values:
                self._send(leader, DlsAccept(self.me, self.conflict_index, phase, values), now)
        elif kind == RoundKind.PROPOSE and leader == self.me:
            proposal = self._proposal(phase)
            if proposal is not None:
                self._proposed[phase] = proposal.value
                self._send(None, proposal, now)
        elif kind == RoundKind.ACKNOWLEDGE and phase in self._to_acknowledge:
            self._send(leader, DlsAck(self.me, self.conflict_index, phase, self._to_acknowledge[phase]), now)
        elif kind == RoundKind.LOCK_RELEASE:
            evidence = tuple(lock for _, lock in sorted(self.locks.items()) if lock.phase >= 0)
            if evidence:
                self._send(None, DlsRelease(self.me, self.conflict_index, phase, evidence), now)
        return self._flush()

    def _proposal(self, phase: int) -> Optional[DlsProposal]:
        accepts = self._accepts.get(phase, {})
        supporters: dict[TxHash, list[DlsAccept]] = {}
        for sender in sorted(accepts):
            for value in accepts[sender].values:
                supporters.setdefault(value, []).append(accepts[sender])

        proposable = sorted(v for v, msgs in supporters.items() if len(msgs) >= self.n - self.f)
        if not proposable:
            logger.debug(f"validator {self.me}: no proposable value for {self.conflict_index!r} in phase {phase}")
            return None
        value = proposable[0]
        return DlsProposal(self.me, self.conflict_index, phase, value, tuple(supporters[value]))

    # ---------------- RECEIVING ----------------

    def valid_proof(self, value: TxHash, phase: int, proof: tuple[DlsAccept, ...]) -> bool:
        senders = {
            accept.sender for accept in proof
            if accept.phase == phase and accept.conflict_index == self.conflict_index and value in accept.values
        }
        return len(senders) >= self.n - self.f

    def receive(self, message: DlsMessage, now: int) -> list[DlsEnvelope]:
        """Applies one authenticated message; malformed ones are counted and dropped"""

        self._apply(message, now)
        return self._flush()

    def _apply(self, message: DlsMessage, now: int):
        if message.conflict_index != self.conflict_index:
            self.rejected += 1
            return

        self._current = self.schedule.at(now)
        if isinstance(message, DlsAccept):
            if message.phase % self.n != self.me:
                self.rejected += 1
            else:
                self._accepts.setdefault(message.phase, {})[message.sender] = message
        elif isinstance(message, DlsProposal):
            self._receive_proposal(message)
        elif isinstance(message, DlsAck):
            self._receive_ack(message)
        elif isinstance(message, DlsRelease):
            self._receive_release(message)
        else:
            self.rejected += 1

    def _receive_proposal(self, message: DlsProposal):
        phase = message.phase
        in_round = self._current.phase == phase and self._current.round_kind == RoundKind.PROPOSE
        from_leader = message.sender == phase % self.n
        if not (in_round and from_leader and self.valid_proof(message.value, phase, message.proof)):
            self.rejected += 1
            return

        self.locks[message.value] = DlsLock(message.value, phase, message.proof)
        self._to_acknowledge[phase] = message.value

    def _receive_ack(self, message: DlsAck):
        if self._proposed.get(message.phase) != message.value:
            self.rejected += 1
            return

        acks = self._acks.setdefault(message.phase, set())
        acks.add(message.sender)
        if self.decided is None and len(acks) >= self.ack_quorum:
            self.decided = DlsDecision(message.value, message.phase, tuple(sorted(acks)))
            logger.info(
                f"validator {self.me}: side consensus on {self.conflict_index!r} decided "
                f"{message.value.hex()[:8]} in phase {message.phase}"
            )

    def _receive_release(self, message: DlsRelease):
        for evidence in message.locks:
            if evidence.phase < 0 or not self.valid_proof(evidence.value, evidence.phase, evidence.proof):
                self.rejected += 1
                continue
            for value, held in list(self.locks.items()):
                if value != evidence.value and evidence.phase >= held.phase:
                    del self.locks[value]

    def add_alternative(self, tx: Transaction):
        if tx.conflict_index != self.conflict_index:
            raise ConflictIndexMismatchError(
                f"Transaction index {tx.conflict_index!r} does not match side consensus on {self.conflict_index!r}"
            )
        self.alternatives.add(tx.tx_hash)

    def next_boundary(self, now: int) -> int:
        return self.schedule.next_boundary(now)

    def fingerprint(self) -> bytes:
        decided = b""
        if self.decided is not None:
            decided = encode_bytes(self.decided.value) + encode_int(self.decided.phase)
        return digest(
            encode_str(self.conflict_index)
            + encode_seq(sorted(self.alternatives))
            + encode_seq(lock.encode() for _, lock in sorted(self.locks.items()))
            + encode_seq(encode_int(p) + encode_seq(encode_int(s) for s in sorted(a)) for p, a in sorted(self._accepts.items()))
            + encode_seq(encode_int(p) + encode_bytes(v) for p, v in sorted(self._proposed.items()))
            + encode_seq(encode_int(p) + encode_seq(encode_int(s) for s in sorted(a)) for p, a in sorted(self._acks.items()))
            + encode_seq(encode_int(p) + encode_bytes(v) for p, v in sorted(self._to_acknowledge.items()))
            + encode_seq(encode_int(p) + encode_str(k.value) for p, k in sorted(self._done_rounds))
            + decided
        )


# ---------------- FUNCTIONAL SURFACE ----------------

def dls_init(
    me: ValidatorId,
    n: int,
    f: int,
    conflict_index: ConflictIndex,
    alternatives: set[TxHash],
    initial_lock: Optional[TxHash] = None,
    base: int = DEFAULT_BASE_ROUND_LENGTH,
    delta: int = DEFAULT_ROUND_INCREMENT,
    ack_quorum: int = 0,
) -> DlsState:
    """Phase 0 state, optionally holding a phase -1 lock on `initial_lock`

    Raises:
        DlsError: if `alternatives` is empty or does not contain `initial_lock`
    """

    if not alternatives:
        raise DlsError(f"Side consensus on {conflict_index!r} needs at least one alternative")
    if initial_lock is not None and initial_lock not in alternatives:
        raise DlsError(f"Initial lock {initial_lock.hex()[:8]} is not one of the alternatives")

    state = DlsState(
        me=me,
        n=n,
        f=f,
        conflict_index=conflict_index,
        alternatives=set(alternatives),
        schedule=DlsSchedule(n, base, delta),
        ack_quorum=ack_quorum,
    )
    if initial_lock is not None:
        state.locks[initial_lock] = DlsLock(initial_lock, -1)
    return state


def dls_tick(state: DlsState, now: int) -> tuple[DlsState, list[DlsEnvelope]]:
    return state, state.tick(now)


def dls_receive(state: DlsState, message: DlsMessage, now: int) -> tuple[DlsState, list[DlsEnvelope]]:
    return state, state.receive(message, now)


def dls_add_alternative(state: DlsState, tx: Transaction) -> DlsState:
    state.add_alternative(tx)
    return state


def dls_next_boundary(state: DlsState, now: int) -> int:
    return state.next_boundary(now)
