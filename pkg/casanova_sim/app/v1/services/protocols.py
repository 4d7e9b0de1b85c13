"""Validator state machines for the four protocol variants

One `ValidatorMachine` class runs every variant; the variant decides what
happens when a conflict is discovered and how `decide` answers:

    attest            every transaction is decided as soon as it is seen alone
    conflict_attest   an index is decided once its only alternative has an
                      FTM-observed set; conflicts go to the side consensus
                      protocol
    conflict_exclude  conflicts go to side consensus unless an FTM-observed set
                      already settled them, in which case side consensus is
                      skipped or abandoned
    casanova          conflicts are voted on in rounds of growing length,
                      decided by the earliest round with an FTM-observed set

Both side consensus variants join with a phase -1 lock on an alternative
that already has an FTM score, so side consensus cannot overturn a value an
FTM-observed set settled before the conflict was seen. Every Chosen answer
is recorded and never changes afterwards.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Union

from casanova_sim.app.core.base.errors import (
    ConflictIndexMismatchError, ProtocolVariantError, UnknownConflictError
)
from casanova_sim.app.core.base.machine import EventLoopMachine
from casanova_sim.app.utils.encoding import digest, encode_bytes, encode_int, encode_seq, encode_str
from casanova_sim.app.utils.logger import logger
from casanova_sim.app.utils.string import short_hash
from casanova_sim.app.utils.types import BlockHash, ConflictIndex, ProtocolVariant, TxHash, ValidatorId
from casanova_sim.app.v1.models import Block, Dag, InsertStatus, Resolution, ResolutionSource, Transaction, Vote
from casanova_sim.app.v1.services.dls import DlsDecision, DlsEnvelope, DlsMessage, DlsState, dls_init
from casanova_sim.app.v1.services.quorum import check_fault_bound, quorum_sizes
from casanova_sim.app.v1.services.scoring import RoundFilter, ScoreEngine, WeightFn


def round_start_offset(r: int) -> int:
    """Blocks between the start of round 0 and the start of round r

    Round r lasts r + 2 blocks, so round r starts r(r+3)/2 blocks in.
    """

    if r < 0:
        raise ValueError(f"round must be >= 0, got {r}")
    return r * (r + 3) // 2


def alternatives_bound(n: int, f: int) -> int:
    """Most alternatives a conflict index can gather from honest-looking attestations"""

    return n - f + f * (n - f)


# ---------------- DECISIONS ----------------

@dataclass(frozen=True)
class Chosen:
    value: TxHash
    round: int


@dataclass(frozen=True)
class Alternatives:
    values: frozenset[TxHash] = frozenset()


Decision = Union[Chosen, Alternatives]


class DecisionSource(str, Enum):
    OBSERVED = "observed"
    SIDE = "side"
    ATTEST = "attest"


@dataclass
class ConflictState:
    index: ConflictIndex
    alternatives: list[TxHash]
    round0_block_seq: int
    discovered_at: int
    current_round: int = -1
    lock: Optional[tuple[TxHash, int]] = None
    decided: Optional[Chosen] = None

    def take_lock(self, value: TxHash, round: int) -> bool:
        """Locks on `value`; a lock is only ever replaced by one from the same or a later round"""

        if self.lock is not None and round < self.lock[1]:
            return False
        self.lock = (value, round)
        return True

    def round_at(self, seq: int, round_length: int = 1) -> Optional[int]:
        """The round that starts with own block `seq`, if any"""

        offset = seq - self.round0_block_seq
        if offset < 0 or offset % round_length:
            return None
        offset //= round_length
        r = max(self.current_round + 1, 0)
        while round_start_offset(r) < offset:
            r += 1
        return r if round_start_offset(r) == offset else None


@dataclass
class MachineParams:
    n: int
    f: int
    variant: ProtocolVariant
    round_length: int = 1
    dls_base: int = 4
    dls_delta: int = 2
    dls_ack_quorum: int = 0
    strict_bounds: bool = True
    weights: Optional[dict[ValidatorId, int]] = None


@dataclass
class Effects:
    """Everything a handler produced besides its state change"""

    blocks: list[Block] = field(default_factory=list)
    dls_messages: list[DlsEnvelope] = field(default_factory=list)
    resolutions: list[Resolution] = field(default_factory=list)
    faults: list[tuple[ValidatorId, str]] = field(default_factory=list)
    inserted: list[Block] = field(default_factory=list)

    def merge(self, other: "Effects") -> "Effects":
        self.blocks.extend(other.blocks)
        self.dls_messages.extend(other.dls_messages)
        self.resolutions.extend(other.resolutions)
        self.faults.extend(other.faults)
        self.inserted.extend(other.inserted)
        return self


class ValidatorMachine(EventLoopMachine):
    """One validator's deterministic event loop

    Handlers mutate the machine and return the Effects the simulator has to
    route. Subclasses change what goes into a block by overriding
    `_parents`, `_block_transactions` and `compute_votes`.
    """

    def __init__(self, me: ValidatorId, params: MachineParams):
        if params.strict_bounds:
            check_fault_bound(params.n, params.f)
        if not 0 <= me < params.n:
            raise ValueError(f"validator id {me} outside [0, {params.n})")

        self.me = me
        self.params = params
        self.variant = ProtocolVariant(params.variant)
        self.dag = Dag(params.n)
        self.engine = ScoreEngine(self.dag, params.f, WeightFn(params.n, params.weights))
        self.bound = alternatives_bound(params.n, params.f)

        self.waiting: dict[TxHash, Transaction] = {}
        self.waiting_resolutions: list[Resolution] = []
        self.inprogress: set[ConflictIndex] = set()
        self.resolved: set[ConflictIndex] = set()
        self.conflict_states: dict[ConflictIndex, ConflictState] = {}
        self.dls_instances: dict[ConflictIndex, DlsState] = {}
        self.finished_dls: dict[ConflictIndex, DlsState] = {}
        self.decisions: dict[ConflictIndex, tuple[Chosen, DecisionSource]] = {}
        self.suspected: set[ValidatorId] = set()
        self.dropped_messages = 0
        self.clock = 0
        self.seq = 0

        self._seen: dict[ConflictIndex, list[TxHash]] = {}

    # ---------------- RECEIVE EVENT ----------------

    def handle_receive_event(self, tx: Transaction, now: int = 0) -> Effects:
        """Queues a client transaction for the next block, or silently ignores it"""

        self.clock = max(self.clock, now)
        if tx.tx_hash in self.waiting or self.dag.contains_transaction(tx.tx_hash):
            return Effects()

        known = set(self.dag.transactions) | set(self.waiting)
        if not tx.requested_parents <= known:
            logger.debug(f"validator {self.me}: ignoring {short_hash(tx.tx_hash)}, requested parents unknown")
            return Effects()

        if self.variant != ProtocolVariant.ATTEST and not self._may_attest(tx.conflict_index):
            logger.debug(f"validator {self.me}: ignoring {short_hash(tx.tx_hash)}, index {tx.conflict_index!r} taken")
            return Effects()

        self.waiting[tx.tx_hash] = tx
        return Effects()

    def _may_attest(self, i: ConflictIndex) -> bool:
        if i in self.inprogress or i in self.resolved or i in self.dag.index_txs:
            return False
        return all(w.conflict_index != i for w in self.waiting.values())

    # ---------------- TIME EXPIRE ----------------

    def handle_time_expire(self, now: int) -> Effects:
        """Creates, stores and returns this validator's next block"""

        self.clock = max(self.clock, now)
        effects = Effects()
        block = self._build_block()
        self.waiting = {}
        self.waiting_resolutions = []
        effects.blocks.append(block)
        self._insert(block, effects)
        return effects

    def _build_block(self) -> Block:
        self.seq += 1
        votes = tuple(self.compute_votes()) if self.variant == ProtocolVariant.CASANOVA else ()
        markers = tuple(sorted(
            (i, self.conflict_states[i].current_round if i in self.conflict_states else -1)
            for i in self.inprogress
        ))
        return Block(
            creator=self.me,
            seq=self.seq,
            parents=tuple(self._parents()),
            transactions=tuple(self._block_transactions()),
            votes=votes,
            conflict_attestations=markers,
            resolutions=tuple(self.waiting_resolutions),
        )

    def _parents(self) -> Iterable[BlockHash]:
        return self.dag.leaves()

    def _block_transactions(self) -> list[Transaction]:
        if self.variant == ProtocolVariant.ATTEST:
            return list(self.waiting.values())
        # a transaction whose index reached the DAG meanwhile would attest to a second alternative
        return [tx for tx in self.waiting.values() if self._may_include(tx.conflict_index)]

    def _may_include(self, i: ConflictIndex) -> bool:
        return i not in self.inprogress and i not in self.resolved and i not in self.dag.index_txs

    # ---------------- VOTING ----------------

    def compute_votes(self) -> list[Vote]:
        """Votes for every in-progress index whose next round starts with this block

        A validator that has seen an FTM score for some alternative in an
        earlier round locks on it (the most recent such round wins) and votes
        for it; without a lock it votes for the lowest-hash alternative.
        """

        votes = []
        for i in sorted(self.inprogress):
            state = self.conflict_states.get(i)
            if state is None or state.decided is not None:
                continue
            r = state.round_at(self.seq, self.params.round_length)
            if r is None:
                continue

            state.current_round = r
            latest = self._latest_ftm_score(state, r)
            if latest is not None:
                state.take_lock(*latest)

            if state.lock is not None:
                choice, lock_round = state.lock
            else:
                choice, lock_round = min(state.alternatives), None
            votes.append(Vote(i, choice, r, lock_round))
            logger.debug(f"validator {self.me}: round {r} vote on {i!r} for {short_hash(choice)}")
        return votes

    def _latest_ftm_score(self, state: ConflictState, r: int) -> Optional[tuple[TxHash, int]]:
        for p in range(r - 1, -2, -1):
            for e in sorted(state.alternatives):
                if self.engine.has_ftm_score(e, RoundFilter(state.index, p)):
                    return e, p
        return None

    # ---------------- RECEIVE BLOCK ----------------

    def handle_receive_block(self, block: Block, now: int = 0) -> Effects:
        """Stores a peer's block and reacts to what it, and the blocks it unblocked, carry"""

        self.clock = max(self.clock, now)
        effects = Effects()
        self._insert(block, effects)
        return effects

    def _insert(self, block: Block, effects: Effects):
        result = self.dag.insert_block(block)
        if result.status == InsertStatus.INVALID:
            logger.warning(f"validator {self.me}: rejected block {block.label} ({result.reason})")
            effects.faults.append((block.creator, result.reason))
            self.suspected.add(block.creator)
            return
        if result.status != InsertStatus.INSERTED:
            return

        for stored in result.inserted:
            effects.inserted.append(stored)
            self._discover_conflicts(stored, effects)
            self._adopt_resolutions(stored, effects)
        self._check_observed(effects)
        self._retire_finished()

    def _discover_conflicts(self, block: Block, effects: Effects):
        for tx in block.transactions:
            i = tx.conflict_index
            seen = self._seen.setdefault(i, [])
            if tx.tx_hash in seen:
                continue
            if len(seen) >= self.bound:
                logger.warning(f"validator {self.me}: alternative {short_hash(tx.tx_hash)} beyond the bound for {i!r}")
                self.suspected.add(block.creator)
                continue
            seen.append(tx.tx_hash)
            if len(seen) >= 2:
                self._on_conflict(i, tx, effects)

    def _on_conflict(self, i: ConflictIndex, tx: Transaction, effects: Effects):
        for h in [h for h, w in self.waiting.items() if w.conflict_index == i]:
            del self.waiting[h]
        if i in self.resolved or self.variant == ProtocolVariant.ATTEST:
            return

        if self.variant == ProtocolVariant.CASANOVA:
            if i in self.inprogress:
                self.conflict_states[i].alternatives.append(tx.tx_hash)
                return
            self.conflict_states[i] = ConflictState(
                index=i,
                alternatives=list(self._seen[i]),
                round0_block_seq=self.seq + 1,
                discovered_at=self.clock,
            )
            self.inprogress.add(i)
            logger.info(f"validator {self.me}: conflict on {i!r}, round 0 starts with block {self.seq + 1}")
            return

        if i in self.inprogress:
            self.dls_instances[i].add_alternative(tx)
            return

        if self.variant == ProtocolVariant.CONFLICT_EXCLUDE:
            chosen = self._observed_choice(i)
            if chosen is not None:
                logger.info(f"validator {self.me}: conflict on {i!r} already excluded by an observed set")
                self._resolve(i, chosen, DecisionSource.OBSERVED, effects)
                return
        initial_lock = next(
            (e for e in sorted(self._seen[i]) if self.engine.has_ftm_score(e, RoundFilter(i, -1))), None
        )
        self._join_side(i, initial_lock, effects)

    def _join_side(self, i: ConflictIndex, initial_lock: Optional[TxHash], effects: Effects):
        state = dls_init(
            self.me, self.params.n, self.params.f, i, set(self._seen[i]), initial_lock,
            base=self.params.dls_base, delta=self.params.dls_delta, ack_quorum=self.params.dls_ack_quorum,
        )
        self.dls_instances[i] = state
        self.inprogress.add(i)
        logger.info(
            f"validator {self.me}: joined side consensus on {i!r}"
            + (f" locked on {short_hash(initial_lock)}" if initial_lock else "")
        )
        effects.dls_messages.extend(state.tick(self.clock))
        self._check_side_decision(i, effects)

    def _adopt_resolutions(self, block: Block, effects: Effects):
        if not self.variant.uses_side_protocol:
            return
        for res in block.resolutions:
            if res.source != ResolutionSource.SIDE or res.conflict_index in self.resolved:
                continue
            if not self.valid_side_resolution(res):
                logger.warning(f"validator {self.me}: block {block.label} carries an unverifiable resolution")
                self.suspected.add(block.creator)
                continue
            self._resolve(
                res.conflict_index, Chosen(res.value, res.round), DecisionSource.SIDE, effects,
                acknowledgers=res.acknowledgers, record=False,
            )

    def _retire_finished(self):
        """Drops a finished side instance once N - f validators have built on a resolution of its index"""

        for i in sorted(self.finished_dls):
            carriers = [
                h for h, b in self.dag.blocks.items() if any(res.conflict_index == i for res in b.resolutions)
            ]
            informed = 0
            for h in carriers:
                informed |= self.dag.descendants_mask(h)
            if len(self.dag.creators_in(informed)) >= self.params.n - self.params.f:
                del self.finished_dls[i]
                logger.debug(f"validator {self.me}: left side consensus on {i!r}")

    def valid_side_resolution(self, res: Resolution) -> bool:
        """Replays the acknowledgement count behind a side consensus decision"""

        tx = self.dag.transactions.get(res.value)
        if tx is None or tx.conflict_index != res.conflict_index:
            return False
        quorum = self.params.dls_ack_quorum or quorum_sizes(self.params.n, self.params.f, strict=False)[0]
        return len(set(res.acknowledgers)) >= quorum

    def _check_observed(self, effects: Effects):
        if self.variant == ProtocolVariant.ATTEST:
            return

        # indices without a known conflict are settled without a Resolution
        for i in sorted(self._seen):
            if len(self._seen[i]) > 1 or i in self.decisions or i in self.inprogress or i in self.resolved:
                continue
            chosen = self._observed_choice(i)
            if chosen is not None:
                self._record(i, chosen, DecisionSource.OBSERVED)

        if self.variant not in (ProtocolVariant.CASANOVA, ProtocolVariant.CONFLICT_EXCLUDE):
            return
        for i in sorted(self.inprogress):
            chosen = self._observed_choice(i)
            if chosen is not None:
                self._resolve(i, chosen, DecisionSource.OBSERVED, effects)

    def _observed_choice(self, i: ConflictIndex) -> Optional[Chosen]:
        """The earliest round with an FTM-observed set, and its alternative

        conflict_attest only looks for one while the index has a single
        alternative; its conflicts are settled by side consensus alone.
        """

        alternatives = sorted(self._seen.get(i, ()))
        if self.variant == ProtocolVariant.CONFLICT_ATTEST and (len(alternatives) != 1 or i in self.inprogress):
            return None
        last = self.dag.max_vote_round.get(i, -1) if self.variant == ProtocolVariant.CASANOVA else -1
        for r in range(-1, last + 1):
            for e in alternatives:
                if self.engine.ftm_observed_set(e, RoundFilter(i, r)) is not None:
                    return Chosen(e, r)
        return None

    def _record(self, i: ConflictIndex, chosen: Chosen, source: DecisionSource):
        previous = self.decisions.get(i)
        if previous is not None:
            if previous[0].value != chosen.value:
                logger.warning(
                    f"validator {self.me}: {source.value} decision {short_hash(chosen.value)} on {i!r} "
                    f"disagrees with recorded {short_hash(previous[0].value)}"
                )
            chosen = previous[0]
        else:
            self.decisions[i] = (chosen, source)
        if i in self.conflict_states:
            self.conflict_states[i].decided = chosen

    def _resolve(
        self,
        i: ConflictIndex,
        chosen: Chosen,
        source: DecisionSource,
        effects: Effects,
        acknowledgers: tuple[ValidatorId, ...] = (),
        record: bool = True,
    ):
        self.inprogress.discard(i)
        self.resolved.add(i)
        state = self.dls_instances.pop(i, None)
        if state is not None:
            self.finished_dls[i] = state
        self._record(i, chosen, source)
        for h in [h for h, w in self.waiting.items() if w.conflict_index == i]:
            del self.waiting[h]

        resolution = Resolution(
            i, chosen.value, chosen.round,
            ResolutionSource.SIDE if source == DecisionSource.SIDE else ResolutionSource.OBSERVED,
            acknowledgers,
        )
        if record:
            self.waiting_resolutions.append(resolution)
        effects.resolutions.append(resolution)
        logger.info(
            f"validator {self.me}: resolved {i!r} to {short_hash(chosen.value)} "
            f"(round {chosen.round}, {source.value})"
        )

    # ---------------- SIDE CONSENSUS ----------------

    def handle_side_consensus_achieved(
        self, conflict_index: ConflictIndex, value: TxHash, evidence: Optional[DlsDecision] = None
    ) -> Effects:
        """Records a side consensus decision for an in-progress index

        Raises:
            ProtocolVariantError: for variants without side consensus
            UnknownConflictError: if the index is neither in progress nor resolved
            ConflictIndexMismatchError: if `value` is not an alternative of the index
        """

        if not self.variant.uses_side_protocol:
            raise ProtocolVariantError(f"Variant {self.variant.value} does not run side consensus")

        effects = Effects()
        if conflict_index in self.resolved:
            return effects
        if conflict_index not in self.inprogress:
            raise UnknownConflictError(f"Validator {self.me} has no conflict on {conflict_index!r}")

        tx = self.dag.transactions.get(value)
        if tx is None or tx.conflict_index != conflict_index:
            raise ConflictIndexMismatchError(
                f"Decided value {short_hash(value)} is not an alternative of {conflict_index!r}"
            )

        phase = evidence.phase if evidence else 0
        acknowledgers = evidence.acknowledgers if evidence else ()
        self._resolve(conflict_index, Chosen(value, phase), DecisionSource.SIDE, effects, acknowledgers=acknowledgers)
        return effects

    def _check_side_decision(self, i: ConflictIndex, effects: Effects):
        state = self.dls_instances.get(i)
        if state is not None and state.decided is not None:
            effects.merge(self.handle_side_consensus_achieved(i, state.decided.value, state.decided))

    def handle_dls_tick(self, now: int) -> Effects:
        self.clock = max(self.clock, now)
        effects = Effects()
        for i in sorted(self.dls_instances):
            state = self.dls_instances.get(i)
            if state is None:
                continue
            effects.dls_messages.extend(state.tick(now))
            self._check_side_decision(i, effects)
        for i in sorted(self.finished_dls):
            effects.dls_messages.extend(self.finished_dls[i].tick(now))
        return effects

    def handle_dls_message(self, message: DlsMessage, now: int) -> Effects:
        self.clock = max(self.clock, now)
        effects = Effects()
        state = self.dls_instances.get(message.conflict_index)
        if state is None and message.conflict_index in self.finished_dls:
            effects.dls_messages.extend(self.finished_dls[message.conflict_index].receive(message, now))
            return effects
        if state is None:
            self.dropped_messages += 1
            return effects
        effects.dls_messages.extend(state.receive(message, now))
        self._check_side_decision(message.conflict_index, effects)
        return effects

    def dls_next_boundary(self, now: int) -> Optional[int]:
        states = [*self.dls_instances.values(), *self.finished_dls.values()]
        if not states:
            return None
        return min(state.next_boundary(now) for state in states)

    # ---------------- DECIDE ----------------

    def decide(self, conflict_index: ConflictIndex) -> Decision:
        """This validator's current answer for a conflict index

        Returns:
            Chosen: once the index is decided; it never changes afterwards
            Alternatives: the transactions of the index seen so far, possibly none
        """

        if conflict_index in self.decisions:
            return self.decisions[conflict_index][0]

        alternatives = frozenset(self.dag.alternatives(conflict_index))
        if not alternatives:
            return Alternatives()

        if self.variant == ProtocolVariant.ATTEST:
            if len(alternatives) > 1:
                return Alternatives(alternatives)
            chosen, source = Chosen(next(iter(alternatives)), -1), DecisionSource.ATTEST
        else:
            chosen, source = self._observed_choice(conflict_index), DecisionSource.OBSERVED
            if chosen is None:
                return Alternatives(alternatives)

        self._record(conflict_index, chosen, source)
        return chosen

    def decision_source(self, conflict_index: ConflictIndex) -> Optional[DecisionSource]:
        self.decide(conflict_index)
        recorded = self.decisions.get(conflict_index)
        return recorded[1] if recorded else None

    def known_indices(self) -> list[ConflictIndex]:
        return sorted(self.dag.index_txs)

    # ---------------- SNAPSHOTS ----------------

    def fingerprint(self) -> bytes:
        """Digest of everything that steers this machine's future behavior"""

        conflicts = encode_seq(
            encode_str(i) + encode_int(s.current_round) + encode_int(s.round0_block_seq)
            + (encode_bytes(s.lock[0]) + encode_int(s.lock[1]) if s.lock else b"")
            for i, s in sorted(self.conflict_states.items())
        )
        return digest(
            self.dag.fingerprint()
            + encode_int(self.seq)
            + encode_seq(sorted(self.waiting))
            + encode_seq(encode_str(i) for i in sorted(self.inprogress))
            + encode_seq(encode_str(i) for i in sorted(self.resolved))
            + encode_seq(encode_str(i) + encode_bytes(c.value) for i, (c, _) in sorted(self.decisions.items()))
            + conflicts
            + encode_seq(encode_str(i) + s.fingerprint() for i, s in sorted(self.dls_instances.items()))
            + encode_seq(encode_str(i) + s.fingerprint() for i, s in sorted(self.finished_dls.items()))
        )


def handle_receive_event(m: ValidatorMachine, tx: Transaction, now: int = 0) -> Effects:
    return m.handle_receive_event(tx, now)


def handle_time_expire(m: ValidatorMachine, now: int) -> Effects:
    return m.handle_time_expire(now)


def handle_receive_block(m: ValidatorMachine, block: Block, now: int = 0) -> Effects:
    return m.handle_receive_block(block, now)


def handle_side_consensus_achieved(
    m: ValidatorMachine, conflict_index: ConflictIndex, value: TxHash, evidence: Optional[DlsDecision] = None
) -> Effects:
    return m.handle_side_consensus_achieved(conflict_index, value, evidence)


def compute_votes(m: ValidatorMachine) -> list[Vote]:
    return m.compute_votes()


def decide(m: ValidatorMachine, conflict_index: ConflictIndex) -> Decision:
    return m.decide(conflict_index)
