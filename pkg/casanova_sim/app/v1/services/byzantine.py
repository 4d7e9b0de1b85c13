"""Validator nodes as the simulator sees them

A node owns one or more ValidatorMachines and turns their Effects into
outbound messages. Byzantine nodes are correct machines with something
changed: what goes into their blocks, who gets to see them, or nothing
leaving at all. They can lie about content but never about who they are;
the simulator stamps every message with its real sender.
"""

import random
from dataclasses import dataclass
from typing import Optional, Union

from casanova_sim.app.utils.types import BlockHash, ByzantineKind, ConflictIndex, TxHash, ValidatorId
from casanova_sim.app.v1.models import Block, Transaction, Vote
from casanova_sim.app.v1.services.dls import DlsMessage
from casanova_sim.app.v1.services.protocols import Effects, MachineParams, ValidatorMachine

Payload = Union[Block, DlsMessage]


@dataclass(frozen=True)
class Outbound:
    """A message to route; recipients None means every other validator"""

    payload: Payload
    recipients: Optional[tuple[ValidatorId, ...]] = None
    delay: int = 0


def effects_to_outbound(effects: Effects) -> list[Outbound]:
    outbound = [Outbound(block) for block in effects.blocks]
    for envelope in effects.dls_messages:
        recipients = None if envelope.recipient is None else (envelope.recipient,)
        outbound.append(Outbound(envelope.message, recipients))
    return outbound


class CorrectNode:
    byzantine: Optional[ByzantineKind] = None

    def __init__(self, me: ValidatorId, params: MachineParams, rng: random.Random):
        self.me = me
        self.params = params
        self.rng = rng
        self.machine = self.make_machine()
        self.last_effects = Effects()

    def make_machine(self) -> ValidatorMachine:
        return ValidatorMachine(self.me, self.params)

    @property
    def is_correct(self) -> bool:
        return self.byzantine is None

    def _out(self, effects: Effects) -> list[Outbound]:
        self.last_effects = effects
        return effects_to_outbound(effects)

    def on_client_tx(self, tx: Transaction, now: int) -> list[Outbound]:
        return self._out(self.machine.handle_receive_event(tx, now))

    def on_timer(self, now: int) -> list[Outbound]:
        return self._out(self.machine.handle_time_expire(now))

    def on_block(self, block: Block, now: int) -> list[Outbound]:
        return self._out(self.machine.handle_receive_block(block, now))

    def on_dls_message(self, message: DlsMessage, now: int) -> list[Outbound]:
        return self._out(self.machine.handle_dls_message(message, now))

    def on_dls_tick(self, now: int) -> list[Outbound]:
        return self._out(self.machine.handle_dls_tick(now))

    def dls_next_boundary(self, now: int) -> Optional[int]:
        return self.machine.dls_next_boundary(now)

    def fingerprint(self) -> bytes:
        return self.machine.fingerprint()


# ---------------- SILENT ----------------

class SilentNode(CorrectNode):
    """Keeps its bookkeeping up to date but never sends anything"""

    byzantine = ByzantineKind.SILENT

    def on_timer(self, now: int) -> list[Outbound]:
        self.last_effects = Effects()
        return []

    def on_block(self, block: Block, now: int) -> list[Outbound]:
        self.machine.handle_receive_block(block, now)
        self.last_effects = Effects()
        return []

    def on_dls_message(self, message: DlsMessage, now: int) -> list[Outbound]:
        return []

    def on_dls_tick(self, now: int) -> list[Outbound]:
        return []

    def dls_next_boundary(self, now: int) -> Optional[int]:
        return None


# ---------------- EQUIVOCATOR ----------------

class ForkMachine(ValidatorMachine):
    """One side of an equivocating validator's split chain

    Each fork builds only on its own blocks, so the two forks never merge.
    Fork 1 skips a sequence number up front so that the very first pair of
    blocks already differs.
    """

    def __init__(self, me: ValidatorId, params: MachineParams, fork: int):
        super().__init__(me, params)
        self.fork = fork
        self.seq = fork
        self.own: list[BlockHash] = []

    def _parents(self):
        parents = {h for h in self.dag.leaves() if self.dag.blocks[h].creator != self.me or h in self.own}
        if self.own:
            parents.add(self.own[-1])
        return parents or {self.dag.genesis}

    def _build_block(self) -> Block:
        block = super()._build_block()
        self.own.append(block.block_hash)
        return block


class EquivocatorNode(CorrectNode):
    """Runs two forked machines and shows each fork to one half of the validators first

    Validators whose id has parity k receive fork k immediately and the other
    fork `lag` ticks later.
    """

    byzantine = ByzantineKind.EQUIVOCATOR

    def __init__(self, me: ValidatorId, params: MachineParams, rng: random.Random, lag: int = 10):
        self.forks = [ForkMachine(me, params, 0), ForkMachine(me, params, 1)]
        self.lag = lag
        super().__init__(me, params, rng)

    def make_machine(self) -> ValidatorMachine:
        return self.forks[0]

    def on_client_tx(self, tx: Transaction, now: int) -> list[Outbound]:
        for fork in self.forks:
            fork.handle_receive_event(tx, now)
        return []

    def on_timer(self, now: int) -> list[Outbound]:
        effects = [fork.handle_time_expire(now) for fork in self.forks]
        blocks = [e.blocks[0] for e in effects]
        # each fork must be able to store peer blocks that build on the other fork
        self.forks[0].handle_receive_block(blocks[1], now)
        self.forks[1].handle_receive_block(blocks[0], now)

        outbound = []
        others = [v for v in range(self.params.n) if v != self.me]
        for k, block in enumerate(blocks):
            first = tuple(v for v in others if v % 2 == k)
            second = tuple(v for v in others if v % 2 != k)
            if first:
                outbound.append(Outbound(block, first))
            if second:
                outbound.append(Outbound(block, second, delay=self.lag))
        outbound.extend(o for o in effects_to_outbound(effects[0]) if not isinstance(o.payload, Block))
        self.last_effects = effects[0]
        return outbound

    def on_block(self, block: Block, now: int) -> list[Outbound]:
        effects = [fork.handle_receive_block(block, now) for fork in self.forks]
        return self._out(Effects(dls_messages=effects[0].dls_messages, resolutions=effects[0].resolutions))

    def on_dls_tick(self, now: int) -> list[Outbound]:
        return self._out(self.forks[0].handle_dls_tick(now))


class ForkNode(CorrectNode):
    """A single equivocator fork, scheduled on its own by the explorer"""

    byzantine = ByzantineKind.EQUIVOCATOR

    def __init__(self, me: ValidatorId, params: MachineParams, rng: random.Random, fork: int = 0):
        self.fork = fork
        super().__init__(me, params, rng)

    def make_machine(self) -> ValidatorMachine:
        return ForkMachine(self.me, self.params, self.fork)


# ---------------- DOUBLE VOTER ----------------

class DoubleVoterMachine(ValidatorMachine):
    """Votes for every alternative it knows in each round it votes in"""

    def compute_votes(self) -> list[Vote]:
        votes = super().compute_votes()
        extra = []
        for vote in votes:
            for alternative in sorted(self.conflict_states[vote.conflict_index].alternatives):
                if alternative != vote.choice:
                    extra.append(Vote(vote.conflict_index, alternative, vote.round))
        return votes + extra


class DoubleVoterNode(CorrectNode):
    byzantine = ByzantineKind.DOUBLE_VOTER

    def make_machine(self) -> ValidatorMachine:
        return DoubleVoterMachine(self.me, self.params)


# ---------------- SPAMMER ----------------

class SpammerMachine(ValidatorMachine):
    """Adds a fresh alternative for every index it knows to each block, past the alternatives bound"""

    def __init__(self, me: ValidatorId, params: MachineParams):
        super().__init__(me, params)
        self.spammed: dict[ConflictIndex, int] = {}

    def _block_transactions(self) -> list[Transaction]:
        transactions = list(self.waiting.values())
        for i in sorted(self.dag.index_txs):
            count = self.spammed.get(i, 0)
            if count > self.bound:
                continue
            self.spammed[i] = count + 1
            transactions.append(Transaction(f"spam/{self.me}/{self.seq}/{count}".encode(), i))
        return transactions


class SpammerNode(CorrectNode):
    byzantine = ByzantineKind.SPAMMER

    def make_machine(self) -> ValidatorMachine:
        return SpammerMachine(self.me, self.params)


# ---------------- ARBITRARY ----------------

class ArbitraryNode(CorrectNode):
    """Sends seeded random, well-formed blocks built from whatever it has seen"""

    byzantine = ByzantineKind.ARBITRARY

    def __init__(self, me: ValidatorId, params: MachineParams, rng: random.Random):
        super().__init__(me, params, rng)
        self.seq = 0

    def on_timer(self, now: int) -> list[Outbound]:
        dag = self.machine.dag
        self.seq += 1

        known = sorted(dag.blocks)
        parents = set(self.rng.sample(known, k=min(len(known), self.rng.randint(1, 3))))

        txs: list[Transaction] = []
        known_txs = sorted(dag.transactions)
        if known_txs and self.rng.random() < 0.5:
            txs.append(dag.transactions[self.rng.choice(known_txs)])
        indices = sorted(dag.index_txs)
        if indices and self.rng.random() < 0.5:
            txs.append(Transaction(f"arbitrary/{self.me}/{self.seq}".encode(), self.rng.choice(indices)))

        votes = []
        for i in indices:
            if self.rng.random() < 0.5:
                choice: TxHash = self.rng.choice(sorted(dag.index_txs[i]))
                votes.append(Vote(i, choice, self.rng.randint(0, 3)))

        block = Block(
            creator=self.me, seq=self.seq, parents=tuple(parents), transactions=tuple(txs), votes=tuple(votes)
        )
        self.machine.handle_receive_block(block, now)
        self.last_effects = Effects(blocks=[block])
        return [Outbound(block)]

    def on_dls_message(self, message: DlsMessage, now: int) -> list[Outbound]:
        return []

    def on_dls_tick(self, now: int) -> list[Outbound]:
        return []

    def dls_next_boundary(self, now: int) -> Optional[int]:
        return None


NODE_TYPES: dict[ByzantineKind, type[CorrectNode]] = {
    ByzantineKind.SILENT: SilentNode,
    ByzantineKind.EQUIVOCATOR: EquivocatorNode,
    ByzantineKind.DOUBLE_VOTER: DoubleVoterNode,
    ByzantineKind.SPAMMER: SpammerNode,
    ByzantineKind.ARBITRARY: ArbitraryNode,
}


def build_node(
    me: ValidatorId,
    params: MachineParams,
    rng: random.Random,
    behavior: Optional[ByzantineKind] = None,
    lag: int = 10,
) -> CorrectNode:
    if behavior is None:
        return CorrectNode(me, params, rng)
    behavior = ByzantineKind(behavior)
    if behavior == ByzantineKind.EQUIVOCATOR:
        return EquivocatorNode(me, params, rng, lag=lag)
    return NODE_TYPES[behavior](me, params, rng)
