"""Deterministic discrete-event simulation of N validators

Events sit in a heap keyed by (deliver_at, seq); `seq` comes from one
counter so no two events share a key and ties resolve in scheduling order.
Every random choice is drawn from generators seeded off the scenario seed,
so a (scenario, seed) pair always yields the same trace.
"""

import heapq
import itertools
import random
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from casanova_sim.app.utils.logger import logger
from casanova_sim.app.utils.types import ValidatorId
from casanova_sim.app.v1.models import Block, Transaction
from casanova_sim.app.v1.responses.trace import BlockRecord, DecisionChange, EventRecord, FinalDag, Trace, TraceHeader
from casanova_sim.app.v1.schemas.scenario import ScenarioConfig
from casanova_sim.app.v1.services.byzantine import CorrectNode, Outbound, build_node
from casanova_sim.app.v1.services.dls import DlsMessage, message_id
from casanova_sim.app.v1.services.network import NetworkModel
from casanova_sim.app.v1.services.protocols import Chosen, Effects, MachineParams
from casanova_sim.app.v1.services.scenarios import build_injections


@dataclass(frozen=True)
class TimerFire:
    pass


@dataclass(frozen=True)
class DlsTimer:
    pass


@dataclass(frozen=True)
class ClientTx:
    tx: Transaction


EventPayload = Union[Block, DlsMessage, TimerFire, DlsTimer, ClientTx]


@dataclass(frozen=True)
class SimEvent:
    deliver_at: int
    seq: int
    target: ValidatorId
    payload: EventPayload
    source: Optional[ValidatorId] = None
    sent_at: Optional[int] = None


def payload_kind(payload: EventPayload) -> str:
    if isinstance(payload, TimerFire):
        return "timer"
    if isinstance(payload, DlsTimer):
        return "dls_timer"
    if isinstance(payload, ClientTx):
        return "client_tx"
    if isinstance(payload, Block):
        return "block"
    return "dls_message"


def payload_id(payload: EventPayload) -> str:
    if isinstance(payload, ClientTx):
        return payload.tx.tx_hash.hex()
    if isinstance(payload, Block):
        return payload.block_hash.hex()
    if isinstance(payload, (TimerFire, DlsTimer)):
        return ""
    return message_id(payload).hex()


class Simulator:
    def __init__(self, config: ScenarioConfig, seed: Optional[int] = None, inject: bool = True):
        self.config = config
        self.seed = config.seed if seed is None else seed
        self.rng = random.Random(self.seed)
        self.network = self._network(random.Random(self.rng.getrandbits(64)))
        self.params = MachineParams(
            n=config.n,
            f=config.f,
            variant=config.variant,
            round_length=config.round_length,
            dls_base=config.dls_base,
            dls_delta=config.dls_delta,
            dls_ack_quorum=config.dls_ack_quorum,
            strict_bounds=config.strict_bounds,
            weights=config.weights,
        )
        self.nodes: list[CorrectNode] = [
            build_node(
                v, self.params, random.Random(self.rng.getrandbits(64)),
                config.byzantine.get(v), lag=config.block_interval,
            )
            for v in range(config.n)
        ]

        self.now = 0
        self.queue: list[tuple[int, int, SimEvent]] = []
        self.unauthenticated = 0
        self._counter = itertools.count()
        self._dls_timers: set[tuple[ValidatorId, int]] = set()
        self._last_decisions: dict[tuple[ValidatorId, str], tuple] = {}
        self._last_state: dict[ValidatorId, tuple] = {}
        self._created: set[bytes] = set()

        self.events: list[EventRecord] = []
        self.decisions: list[DecisionChange] = []
        self.blocks: list[BlockRecord] = []

        for v in range(config.n):
            self._push(config.block_interval, v, TimerFire())
        if inject:
            for injection in build_injections(config):
                self.inject_client_tx(injection.tx, injection.recipients, injection.at)

    def _network(self, rng: random.Random) -> NetworkModel:
        net = self.config.network
        return NetworkModel(
            mode=net.mode, rng=rng, delta=net.delta, gst=net.gst,
            drop=net.drop, reorder_window=net.reorder_window, duplicate=net.duplicate, links=list(net.links),
        )

    def reseed_network(self, seed: int):
        """Fresh adversarial schedule from here on; already queued deliveries stay"""

        self.network = self._network(random.Random(seed))

    # ---------------- QUEUE ----------------

    def _push(
        self,
        deliver_at: int,
        target: ValidatorId,
        payload: EventPayload,
        source: Optional[ValidatorId] = None,
        sent_at: Optional[int] = None,
    ):
        event = SimEvent(deliver_at, next(self._counter), target, payload, source, sent_at)
        heapq.heappush(self.queue, (event.deliver_at, event.seq, event))

    def inject_client_tx(self, tx: Transaction, recipients: Iterable[ValidatorId], at: int):
        """Schedules a client transaction for each recipient at tick `at`"""

        if at < self.now:
            raise ValueError(f"cannot inject at tick {at}, simulation is at tick {self.now}")
        for v in sorted(set(recipients)):
            self._push(at, v, ClientTx(tx))

    # ---------------- STEPPING ----------------

    def step(self) -> Optional[SimEvent]:
        """Processes the earliest event and schedules everything it caused"""

        if not self.queue:
            return None
        _, _, event = heapq.heappop(self.queue)
        self.now = event.deliver_at
        node = self.nodes[event.target]
        node.last_effects = Effects()
        payload = event.payload

        if isinstance(payload, TimerFire):
            outbound = node.on_timer(self.now)
            self._push(self.now + self.config.block_interval, event.target, TimerFire())
        elif isinstance(payload, DlsTimer):
            self._dls_timers.discard((event.target, self.now))
            outbound = node.on_dls_tick(self.now)
        elif isinstance(payload, ClientTx):
            outbound = node.on_client_tx(payload.tx, self.now)
        elif isinstance(payload, Block):
            outbound = node.on_block(payload, self.now)
        elif payload.sender != event.source:
            self.unauthenticated += 1
            outbound = []
        else:
            outbound = node.on_dls_message(payload, self.now)

        self._route(event.target, outbound)
        self._schedule_dls_timer(event.target)
        self._record(event, node)
        return event

    def _route(self, source: ValidatorId, outbound: list[Outbound]):
        for out in outbound:
            if isinstance(out.payload, Block):
                self._record_block(out.payload)
            recipients = out.recipients
            if recipients is None:
                recipients = tuple(v for v in range(self.config.n) if v != source)
            sent_at = self.now + out.delay
            kind = "block" if isinstance(out.payload, Block) else "side"
            for recipient in recipients:
                if recipient == source:
                    continue
                for deliver_at in self.network.delivery_times(sent_at, source, recipient, kind):
                    self._push(deliver_at, recipient, out.payload, source=source, sent_at=sent_at)

    def _schedule_dls_timer(self, v: ValidatorId):
        boundary = self.nodes[v].dls_next_boundary(self.now)
        if boundary is not None and (v, boundary) not in self._dls_timers:
            self._dls_timers.add((v, boundary))
            self._push(boundary, v, DlsTimer())

    def run_until(self, tick: int):
        while self.queue and self.queue[0][0] <= tick:
            self.step()

    def run(self) -> Trace:
        self.run_until(self.config.horizon)
        logger.info(
            f"simulation seed={self.seed} finished at tick {self.now}: "
            f"{len(self.events)} events, {len(self.blocks)} blocks"
        )
        return self.trace()

    # ---------------- RECORDING ----------------

    def _record_block(self, block: Block):
        if block.block_hash in self._created:
            return
        self._created.add(block.block_hash)
        data = block.to_dict()
        self.blocks.append(BlockRecord(
            tick=self.now,
            block_hash=data["block_hash"],
            creator=block.creator,
            seq=block.seq,
            label=block.label,
            parents=data["parents"],
            transactions=data["transactions"],
            votes=data["votes"],
            resolutions=data["resolutions"],
        ))

    def _record(self, event: SimEvent, node: CorrectNode):
        index = len(self.events)
        self.events.append(EventRecord(
            index=index,
            tick=self.now,
            validator=event.target,
            kind=payload_kind(event.payload),
            source=event.source,
            sent_at=event.sent_at,
            payload=payload_id(event.payload),
            faults=sorted({v for v, _ in node.last_effects.faults}),
        ))
        if node.is_correct:
            self._record_decisions(index, event.target, node)

    def _record_decisions(self, index: int, v: ValidatorId, node: CorrectNode):
        machine = node.machine
        state = (machine.dag.size, len(machine.decisions), len(machine.inprogress), len(machine.resolved))
        if self._last_state.get(v) == state:
            return
        self._last_state[v] = state

        for i in machine.known_indices():
            decision = machine.decide(i)
            alternatives = sorted(h.hex() for h in machine.dag.alternatives(i))
            if isinstance(decision, Chosen):
                key = ("chosen", decision.value, decision.round)
            else:
                key = ("alternatives", tuple(alternatives))
            if self._last_decisions.get((v, i)) == key:
                continue
            self._last_decisions[(v, i)] = key

            change = DecisionChange(event=index, tick=self.now, validator=v, conflict_index=i, alternatives=alternatives)
            if isinstance(decision, Chosen):
                change.chosen = decision.value.hex()
                change.round = decision.round
                change.source = machine.decision_source(i).value
            self.decisions.append(change)

    def trace(self) -> Trace:
        config = self.config
        header = TraceHeader(
            variant=config.variant.value,
            n=config.n,
            f=config.f,
            seed=self.seed,
            horizon=config.horizon,
            block_interval=config.block_interval,
            round_length=config.round_length,
            network_mode=config.network.mode.value,
            delta=config.network.delta,
            gst=config.network.gst,
            byzantine={str(v): kind.value for v, kind in sorted(config.byzantine.items())},
            bounds_exceeded=config.bounds_exceeded,
            scenario=config.model_dump(mode="json"),
        )

        final_dags = []
        for v, node in enumerate(self.nodes):
            machine = node.machine
            decided = {}
            if node.is_correct:
                for i in machine.known_indices():
                    decision = machine.decide(i)
                    if isinstance(decision, Chosen):
                        decided[i] = decision.value.hex()
            final_dags.append(FinalDag(
                validator=v,
                correct=node.is_correct,
                blocks=sorted(h.hex() for h in machine.dag.blocks),
                excluded=sorted(machine.dag.faulty()),
                decided=decided,
            ))

        return Trace(
            header=header,
            events=list(self.events),
            decisions=list(self.decisions),
            blocks=list(self.blocks),
            final_dags=final_dags,
        )


def run(scenario: ScenarioConfig, seed: Optional[int] = None) -> Trace:
    """Runs a scenario to its horizon and returns the full trace"""

    return Simulator(scenario, seed).run()


def step(sim: Simulator) -> Optional[SimEvent]:
    return sim.step()


def inject_client_tx(sim: Simulator, tx: Transaction, recipients: Iterable[ValidatorId], at: int):
    sim.inject_client_tx(tx, recipients, at)
