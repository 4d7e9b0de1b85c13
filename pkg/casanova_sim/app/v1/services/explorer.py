"""Exhaustive depth-first search over small executions

Every validator (and every fork of an equivocating validator) is an actor.
Fork k of an equivocator belongs to group k, every other actor to group
`v % 2`. One conflicting pair is injected up front: group 0 receives the
first transaction and group 1 the second.

Two schedules can be searched:

- `interleaved`: from each state one actor creates its next block, ticks its
  side protocol timer, or takes the oldest undelivered message of one
  (sender, recipient) channel. Channels are FIFO, so the delivered part of a
  channel is always a prefix of what was sent on it.
- `layered`: blocks are created in layers. Before layer k every actor takes
  everything pending from its own group, and each non-fork actor either also
  takes everything pending from the other group or keeps waiting for it.
  Forks only ever hear their own group. Side protocol timers then run up to
  the layer clock and every actor creates its k-th block. One last layer
  delivers without creating blocks.

States are deduplicated by a digest of every actor's machine plus the
channel contents.
"""

import copy
import random
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

from casanova_sim.app.core.base.errors import StateBudgetExceeded
from casanova_sim.app.utils.encoding import digest, encode_bytes, encode_int, encode_seq, encode_str
from casanova_sim.app.utils.logger import logger
from casanova_sim.app.utils.types import ByzantineKind, ExploreSchedule, ProtocolVariant
from casanova_sim.app.v1.models import Block, Transaction
from casanova_sim.app.v1.responses.explore import ExploreReport, ExploreViolation
from casanova_sim.app.v1.schemas.explore import ExploreRequest
from casanova_sim.app.v1.services.byzantine import CorrectNode, ForkNode, Outbound, Payload, build_node
from casanova_sim.app.v1.services.dls import message_id
from casanova_sim.app.v1.services.protocols import Chosen, MachineParams

BLOCK_INTERVAL = 10
CONFLICT_INDEX = "double-spend"
NOBODY = "-"

Action = tuple[str, ...]


@dataclass
class Actor:
    name: str
    validator: int
    group: int
    node: CorrectNode
    produced: int = 0
    clock: int = 0

    @property
    def is_fork(self) -> bool:
        return isinstance(self.node, ForkNode)


@dataclass
class ExploreState:
    actors: dict[str, Actor]
    channels: dict[tuple[str, str], tuple[Payload, ...]] = field(default_factory=dict)
    layer: int = 0

    def fingerprint(self) -> bytes:
        actors = encode_seq(
            encode_str(name) + a.node.fingerprint() + encode_int(a.produced) + encode_int(a.clock)
            for name, a in sorted(self.actors.items())
        )
        channels = encode_seq(
            encode_str(src) + encode_str(dst) + encode_seq(_payload_id(p) for p in queue)
            for (src, dst), queue in sorted(self.channels.items()) if queue
        )
        return digest(encode_int(self.layer) + actors + channels)


def _payload_id(payload: Payload) -> bytes:
    if isinstance(payload, Block):
        return encode_bytes(payload.block_hash)
    return encode_bytes(message_id(payload))


def tolerance(n: int, f: int) -> int:
    """Fault tolerance the machines are configured with; capped when f breaks N >= 3f + 1"""

    return min(f, (n - 1) // 3)


class Explorer:
    def __init__(self, request: ExploreRequest):
        self.request = request
        self.n, self.f = request.n, request.f
        self.schedule = ExploreSchedule(request.schedule)
        self.tolerance = tolerance(self.n, self.f)
        self.bounds_exceeded = self.n < 3 * self.f + 1
        self.params = MachineParams(
            n=self.n,
            f=self.tolerance,
            variant=request.variant,
            strict_bounds=request.strict_bounds and not self.bounds_exceeded,
        )
        self.byzantine = set(range(self.n - self.f, self.n)) if request.behavior else set()
        self.time_limit = (request.max_blocks + 1) * BLOCK_INTERVAL
        self.explored = 0
        self._visited: set[bytes] = set()

    # ---------------- SETUP ----------------

    def initial_state(self) -> ExploreState:
        actors = {}
        for v in range(self.n):
            behavior = ByzantineKind(self.request.behavior) if v in self.byzantine else None
            if behavior == ByzantineKind.EQUIVOCATOR:
                for fork in (0, 1):
                    node = ForkNode(v, self.params, random.Random(v), fork=fork)
                    actors[f"{v}/{fork}"] = Actor(f"{v}/{fork}", v, fork, node)
            else:
                node = build_node(v, self.params, random.Random(v), behavior)
                actors[str(v)] = Actor(str(v), v, v % 2, node)

        pair = [Transaction(f"explore/{k}".encode(), CONFLICT_INDEX) for k in (0, 1)]
        for actor in actors.values():
            actor.node.on_client_tx(pair[actor.group], 0)
        return ExploreState(actors)

    # ---------------- TRANSITIONS ----------------

    def actions(self, state: ExploreState) -> list[Action]:
        if self.schedule == ExploreSchedule.LAYERED:
            return self._layer_actions(state)
        return self._interleaved_actions(state)

    def _interleaved_actions(self, state: ExploreState) -> list[Action]:
        """Same-group deliveries first, then block creation, then cross-group deliveries and timers"""

        same, cross = [], []
        for (src, dst), queue in sorted(state.channels.items()):
            if queue:
                target = same if state.actors[src].group == state.actors[dst].group else cross
                target.append(("deliver", src, dst))

        blocks = [
            ("block", name)
            for _, name in sorted((a.produced, a.name) for a in state.actors.values())
            if state.actors[name].produced < self.request.max_blocks
        ]
        timers = []
        for name, actor in sorted(state.actors.items()):
            boundary = actor.node.dls_next_boundary(actor.clock)
            if boundary is not None and boundary <= self.time_limit:
                timers.append(("dls", name))
        return same + blocks + cross + timers

    def _layer_actions(self, state: ExploreState) -> list[Action]:
        """One action per set of actors that hear the other group before the next layer; the empty set first"""

        if state.layer > self.request.max_blocks:
            return []
        waiting = sorted({
            dst for (src, dst), queue in state.channels.items()
            if queue and not state.actors[dst].is_fork and state.actors[src].group != state.actors[dst].group
        })
        layer = str(state.layer + 1)
        return [
            ("layer", layer, "+".join(chosen) or NOBODY)
            for size in range(len(waiting) + 1)
            for chosen in combinations(waiting, size)
        ]

    def apply(self, state: ExploreState, action: Action) -> ExploreState:
        state = copy.deepcopy(state)
        kind = action[0]
        if kind == "layer":
            self._apply_layer(state, int(action[1]), set(action[2].split("+")) - {NOBODY})
            return state

        if kind == "deliver":
            src, dst = action[1], action[2]
            payload, *rest = state.channels[(src, dst)]
            state.channels[(src, dst)] = tuple(rest)
            actor = state.actors[dst]
            outbound = self._deliver(actor, payload)
        elif kind == "block":
            actor = state.actors[action[1]]
            actor.produced += 1
            actor.clock = max(actor.clock, actor.produced * BLOCK_INTERVAL)
            outbound = actor.node.on_timer(actor.clock)
        else:
            actor = state.actors[action[1]]
            actor.clock = actor.node.dls_next_boundary(actor.clock)
            outbound = actor.node.on_dls_tick(actor.clock)

        self._route(state, actor, outbound)
        return state

    def _apply_layer(self, state: ExploreState, layer: int, hearing: set[str]):
        state.layer = layer
        pending, state.channels = state.channels, {}
        deliveries = []
        for (src, dst), queue in sorted(pending.items()):
            if not queue:
                continue
            if state.actors[src].group == state.actors[dst].group or dst in hearing:
                deliveries.append((dst, queue))
            else:
                state.channels[(src, dst)] = queue

        for dst, queue in deliveries:
            actor = state.actors[dst]
            for payload in queue:
                self._route(state, actor, self._deliver(actor, payload))

        clock = min(layer * BLOCK_INTERVAL, self.time_limit)
        for _, actor in sorted(state.actors.items()):
            self._run_timers(state, actor, clock)

        if layer > self.request.max_blocks:
            return
        for _, actor in sorted(state.actors.items()):
            actor.produced += 1
            actor.clock = max(actor.clock, clock)
            self._route(state, actor, actor.node.on_timer(actor.clock))

    def _run_timers(self, state: ExploreState, actor: Actor, clock: int):
        while True:
            boundary = actor.node.dls_next_boundary(actor.clock)
            if boundary is None or boundary > clock:
                return
            actor.clock = boundary
            self._route(state, actor, actor.node.on_dls_tick(boundary))

    @staticmethod
    def _deliver(actor: Actor, payload: Payload) -> list[Outbound]:
        if isinstance(payload, Block):
            return actor.node.on_block(payload, actor.clock)
        return actor.node.on_dls_message(payload, actor.clock)

    def _route(self, state: ExploreState, sender: Actor, outbound: list[Outbound]):
        for out in outbound:
            validators = set(out.recipients) if out.recipients is not None else set(range(self.n))
            validators.discard(sender.validator)
            for name, actor in sorted(state.actors.items()):
                if actor.validator in validators:
                    key = (sender.name, name)
                    state.channels[key] = state.channels.get(key, ()) + (out.payload,)

    # ---------------- SAFETY ----------------

    def unsafe(self, state: ExploreState) -> Optional[tuple[str, dict[str, str]]]:
        """The first index on which two correct validators chose different values"""

        chosen: dict[str, dict[str, str]] = {}
        for actor in state.actors.values():
            if not actor.node.is_correct:
                continue
            machine = actor.node.machine
            for i in machine.known_indices():
                decision = machine.decide(i)
                if isinstance(decision, Chosen):
                    chosen.setdefault(i, {})[str(actor.validator)] = decision.value.hex()
        for i, values in sorted(chosen.items()):
            if len(set(values.values())) > 1:
                return i, values
        return None

    # ---------------- SEARCH ----------------

    def _visit(self, state: ExploreState) -> bool:
        key = state.fingerprint()
        if key in self._visited:
            return False
        self._visited.add(key)
        self.explored += 1
        if self.explored > self.request.max_states:
            raise StateBudgetExceeded(f"state budget of {self.request.max_states} exhausted", self.explored)
        if self.explored % 10000 == 0:
            logger.info(f"explorer: {self.explored} states visited")
        return True

    def search(self) -> Optional[ExploreViolation]:
        """Depth-first search; returns the first violation found

        Raises:
            StateBudgetExceeded: when more than `max_states` distinct states are reached
        """

        root = self.initial_state()
        self._visit(root)
        stack = [(root, [], iter(self.actions(root)))]
        while stack:
            state, path, pending = stack[-1]
            action = next(pending, None)
            if action is None:
                stack.pop()
                continue

            child = self.apply(state, action)
            if not self._visit(child):
                continue
            child_path = path + [":".join(action)]
            found = self.unsafe(child)
            if found is not None:
                i, chosen = found
                return ExploreViolation(conflict_index=i, chosen=chosen, path=child_path)
            stack.append((child, child_path, iter(self.actions(child))))
        return None

    def run(self) -> ExploreReport:
        complete = True
        violation = None
        try:
            violation = self.search()
        except StateBudgetExceeded as exc:
            logger.warning(f"explorer: {exc.detail}, reporting a partial result")
            complete = False
            self.explored = exc.explored - 1

        if violation is not None:
            logger.warning(f"explorer: safety violation on {violation.conflict_index!r} after {len(violation.path)} actions")
        logger.info(f"explorer: {self.schedule.value} schedule, {self.explored} states")
        return ExploreReport(
            n=self.n,
            f=self.f,
            tolerance=self.tolerance,
            variant=ProtocolVariant(self.params.variant).value,
            behavior=ByzantineKind(self.request.behavior).value if self.request.behavior else None,
            max_blocks=self.request.max_blocks,
            schedule=self.schedule.value,
            explored=self.explored,
            complete=complete and violation is None,
            bounds_exceeded=self.bounds_exceeded,
            violation=violation,
        )


def explore(request: ExploreRequest) -> ExploreReport:
    """Searches every execution of the requested schedule and checks safety in each state"""

    return Explorer(request).run()
