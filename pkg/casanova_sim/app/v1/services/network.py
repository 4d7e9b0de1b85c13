import random
from dataclasses import dataclass, field
from typing import Optional

from casanova_sim.app.utils.types import NetworkMode, ValidatorId
from casanova_sim.app.v1.schemas.scenario import LinkDelay


@dataclass
class NetworkModel:
    """Seeded message-delivery adversary

    partial_sync: a message sent at t arrives by max(t, GST) + delta; before
    GST the adversary may hold it anywhere up to that bound.
    async: messages are dropped, delayed by up to `reorder_window` ticks
    (which reorders them) and duplicated, each with its own probability.
    A matching link override replaces the random choice with its fixed delay.
    """

    mode: NetworkMode
    rng: random.Random
    delta: int = 2
    gst: int = 0
    drop: float = 0.0
    reorder_window: int = 20
    duplicate: float = 0.0
    links: list[LinkDelay] = field(default_factory=list)

    def __post_init__(self):
        self.mode = NetworkMode(self.mode)

    def delivery_times(
        self,
        sent_at: int,
        source: Optional[ValidatorId] = None,
        target: Optional[ValidatorId] = None,
        kind: Optional[str] = None,
    ) -> list[int]:
        """Ticks at which one copy of a message sent at `sent_at` is delivered

        Returns:
            list: empty when the message is dropped, two entries when duplicated
        """

        link = self.link(sent_at, source, target, kind)
        if link is not None:
            arrival = sent_at + link.delay
            if self.mode == NetworkMode.PARTIAL_SYNC:
                arrival = min(arrival, self.bound(sent_at))
            return [arrival]

        if self.mode == NetworkMode.PARTIAL_SYNC:
            return [self._bounded(sent_at)]

        if self.rng.random() < self.drop:
            return []
        times = [sent_at + self.rng.randint(1, self.reorder_window)]
        if self.rng.random() < self.duplicate:
            times.append(sent_at + self.rng.randint(1, self.reorder_window))
        return sorted(times)

    def link(
        self, sent_at: int, source: Optional[ValidatorId], target: Optional[ValidatorId], kind: Optional[str]
    ) -> Optional[LinkDelay]:
        """The first override covering this message, if any"""

        for link in self.links:
            if (link.source, link.target) != (source, target) or sent_at < link.start:
                continue
            if link.until is not None and sent_at >= link.until:
                continue
            if link.kind is None or link.kind == kind:
                return link
        return None

    def _bounded(self, sent_at: int) -> int:
        deadline = max(sent_at, self.gst) + self.delta
        return self.rng.randint(sent_at + 1, max(deadline, sent_at + 1))

    def bound(self, sent_at: int) -> int:
        return max(sent_at, self.gst) + self.delta
