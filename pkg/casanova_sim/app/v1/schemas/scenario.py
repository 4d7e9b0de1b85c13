from typing import Annotated, Literal, Optional
from pydantic import BaseModel, ConfigDict, Field, model_validator

from casanova_sim.app.utils.settings import settings
from casanova_sim.app.utils.types import ByzantineKind, NetworkMode, ProtocolVariant
from casanova_sim.app.v1.services.quorum import check_fault_bound

class LinkDelay(BaseModel):
    """Schema for a fixed delay on one directed link

    Messages from `source` to `target` sent in [start, until) arrive `delay`
    ticks later; `kind` narrows that to blocks or to side consensus messages.
    Under partial synchrony the delay is still capped by the GST bound.
    """

    model_config = ConfigDict(extra="forbid")

    source: Annotated[int, Field(ge=0)]
    target: Annotated[int, Field(ge=0)]
    delay: Annotated[int, Field(ge=1)]
    start: Annotated[int, Field(ge=0)] = 0
    until: Optional[Annotated[int, Field(ge=0)]] = None
    kind: Optional[Literal["block", "side"]] = None

    @model_validator(mode='after')
    def validate_link(self):
        """Function to check cross-field constraints"""

        if self.source == self.target:
            raise ValueError(f"link {self.source} -> {self.target} loops back to its source")
        if self.until is not None and self.until <= self.start:
            raise ValueError(f"link window [{self.start}, {self.until}) is empty")
        return self

class NetworkConfig(BaseModel):
    """Schema for the message-delivery adversary"""

    model_config = ConfigDict(extra="forbid")

    mode: NetworkMode = NetworkMode.PARTIAL_SYNC
    delta: Annotated[int, Field(ge=1)] = 2
    gst: Annotated[int, Field(ge=0)] = 0
    drop: Annotated[float, Field(ge=0.0, le=1.0)] = 0.0
    reorder_window: Annotated[int, Field(ge=1)] = 20
    duplicate: Annotated[float, Field(ge=0.0, le=1.0)] = 0.0
    links: list[LinkDelay] = []

class TxInjection(BaseModel):
    """Schema for one scheduled client transaction

    `recipients` defaults to every validator; `requested_parents` names the
    payloads of transactions injected earlier in the same scenario.
    """

    model_config = ConfigDict(extra="forbid")

    payload: Annotated[str, Field(min_length=1)]
    conflict_index: Annotated[str, Field(min_length=1)]
    recipients: Optional[list[int]] = None
    at: Annotated[int, Field(ge=0)] = 0
    requested_parents: list[str] = []

class ScenarioConfig(BaseModel):
    """Schema for a simulation scenario"""

    model_config = ConfigDict(extra="forbid", use_enum_values=False)

    variant: ProtocolVariant = ProtocolVariant.CASANOVA
    n: Annotated[int, Field(ge=1)] = 4
    f: Annotated[int, Field(ge=0)] = 0
    byzantine: dict[int, ByzantineKind] = {}
    network: NetworkConfig = NetworkConfig()
    seed: int = settings.DEFAULT_SEED
    horizon: Annotated[int, Field(ge=1)] = 400
    block_interval: Annotated[int, Field(ge=1)] = 10
    round_length: Annotated[int, Field(ge=1)] = 1
    dls_base: Annotated[int, Field(ge=1)] = 4
    dls_delta: Annotated[int, Field(ge=1)] = 2
    dls_ack_quorum: Annotated[int, Field(ge=0)] = 0
    strict_bounds: bool = True
    weights: Optional[dict[int, Annotated[int, Field(ge=1)]]] = None
    transactions: list[TxInjection] = []

    @model_validator(mode='after')
    def validate_scenario(self):
        """Function to check cross-field constraints"""

        if self.strict_bounds:
            check_fault_bound(self.n, self.f)

        for validator in self.byzantine:
            if not 0 <= validator < self.n:
                raise ValueError(f"byzantine validator {validator} is not in [0, {self.n})")
        if len(self.byzantine) != self.f:
            raise ValueError(
                f"byzantine assigns {len(self.byzantine)} validators but f = {self.f}; the two must match"
            )

        for link in self.network.links:
            if max(link.source, link.target) >= self.n:
                raise ValueError(f"link {link.source} -> {link.target} names a validator outside [0, {self.n})")

        payloads = set()
        for tx in self.transactions:
            if tx.payload in payloads:
                raise ValueError(f"transaction payload {tx.payload!r} is injected twice")
            for parent in tx.requested_parents:
                if parent not in payloads:
                    raise ValueError(f"requested parent {parent!r} of {tx.payload!r} is not injected before it")
            for recipient in tx.recipients or []:
                if not 0 <= recipient < self.n:
                    raise ValueError(f"recipient {recipient} of {tx.payload!r} is not in [0, {self.n})")
            payloads.add(tx.payload)

        return self

    @property
    def bounds_exceeded(self) -> bool:
        return self.n < 3 * self.f + 1
