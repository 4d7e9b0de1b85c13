import json
from typing import Annotated, Literal, Optional, Union

from pydantic import Field, TypeAdapter, ValidationError

from casanova_sim.app.core.base.errors import TraceError
from casanova_sim.app.core.base.records import BaseRecord
from casanova_sim.app.utils.file import read_lines, write_lines


class TraceHeader(BaseRecord):
    """Schema for the first line of a trace"""

    record: Literal["header"] = "header"
    variant: str
    n: int
    f: int
    seed: int
    horizon: int
    block_interval: int
    round_length: int
    network_mode: str
    delta: int
    gst: int
    byzantine: dict[str, str] = {}
    bounds_exceeded: bool = False
    scenario: dict = {}

    def correct_validators(self) -> list[int]:
        return [v for v in range(self.n) if str(v) not in self.byzantine]


class EventRecord(BaseRecord):
    """Schema for one handler invocation"""

    record: Literal["event"] = "event"
    index: int
    tick: int
    validator: int
    kind: str
    source: Optional[int] = None
    sent_at: Optional[int] = None
    payload: str = ""
    faults: list[int] = []


class DecisionChange(BaseRecord):
    """Schema for a change of one validator's decide() answer

    `chosen` is set for Chosen answers; `alternatives` always lists the
    alternatives the validator knew when the change happened.
    """

    record: Literal["decision"] = "decision"
    event: int
    tick: int
    validator: int
    conflict_index: str
    chosen: Optional[str] = None
    round: Optional[int] = None
    source: Optional[str] = None
    alternatives: list[str] = []


class BlockRecord(BaseRecord):
    """Schema for a block created during the run"""

    record: Literal["block"] = "block"
    tick: int
    block_hash: str
    creator: int
    seq: int
    label: str
    parents: list[str] = []
    transactions: list[dict] = []
    votes: list[dict] = []
    resolutions: list[dict] = []


class FinalDag(BaseRecord):
    """Schema for one validator's DAG when the run ended"""

    record: Literal["final_dag"] = "final_dag"
    validator: int
    correct: bool
    blocks: list[str] = []
    excluded: list[int] = []
    decided: dict[str, str] = {}


TraceLine = Annotated[
    Union[TraceHeader, EventRecord, DecisionChange, BlockRecord, FinalDag], Field(discriminator="record")
]
_line_adapter = TypeAdapter(TraceLine)


class Trace(BaseRecord):
    """A complete simulation run, written as line-delimited JSON"""

    header: TraceHeader
    events: list[EventRecord] = Field(default_factory=list)
    decisions: list[DecisionChange] = Field(default_factory=list)
    blocks: list[BlockRecord] = Field(default_factory=list)
    final_dags: list[FinalDag] = Field(default_factory=list)

    @property
    def bounds_exceeded(self) -> bool:
        if self.header.bounds_exceeded:
            return True
        return any(len(d.excluded) > self.header.f for d in self.final_dags if d.correct)

    def correct_validators(self) -> list[int]:
        return self.header.correct_validators()

    def block_labels(self) -> dict[str, str]:
        return {b.block_hash: b.label for b in self.blocks}

    def final_dag(self, validator: int) -> Optional[FinalDag]:
        return next((d for d in self.final_dags if d.validator == validator), None)

    def to_lines(self) -> list[str]:
        lines = [self.header.to_line()]
        lines.extend(record.to_line() for record in self.events)
        lines.extend(record.to_line() for record in self.decisions)
        lines.extend(record.to_line() for record in self.blocks)
        lines.extend(record.to_line() for record in self.final_dags)
        return lines

    def dumps(self) -> str:
        return "".join(f"{line}\n" for line in self.to_lines())

    def write(self, path):
        write_lines(path, self.to_lines())

    @classmethod
    def from_lines(cls, lines: list[str], source: str = "<trace>") -> "Trace":
        """Rebuilds a trace from its line-delimited form

        Raises:
            TraceError: on malformed lines or a missing header
        """

        header = None
        parts = {"event": [], "decision": [], "block": [], "final_dag": []}
        for number, line in enumerate(lines, start=1):
            try:
                record = _line_adapter.validate_python(json.loads(line))
            except (ValueError, ValidationError) as exc:
                raise TraceError(f"{source}:{number}: malformed trace record ({exc.__class__.__name__})")
            if isinstance(record, TraceHeader):
                header = record
            else:
                parts[record.record].append(record)

        if header is None:
            raise TraceError(f"{source}: trace has no header record")
        return cls(
            header=header,
            events=parts["event"],
            decisions=parts["decision"],
            blocks=parts["block"],
            final_dags=parts["final_dag"],
        )

    @classmethod
    def read(cls, path) -> "Trace":
        try:
            lines = read_lines(path)
        except OSError as exc:
            raise TraceError(f"Cannot read trace {path}: {exc.strerror}")
        return cls.from_lines(lines, source=str(path))
