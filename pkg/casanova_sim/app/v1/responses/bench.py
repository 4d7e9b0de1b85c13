from typing import Optional

from pydantic import Field

from casanova_sim.app.core.base.records import BaseRecord


class LatencyStats(BaseRecord):
    """Ticks from conflict discovery to the last correct validator's decision"""

    samples: int = 0
    min: Optional[int] = None
    median: Optional[float] = None
    p95: Optional[int] = None
    max: Optional[int] = None


class RunOutcome(BaseRecord):
    seed: int
    holds: bool
    violations: list[str] = Field(default_factory=list)
    bounds_exceeded: bool = False
    latencies: list[int] = Field(default_factory=list)
    max_decision_round: Optional[int] = None
    dual_path: bool = False


class BenchReport(BaseRecord):
    """Schema for a batch of seeded runs of one scenario"""

    variant: str
    runs: int
    first_seed: int
    continued_for: int = 0
    violations: dict[str, int] = Field(default_factory=dict)
    failing_seeds: list[int] = Field(default_factory=list)
    bounds_exceeded_runs: int = 0
    decided_by_round1: float = 0.0
    dual_path_runs: int = 0
    latency: LatencyStats = Field(default_factory=LatencyStats)

    @property
    def exit_code(self) -> int:
        return 1 if self.failing_seeds else 0
