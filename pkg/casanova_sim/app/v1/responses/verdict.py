from enum import Enum
from typing import Optional

from pydantic import Field, model_validator

from casanova_sim.app.core.base.records import BaseRecord


class PropertyName(str, Enum):
    SAFETY = "safety"
    LIVENESS = "liveness"
    LEMMA1 = "lemma1"
    EVENTUAL_CHOICE = "eventual_choice"
    STABILITY = "stability"


class Verdict(BaseRecord):
    """Schema for the outcome of one property check

    `counterexample` is the slice of trace records that breaks the property;
    it is present exactly when the property does not hold.
    """

    property: PropertyName
    holds: bool
    counterexample: Optional[list[dict]] = None
    vacuous: bool = False
    bounds_exceeded: bool = False
    detail: str = ""
    stats: dict = Field(default_factory=dict)

    @model_validator(mode="after")
    def validate_counterexample(self):
        if self.holds and self.counterexample is not None:
            raise ValueError("a holding verdict cannot carry a counterexample")
        if not self.holds and not self.counterexample:
            raise ValueError("a failing verdict needs a counterexample")
        return self

    @property
    def counts_as_violation(self) -> bool:
        """Failures in runs that exceed the fault bound are reported but not counted"""

        return not self.holds and not self.bounds_exceeded


class DagStatistics(BaseRecord):
    blocks_created: int = 0
    final_dag_sizes: dict[str, int] = Field(default_factory=dict)
    excluded: dict[str, list[int]] = Field(default_factory=dict)
    decided_indices: int = 0
    decision_changes: int = 0


class VerdictSummary(BaseRecord):
    """Schema for every verdict of one trace and the exit status they imply"""

    seed: int
    variant: str
    bounds_exceeded: bool = False
    verdicts: list[Verdict] = Field(default_factory=list)
    statistics: DagStatistics = Field(default_factory=DagStatistics)

    @property
    def violations(self) -> list[Verdict]:
        return [v for v in self.verdicts if v.counts_as_violation]

    @property
    def holds(self) -> bool:
        return not self.violations

    @property
    def exit_code(self) -> int:
        return 0 if self.holds else 1

    def verdict(self, name: PropertyName) -> Optional[Verdict]:
        name = PropertyName(name)
        return next((v for v in self.verdicts if PropertyName(v.property) == name), None)
