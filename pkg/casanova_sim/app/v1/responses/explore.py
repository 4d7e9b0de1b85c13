from typing import Optional

from pydantic import Field

from casanova_sim.app.core.base.records import BaseRecord


class ExploreViolation(BaseRecord):
    """Schema for the first unsafe state reached, with the actions leading to it"""

    conflict_index: str
    chosen: dict[str, str]
    path: list[str] = Field(default_factory=list)


class ExploreReport(BaseRecord):
    """Schema for an exhaustive exploration outcome

    `complete` is False when the state budget ran out before every
    reachable state was visited.
    """

    n: int
    f: int
    tolerance: int
    variant: str
    behavior: Optional[str] = None
    max_blocks: int
    schedule: str = "layered"
    explored: int
    complete: bool
    bounds_exceeded: bool = False
    violation: Optional[ExploreViolation] = None

    @property
    def exit_code(self) -> int:
        if self.violation is not None:
            return 1
        return 0 if self.complete else 2
