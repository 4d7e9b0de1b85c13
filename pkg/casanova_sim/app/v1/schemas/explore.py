from typing import Annotated, Optional
from pydantic import BaseModel, Field, model_validator

from casanova_sim.app.utils.types import ByzantineKind, ExploreSchedule, ProtocolVariant
from casanova_sim.app.v1.services.quorum import check_fault_bound

class ExploreRequest(BaseModel):
    """Schema for an exhaustive safety exploration

    The last f validators run `behavior`; with no behavior every validator
    is correct and f only sets the quorum sizes.
    """

    n: Annotated[int, Field(ge=1, le=4)] = 4
    f: Annotated[int, Field(ge=0)] = 1
    variant: ProtocolVariant = ProtocolVariant.CASANOVA
    behavior: Optional[ByzantineKind] = ByzantineKind.EQUIVOCATOR
    max_blocks: Annotated[int, Field(ge=1, le=4)] = 3
    max_states: Annotated[int, Field(ge=1)] = 200000
    schedule: ExploreSchedule = ExploreSchedule.LAYERED
    strict_bounds: bool = False

    @model_validator(mode='after')
    def validate_request(self):
        """Function to check cross-field constraints"""

        if self.f > self.n:
            raise ValueError(f"f = {self.f} exceeds n = {self.n}")
        if self.strict_bounds:
            check_fault_bound(self.n, self.f)
        return self
