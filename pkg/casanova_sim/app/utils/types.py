from enum import Enum
from typing import TypeAlias

ValidatorId: TypeAlias = int
ConflictIndex: TypeAlias = str
TxHash: TypeAlias = bytes
BlockHash: TypeAlias = bytes

# genesis is created "by all validators"; it carries this reserved creator id
GENESIS_CREATOR: ValidatorId = -1


class ProtocolVariant(str, Enum):
    """The four validator state machines, from plain attestation to full Casanova"""

    ATTEST = "attest"
    CONFLICT_ATTEST = "conflict_attest"
    CONFLICT_EXCLUDE = "conflict_exclude"
    CASANOVA = "casanova"

    @property
    def uses_side_protocol(self) -> bool:
        return self in (ProtocolVariant.CONFLICT_ATTEST, ProtocolVariant.CONFLICT_EXCLUDE)


class ByzantineKind(str, Enum):
    SILENT = "silent"
    EQUIVOCATOR = "equivocator"
    DOUBLE_VOTER = "double_voter"
    SPAMMER = "spammer"
    ARBITRARY = "arbitrary"


class NetworkMode(str, Enum):
    ASYNC = "async"
    PARTIAL_SYNC = "partial_sync"


class ExploreSchedule(str, Enum):
    LAYERED = "layered"
    INTERLEAVED = "interleaved"
