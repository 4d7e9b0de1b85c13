from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from casanova_sim.app.core.base.errors import InvalidBlockError
from casanova_sim.app.utils.encoding import (
    digest, encode_bytes, encode_int, encode_optional_int, encode_seq, encode_str
)
from casanova_sim.app.utils.types import BlockHash, ConflictIndex, GENESIS_CREATOR, TxHash, ValidatorId
from casanova_sim.app.v1.models.transaction import Transaction

@dataclass(frozen=True)
class Vote:
    """A round vote for one alternative of a conflict index

    `lock_round`, when present, is the earlier round in which the voter saw an
    FTM score for `choice` (round -1 stands for a pre-conflict score).
    """

    conflict_index: ConflictIndex
    choice: TxHash
    round: int
    lock_round: Optional[int] = None

    def __post_init__(self):
        if self.round < 0:
            raise InvalidBlockError(f"vote round must be >= 0, got {self.round}")
        if self.lock_round is not None and not -1 <= self.lock_round < self.round:
            raise InvalidBlockError(
                f"lock evidence round {self.lock_round} must precede vote round {self.round}"
            )

    def encode(self) -> bytes:
        return (
            encode_str(self.conflict_index)
            + encode_bytes(self.choice)
            + encode_int(self.round)
            + encode_optional_int(self.lock_round)
        )

    def to_dict(self) -> dict:
        return {
            "conflict_index": self.conflict_index,
            "choice": self.choice.hex(),
            "round": self.round,
            "lock_round": self.lock_round,
        }


class ResolutionSource(str, Enum):
    OBSERVED = "observed"
    SIDE = "side"


@dataclass(frozen=True)
class Resolution:
    """A recorded decision for a conflict index

    `observed` resolutions attest to a round-`round` FTM-observed set;
    `side` resolutions carry the side protocol evidence: the phase and the
    validators that acknowledged the leader's lock.
    """

    conflict_index: ConflictIndex
    value: TxHash
    round: int
    source: ResolutionSource
    acknowledgers: tuple[ValidatorId, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "source", ResolutionSource(self.source))
        object.__setattr__(self, "acknowledgers", tuple(sorted(set(self.acknowledgers))))

    def encode(self) -> bytes:
        return (
            encode_str(self.conflict_index)
            + encode_bytes(self.value)
            + encode_int(self.round)
            + encode_str(self.source.value)
            + encode_seq(encode_int(v) for v in self.acknowledgers)
        )

    def to_dict(self) -> dict:
        return {
            "conflict_index": self.conflict_index,
            "value": self.value.hex(),
            "round": self.round,
            "source": self.source.value,
            "acknowledgers": list(self.acknowledgers),
        }


@dataclass(frozen=True, eq=False)
class Block:
    """A creator-attributed DAG node

    Parents are kept as a sorted tuple so the canonical encoding, and with it
    `block_hash`, does not depend on the order they were listed in.
    """

    creator: ValidatorId
    seq: int
    parents: tuple[BlockHash, ...] = ()
    transactions: tuple[Transaction, ...] = ()
    votes: tuple[Vote, ...] = ()
    conflict_attestations: tuple[tuple[ConflictIndex, int], ...] = ()
    resolutions: tuple[Resolution, ...] = ()
    block_hash: BlockHash = field(default=b"", repr=False)

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(sorted(set(self.parents))))
        object.__setattr__(self, "transactions", tuple(self.transactions))
        object.__setattr__(self, "votes", tuple(self.votes))
        object.__setattr__(self, "conflict_attestations", tuple(tuple(a) for a in self.conflict_attestations))
        object.__setattr__(self, "resolutions", tuple(self.resolutions))
        if not self.block_hash:
            object.__setattr__(self, "block_hash", self.compute_hash())

    def encode(self) -> bytes:
        return (
            b"BLOCK"
            + encode_int(self.creator)
            + encode_int(self.seq)
            + encode_seq(self.parents)
            + encode_seq(tx.encode() for tx in self.transactions)
            + encode_seq(vote.encode() for vote in self.votes)
            + encode_seq(encode_str(i) + encode_int(r) for i, r in self.conflict_attestations)
            + encode_seq(res.encode() for res in self.resolutions)
        )

    def compute_hash(self) -> BlockHash:
        return digest(self.encode())

    def __deepcopy__(self, memo) -> "Block":
        """Copies of a DAG or a channel share the block"""

        return self

    @property
    def is_genesis(self) -> bool:
        return self.creator == GENESIS_CREATOR

    @property
    def label(self) -> str:
        if self.is_genesis:
            return "genesis"
        return f"{self.creator}:{self.seq}"

    def __eq__(self, other) -> bool:
        return isinstance(other, Block) and other.block_hash == self.block_hash

    def __hash__(self) -> int:
        return hash(self.block_hash)

    def to_dict(self) -> dict:
        return {
            "block_hash": self.block_hash.hex(),
            "creator": self.creator,
            "seq": self.seq,
            "parents": [p.hex() for p in self.parents],
            "transactions": [tx.to_dict() for tx in self.transactions],
            "votes": [vote.to_dict() for vote in self.votes],
            "conflict_attestations": [list(a) for a in self.conflict_attestations],
            "resolutions": [res.to_dict() for res in self.resolutions],
        }


GENESIS = Block(creator=GENESIS_CREATOR, seq=0)
