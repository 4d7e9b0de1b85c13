from dataclasses import dataclass, field

from casanova_sim.app.utils.encoding import digest, encode_bytes, encode_seq, encode_str
from casanova_sim.app.utils.types import ConflictIndex, TxHash

@dataclass(frozen=True, eq=False)
class Transaction:
    """An opaque client payload with its conflict index

    Transactions sharing a conflict index are mutually exclusive alternatives.
    `requested_parents` are hashes of transactions that must already be
    recorded before this one may be.
    """

    payload: bytes
    conflict_index: ConflictIndex
    requested_parents: frozenset[TxHash] = frozenset()
    tx_hash: TxHash = field(default=b"", repr=False)

    def __post_init__(self):
        object.__setattr__(self, "requested_parents", frozenset(self.requested_parents))
        if not self.tx_hash:
            object.__setattr__(self, "tx_hash", digest(self.encode()))

    def encode(self) -> bytes:
        return (
            b"TX"
            + encode_bytes(self.payload)
            + encode_str(self.conflict_index)
            + encode_seq(sorted(self.requested_parents))
        )

    def __eq__(self, other) -> bool:
        return isinstance(other, Transaction) and other.tx_hash == self.tx_hash

    def __hash__(self) -> int:
        return hash(self.tx_hash)

    def __deepcopy__(self, memo) -> "Transaction":
        return self

    def to_dict(self) -> dict:
        return {
            "tx_hash": self.tx_hash.hex(),
            "payload": self.payload.hex(),
            "conflict_index": self.conflict_index,
            "requested_parents": sorted(p.hex() for p in self.requested_parents),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Transaction":
        return cls(
            payload=bytes.fromhex(data["payload"]),
            conflict_index=data["conflict_index"],
            requested_parents=frozenset(bytes.fromhex(p) for p in data.get("requested_parents", [])),
        )
