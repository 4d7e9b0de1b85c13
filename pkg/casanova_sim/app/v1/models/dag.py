from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

from casanova_sim.app.core.base.errors import UnknownBlockError
from casanova_sim.app.utils.encoding import digest, encode_seq
from casanova_sim.app.utils.types import BlockHash, ConflictIndex, GENESIS_CREATOR, TxHash, ValidatorId
from casanova_sim.app.utils.validators import check_block_existence
from casanova_sim.app.v1.models.block import GENESIS, Block, Vote
from casanova_sim.app.v1.models.transaction import Transaction


class InsertStatus(str, Enum):
    INSERTED = "inserted"
    BUFFERED = "buffered"
    DUPLICATE = "duplicate"
    INVALID = "invalid"


@dataclass
class InsertionResult:
    """Outcome of offering a block to a DAG

    `inserted` lists every block that entered the store, in topological
    order: the offered block first, then the pending blocks it satisfied.
    """

    status: InsertStatus
    inserted: list[Block] = field(default_factory=list)
    reason: str = ""

    @property
    def satisfied(self) -> list[Block]:
        return self.inserted[1:]


@dataclass(frozen=True)
class ActiveSet:
    validators: frozenset[ValidatorId]
    n: int
    f: int
    excluded: frozenset[ValidatorId]
    bounds_exceeded: bool = False


class Dag:
    """Append-only block store with a pending buffer

    Blocks are given consecutive positions as they enter the store, so every
    parent has a lower position than its children. Ancestry is kept as one
    integer bitmask per block (bit p set means the block at position p is an
    ancestor-or-self), which makes ancestry queries a single shift.
    """

    def __init__(self, n_validators: int):
        self.n_validators = n_validators
        self.blocks: dict[BlockHash, Block] = {}
        self.children: dict[BlockHash, set[BlockHash]] = {}
        self.pending: dict[BlockHash, Block] = {}
        self.per_validator_tips: dict[ValidatorId, set[BlockHash]] = defaultdict(set)
        self.equivocators: set[ValidatorId] = set()
        self.double_voters: set[ValidatorId] = set()

        self.transactions: dict[TxHash, Transaction] = {}
        self.tx_blocks: dict[TxHash, list[BlockHash]] = defaultdict(list)
        self.index_txs: dict[ConflictIndex, list[TxHash]] = defaultdict(list)
        # (index, round, choice) -> blocks carrying that vote
        self.vote_blocks: dict[tuple[ConflictIndex, int, TxHash], list[BlockHash]] = defaultdict(list)
        self.max_vote_round: dict[ConflictIndex, int] = {}

        self._leaves: set[BlockHash] = set()
        self._order: list[BlockHash] = []
        self._pos: dict[BlockHash, int] = {}
        self._anc: list[int] = []
        self._created: dict[ValidatorId, int] = defaultdict(int)
        self._creator_votes: dict[tuple[ValidatorId, ConflictIndex], list[tuple[int, int]]] = defaultdict(list)
        self._first_votes: dict[tuple[ValidatorId, ConflictIndex, int], TxHash] = {}
        self._round_memo: dict[tuple[BlockHash, ConflictIndex], int] = {}
        self._seen_memo: dict[tuple[BlockHash, ConflictIndex], int] = {}
        self._tx_mask: dict[TxHash, int] = defaultdict(int)
        self._first_att: dict[tuple[ValidatorId, ConflictIndex], Optional[tuple[BlockHash, TxHash]]] = {}
        self._first_scan: dict[tuple[ValidatorId, ConflictIndex], int] = {}
        self._waiting_on: dict[BlockHash, set[BlockHash]] = defaultdict(set)
        self._missing: dict[BlockHash, int] = {}

        self._store(GENESIS)

    # ---------------- INSERTION ----------------

    def validate(self, block: Block) -> Optional[str]:
        """Structural checks; returns the reason a block is malformed, or None"""

        if block.block_hash != block.compute_hash():
            return "block hash does not match its contents"
        if block.block_hash in block.parents:
            return "block lists itself as a parent"
        if block.is_genesis:
            return None if block.block_hash == GENESIS.block_hash else "second genesis block"
        if not block.parents:
            return "non-genesis block without parents"
        if not 0 <= block.creator < self.n_validators:
            return f"unknown creator {block.creator}"
        if block.seq < 1:
            return f"invalid sequence number {block.seq}"
        return None

    def insert_block(self, block: Block) -> InsertionResult:
        """Adds a block, buffering it until all of its parents are stored

        Args:
            - block: the block to insert

        Returns:
            InsertionResult: inserted blocks in topological order, or the
            reason nothing was inserted
        """

        if block.block_hash in self.blocks or block.block_hash in self.pending:
            return InsertionResult(InsertStatus.DUPLICATE)

        reason = self.validate(block)
        if reason:
            return InsertionResult(InsertStatus.INVALID, reason=reason)

        missing = [p for p in block.parents if p not in self.blocks]
        if missing:
            self.pending[block.block_hash] = block
            self._missing[block.block_hash] = len(missing)
            for parent in missing:
                self._waiting_on[parent].add(block.block_hash)
            return InsertionResult(InsertStatus.BUFFERED)

        inserted = []
        queue = [block]
        while queue:
            current = queue.pop(0)
            self._store(current)
            inserted.append(current)
            satisfied = []
            for waiting in sorted(self._waiting_on.pop(current.block_hash, ())):
                self._missing[waiting] -= 1
                if self._missing[waiting] == 0:
                    del self._missing[waiting]
                    satisfied.append(self.pending.pop(waiting))
            queue.extend(satisfied)

        return InsertionResult(InsertStatus.INSERTED, inserted=inserted)

    def _store(self, block: Block):
        h = block.block_hash
        pos = len(self._order)
        anc = 1 << pos
        for parent in block.parents:
            anc |= self._anc[self._pos[parent]]
            self.children[parent].add(h)
            self._leaves.discard(parent)

        self.blocks[h] = block
        self.children[h] = set()
        self._leaves.add(h)
        self._order.append(h)
        self._pos[h] = pos
        self._anc.append(anc)

        for tx in block.transactions:
            if tx.tx_hash not in self.transactions:
                self.transactions[tx.tx_hash] = tx
                self.index_txs[tx.conflict_index].append(tx.tx_hash)
            self.tx_blocks[tx.tx_hash].append(h)
            self._tx_mask[tx.tx_hash] |= 1 << pos

        if block.is_genesis:
            return

        u = block.creator
        self._created[u] |= 1 << pos
        tips = {t for t in self.per_validator_tips[u] if not (anc >> self._pos[t]) & 1}
        tips.add(h)
        self.per_validator_tips[u] = tips
        if len(tips) >= 2:
            self.equivocators.add(u)

        for vote in block.votes:
            self._record_vote(u, pos, h, vote)

    def _record_vote(self, creator: ValidatorId, pos: int, h: BlockHash, vote: Vote):
        i = vote.conflict_index
        key = (creator, i, vote.round)
        first = self._first_votes.setdefault(key, vote.choice)
        if first != vote.choice:
            self.double_voters.add(creator)
        self.vote_blocks[(i, vote.round, vote.choice)].append(h)
        self._creator_votes[(creator, i)].append((pos, vote.round))
        self.max_vote_round[i] = max(self.max_vote_round.get(i, -1), vote.round)

    # ---------------- QUERIES ----------------

    @property
    def genesis(self) -> BlockHash:
        return GENESIS.block_hash

    @property
    def size(self) -> int:
        return len(self._order)

    def leaves(self) -> set[BlockHash]:
        """Blocks with no children in the store; never empty"""

        return set(self._leaves)

    def most_recent_blocks(self, u: ValidatorId) -> set[BlockHash]:
        """Blocks created by `u` with no `u`-created descendant

        Genesis counts as created by every validator, so a validator that has
        produced nothing has genesis as its only most-recent block.
        """

        tips = self.per_validator_tips.get(u)
        if not tips:
            return {GENESIS.block_hash}
        return set(tips)

    def is_ancestor(self, a: BlockHash, b: BlockHash) -> bool:
        """True iff `a` is `b` or reachable from `b` through parent links"""

        check_block_existence(self, a)
        check_block_existence(self, b)
        return bool((self._anc[self._pos[b]] >> self._pos[a]) & 1)

    def faulty(self) -> set[ValidatorId]:
        return self.equivocators | self.double_voters

    def active_validator_set(self, n: int, f: int) -> ActiveSet:
        """Validators not proven faulty, with N and f reduced by the exclusions

        Args:
            - n: the scenario's validator count
            - f: the scenario's fault tolerance

        Returns:
            ActiveSet: remaining validators, N' = N - e and f' = max(f - e, 0);
            `bounds_exceeded` is set when more than f validators are excluded
        """

        excluded = frozenset(v for v in self.faulty() if 0 <= v < n)
        e = len(excluded)
        return ActiveSet(
            validators=frozenset(range(n)) - excluded,
            n=n - e,
            f=max(f - e, 0),
            excluded=excluded,
            bounds_exceeded=e > f,
        )

    # ---------------- POSITIONAL HELPERS (used by scoring) ----------------

    def position(self, h: BlockHash) -> int:
        if h not in self._pos:
            raise UnknownBlockError(f"Block {h.hex()[:8]} does not exist")
        return self._pos[h]

    def block_at(self, pos: int) -> Block:
        return self.blocks[self._order[pos]]

    def ancestors_mask(self, h: BlockHash) -> int:
        return self._anc[self.position(h)]

    def ancestors_mask_at(self, pos: int) -> int:
        return self._anc[pos]

    def created_mask(self, u: ValidatorId) -> int:
        return self._created.get(u, 0)

    def descendants_mask(self, h: BlockHash) -> int:
        """Bitmask of `h` and all of its descendants"""

        pos = self.position(h)
        mask = 1 << pos
        for p in range(pos + 1, len(self._order)):
            if (self._anc[p] >> pos) & 1:
                mask |= 1 << p
        return mask

    def creators_in(self, mask: int) -> set[ValidatorId]:
        """Creators of the blocks in a mask, genesis expanding to every validator"""

        creators = set()
        if mask & 1:
            creators.update(range(self.n_validators))
            mask &= ~1
        for u, created in self._created.items():
            if created & mask:
                creators.add(u)
        return creators

    def block_round(self, h: BlockHash, i: ConflictIndex) -> int:
        """Highest round the creator of `h` had voted in for index `i` as of `h`

        Looks at the creator's own blocks among the ancestors-or-self of `h`;
        -1 means the creator had not voted on `i` yet.
        """

        key = (h, i)
        if key in self._round_memo:
            return self._round_memo[key]

        block = self.blocks[h]
        anc = self.ancestors_mask(h)
        best = -1
        if not block.is_genesis:
            for pos, rnd in self._creator_votes.get((block.creator, i), ()):
                if (anc >> pos) & 1 and rnd > best:
                    best = rnd
        self._round_memo[key] = best
        return best

    def alternatives_seen(self, h: BlockHash, i: ConflictIndex) -> list[TxHash]:
        """Alternatives for `i` included in `h` or one of its ancestors"""

        anc = self.ancestors_mask(h)
        return [tx for tx in self.index_txs.get(i, ()) if self._tx_mask[tx] & anc]

    def effective_round(self, h: BlockHash, i: ConflictIndex) -> int:
        """Round a block belongs to for index `i`

        A block is in the round its creator last voted in. Before the first
        vote, a block that already sees two or more alternatives attests to
        the conflict itself and belongs to round 0; otherwise it is round -1.
        """

        voted = self.block_round(h, i)
        if voted >= 0:
            return voted

        key = (h, i)
        if key not in self._seen_memo:
            self._seen_memo[key] = len(self.alternatives_seen(h, i))
        return 0 if self._seen_memo[key] >= 2 else -1

    def created_positions(self, u: ValidatorId, reverse: bool = False) -> list[int]:
        """Positions of the blocks created by `u`, oldest first"""

        mask = self._created.get(u, 0)
        positions = []
        while mask:
            low = mask & -mask
            positions.append(low.bit_length() - 1)
            mask ^= low
        if reverse:
            positions.reverse()
        return positions

    def first_attestation(self, u: ValidatorId, i: ConflictIndex) -> Optional[tuple[BlockHash, TxHash]]:
        """The earliest block of `u` that sees index `i`, with what it attests

        Returns None if `u` has not seen `i` yet or if its first such block
        already saw more than one alternative.
        """

        key = (u, i)
        if key in self._first_att:
            return self._first_att[key]

        scanned = self._first_scan.get(key, -1)
        for pos in self.created_positions(u):
            if pos <= scanned:
                continue
            h = self._order[pos]
            seen = self.alternatives_seen(h, i)
            if seen:
                self._first_att[key] = (h, seen[0]) if len(seen) == 1 else None
                return self._first_att[key]
            scanned = pos
        self._first_scan[key] = scanned
        return None

    def alternatives(self, i: ConflictIndex) -> list[TxHash]:
        return list(self.index_txs.get(i, ()))

    def contains_transaction(self, tx_hash: TxHash) -> bool:
        return tx_hash in self.transactions

    # ---------------- SNAPSHOTS ----------------

    def fingerprint(self) -> bytes:
        """Order-independent digest of the stored and pending block sets"""

        return digest(encode_seq(sorted(self.blocks)) + encode_seq(sorted(self.pending)))

    def snapshot(self) -> dict:
        return {
            "blocks": sorted(h.hex() for h in self.blocks),
            "pending": sorted(h.hex() for h in self.pending),
            "leaves": sorted(h.hex() for h in self._leaves),
            "tips": {
                str(u): sorted(h.hex() for h in tips)
                for u, tips in sorted(self.per_validator_tips.items()) if tips
            },
        }

    def topological(self) -> Iterable[Block]:
        for h in self._order:
            yield self.blocks[h]
