"""Block scores, views and k-observed sets

A block's score is the set of validators that created it or one of its
descendants. With a RoundFilter the score counts attestations of a single
round for one conflict index instead: round -1 attestations are each
validator's first sighting of the index (if it saw a single alternative),
round r >= 0 attestations are round-r votes. Every validator attests to at
most one alternative per round, which is what makes two FTM-observed sets
for different alternatives of one round require f + 1 faults.
"""

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping, Optional

from casanova_sim.app.core.base.errors import (
    ConflictIndexMismatchError, EquivocatorQueriedError, UnknownTransactionError
)
from casanova_sim.app.utils.types import BlockHash, ConflictIndex, TxHash, ValidatorId
from casanova_sim.app.utils.validators import check_block_existence
from casanova_sim.app.v1.models.dag import ActiveSet, Dag
from casanova_sim.app.v1.services.quorum import quorum_sizes


@dataclass(frozen=True)
class RoundFilter:
    conflict_index: ConflictIndex
    round: int

    def __post_init__(self):
        if self.round < -1:
            raise ValueError(f"round filter must be >= -1, got {self.round}")


class WeightFn:
    """Validator weights, constant 1 unless a mapping is given"""

    def __init__(self, n: int, weights: Optional[Mapping[ValidatorId, int]] = None):
        self.n = n
        self.weights = {u: 1 for u in range(n)}
        if weights:
            for u, w in weights.items():
                if w <= 0:
                    raise ValueError(f"weight of validator {u} must be positive, got {w}")
                self.weights[u] = w

    def __call__(self, validators: Iterable[ValidatorId]) -> int:
        return sum(self.weights.get(u, 0) for u in set(validators))

    @property
    def total_weight(self) -> int:
        return sum(self.weights.values())


@dataclass(frozen=True)
class Score:
    voters: frozenset[ValidatorId] = frozenset()

    def weight(self, weights: Optional[WeightFn] = None) -> int:
        if weights is None:
            return len(self.voters)
        return weights(self.voters)

    def restrict(self, validators: Iterable[ValidatorId]) -> "Score":
        return Score(self.voters & frozenset(validators))

    def __contains__(self, u: ValidatorId) -> bool:
        return u in self.voters

    def __len__(self) -> int:
        return len(self.voters)


class ScoreEngine:
    """Scoring queries over one validator's DAG

    Descendant masks are cached per block and extended as the DAG grows; the
    DAG is append-only so a cached mask never has to shrink.
    """

    def __init__(self, dag: Dag, f: int = 0, weights: Optional[WeightFn] = None):
        self.dag = dag
        self.n = dag.n_validators
        self.f = f
        self.weights = weights or WeightFn(self.n)
        self._desc: dict[BlockHash, tuple[int, int]] = {}

    # ---------------- VALIDATOR SETS ----------------

    def active_set(self) -> ActiveSet:
        return self.dag.active_validator_set(self.n, self.f)

    def quorums(self) -> Optional[tuple[int, int]]:
        """(NFM, FTM) over the active validators, None if nobody is left"""

        active = self.active_set()
        if active.n < 1:
            return None
        return quorum_sizes(active.n, active.f, strict=False)

    # ---------------- BLOCK SCORES ----------------

    def _descendants(self, h: BlockHash) -> int:
        pos = self.dag.position(h)
        mask, upto = self._desc.get(h, (1 << pos, pos))
        last = self.dag.size - 1
        for p in range(upto + 1, last + 1):
            if (self.dag.ancestors_mask_at(p) >> pos) & 1:
                mask |= 1 << p
        self._desc[h] = (mask, last)
        return mask

    def score(self, b: BlockHash) -> Score:
        """Creators of `b` and of every descendant of `b`"""

        check_block_existence(self.dag, b)
        return Score(frozenset(self.dag.creators_in(self._descendants(b))))

    def view_tip(self, u: ValidatorId, round_filter: Optional[RoundFilter] = None) -> BlockHash:
        """The block whose ancestry is `u`'s view

        Unfiltered, that is `u`'s most recent block. For a round-r filter it is
        `u`'s most recent block whose effective round is at most r, genesis if
        there is none.
        """

        tips = self.dag.most_recent_blocks(u)
        if len(tips) > 1:
            raise EquivocatorQueriedError(f"Validator {u} has {len(tips)} most recent blocks")
        if round_filter is None:
            return next(iter(tips))

        i, r = round_filter.conflict_index, round_filter.round
        for pos in self.dag.created_positions(u, reverse=True):
            h = self.dag.block_at(pos).block_hash
            if self.dag.effective_round(h, i) <= r:
                return h
        return self.dag.genesis

    def view_mask(self, u: ValidatorId, round_filter: Optional[RoundFilter] = None) -> int:
        return self.dag.ancestors_mask(self.view_tip(u, round_filter))

    def viewscore(self, u: ValidatorId, b: BlockHash) -> Score:
        """Score of `b` inside the sub-DAG made of `u`'s most recent block and its ancestors"""

        check_block_existence(self.dag, b)
        mask = self._descendants(b) & self.view_mask(u)
        return Score(frozenset(self.dag.creators_in(mask)))

    # ---------------- TRANSACTION SCORES ----------------

    def _check_transaction(self, tx: TxHash, round_filter: Optional[RoundFilter]):
        known = self.dag.transactions.get(tx)
        if known is None:
            raise UnknownTransactionError(f"Transaction {tx.hex()[:8]} does not exist")
        if round_filter is not None and known.conflict_index != round_filter.conflict_index:
            raise ConflictIndexMismatchError(
                f"Transaction {tx.hex()[:8]} has index {known.conflict_index!r}, "
                f"filter asks for {round_filter.conflict_index!r}"
            )

    def attestation_blocks(self, tx: TxHash, round_filter: Optional[RoundFilter] = None) -> list[BlockHash]:
        """Blocks whose creators attest to `tx`

        Unfiltered these are the blocks including `tx`. Round -1 attestations
        are first sightings of the index that saw `tx` alone; round r >= 0
        attestations are round-r votes for `tx`.
        """

        self._check_transaction(tx, round_filter)
        if round_filter is None:
            return list(self.dag.tx_blocks.get(tx, ()))

        i, r = round_filter.conflict_index, round_filter.round
        if r >= 0:
            return list(self.dag.vote_blocks.get((i, r, tx), ()))

        blocks = []
        for u in range(self.n):
            first = self.dag.first_attestation(u, i)
            if first is not None and first[1] == tx:
                blocks.append(first[0])
        return blocks

    def _transaction_mask(self, tx: TxHash, round_filter: Optional[RoundFilter]) -> int:
        mask = 0
        for h in self.attestation_blocks(tx, round_filter):
            if round_filter is None:
                mask |= self._descendants(h)
            else:
                mask |= 1 << self.dag.position(h)
        return mask

    def transaction_score(self, tx: TxHash, round_filter: Optional[RoundFilter] = None) -> Score:
        """Union of the scores of the blocks attesting to `tx`"""

        mask = self._transaction_mask(tx, round_filter)
        return Score(frozenset(self.dag.creators_in(mask)))

    def view_transaction_score(
        self, u: ValidatorId, tx: TxHash, round_filter: Optional[RoundFilter] = None
    ) -> Score:
        mask = self._transaction_mask(tx, round_filter) & self.view_mask(u, round_filter)
        return Score(frozenset(self.dag.creators_in(mask)))

    def active_weight(self, score: Score, active: Optional[ActiveSet] = None) -> int:
        active = active or self.active_set()
        return self.weights(score.voters & active.validators)

    # ---------------- OBSERVED SETS ----------------

    def observers(self, k: int, target: TxHash, round_filter: Optional[RoundFilter] = None) -> frozenset[ValidatorId]:
        """Active validators whose view gives `target` a weight of at least k"""

        active = self.active_set()
        return frozenset(
            u for u in sorted(active.validators)
            if self.active_weight(self.view_transaction_score(u, target, round_filter), active) >= k
        )

    def find_k_observed_set(
        self, k: int, target: TxHash, round_filter: Optional[RoundFilter] = None
    ) -> Optional[frozenset[ValidatorId]]:
        """A set S with weight(S) >= k whose members all view `target` with weight >= k

        The candidate set of every qualifying observer is itself the largest
        such set, so one exists iff the candidates weigh at least k.

        Returns:
            frozenset | None: the candidate set, or None if it is too light
        """

        if k <= 0:
            raise ValueError(f"k must be positive, got {k}")

        candidates = self.observers(k, target, round_filter)
        if self.weights(candidates) >= k:
            return candidates
        return None

    def brute_force_observed_set(
        self, k: int, target: TxHash, round_filter: Optional[RoundFilter] = None
    ) -> bool:
        """Whether some k-observed set exists, by trying every validator subset"""

        active = sorted(self.active_set().validators)
        views = {
            u: self.active_weight(self.view_transaction_score(u, target, round_filter))
            for u in active
        }
        for size in range(1, len(active) + 1):
            for subset in combinations(active, size):
                if self.weights(subset) >= k and all(views[u] >= k for u in subset):
                    return True
        return False

    def ftm_observed_set(
        self, target: TxHash, round_filter: Optional[RoundFilter] = None
    ) -> Optional[frozenset[ValidatorId]]:
        quorums = self.quorums()
        if quorums is None:
            return None
        return self.find_k_observed_set(quorums[1], target, round_filter)

    def has_ftm_score(self, tx: TxHash, round_filter: Optional[RoundFilter] = None) -> bool:
        """Whether this DAG as a whole gives `tx` a score of FTM or more"""

        quorums = self.quorums()
        if quorums is None:
            return False
        return self.active_weight(self.transaction_score(tx, round_filter)) >= quorums[1]


def score(dag: Dag, b: BlockHash) -> Score:
    return ScoreEngine(dag).score(b)


def viewscore(dag: Dag, u: ValidatorId, b: BlockHash) -> Score:
    return ScoreEngine(dag).viewscore(u, b)


def transaction_score(dag: Dag, tx: TxHash, round_filter: Optional[RoundFilter] = None) -> Score:
    return ScoreEngine(dag).transaction_score(tx, round_filter)


def find_k_observed_set(
    dag: Dag,
    k: int,
    target: TxHash,
    round_filter: Optional[RoundFilter] = None,
    weights: Optional[WeightFn] = None,
) -> Optional[frozenset[ValidatorId]]:
    return ScoreEngine(dag, weights=weights).find_k_observed_set(k, target, round_filter)
