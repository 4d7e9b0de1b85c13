import sys
import os
from pathlib import Path
from typing import Optional

import pytest

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from casanova_sim.app.v1.models import GENESIS, Block, Dag, Transaction, Vote
from casanova_sim.app.v1.schemas.scenario import ScenarioConfig
from casanova_sim.app.v1.services.scenarios import load_scenario

CONFLICT_INDEX = "coin-1"
SCENARIO_DIR = Path(__file__).parents[1] / "scenarios"


def make_tx(payload: str, index: str = CONFLICT_INDEX, parents=()) -> Transaction:
    return Transaction(payload.encode(), index, frozenset(parents))


class DagBuilder:
    """Builds a DAG from labelled blocks; parents are given by label, "genesis" included"""

    def __init__(self, n: int):
        self.dag = Dag(n)
        self.hashes = {"genesis": GENESIS.block_hash}
        self.seqs: dict[int, int] = {}

    def block(
        self,
        label: str,
        creator: int,
        parents=("genesis",),
        txs=(),
        votes=(),
        insert: bool = True,
    ) -> Block:
        seq = self.seqs.get(creator, 0) + 1
        self.seqs[creator] = seq
        block = Block(
            creator=creator,
            seq=seq,
            parents=tuple(self.hashes[p] for p in parents),
            transactions=tuple(txs),
            votes=tuple(votes),
        )
        self.hashes[label] = block.block_hash
        if insert:
            self.dag.insert_block(block)
        return block

    def __getitem__(self, label: str) -> bytes:
        return self.hashes[label]


def vote(tx: Transaction, round: int, lock_round: Optional[int] = None) -> Vote:
    return Vote(tx.conflict_index, tx.tx_hash, round, lock_round)


def double_spend(**overrides) -> ScenarioConfig:
    """Two transactions on one index, split across the two halves of the validators"""

    data = {
        "variant": "casanova",
        "n": 4,
        "f": 0,
        "seed": 7,
        "horizon": 300,
        "network": {"mode": "partial_sync", "delta": 2, "gst": 0},
        "transactions": [
            {"payload": "pay-alice", "conflict_index": CONFLICT_INDEX, "recipients": [0, 1], "at": 0},
            {"payload": "pay-bob", "conflict_index": CONFLICT_INDEX, "recipients": [2, 3], "at": 0},
        ],
    }
    data.update(overrides)
    return ScenarioConfig.model_validate(data)


def dual_path(**overrides) -> ScenarioConfig:
    """The delayed-link scenario where one validator settles through an observed set and two through side consensus"""

    return load_scenario(SCENARIO_DIR / "dual_path.toml", overrides)


@pytest.fixture(scope="function")
def builder():
    return DagBuilder(4)


@pytest.fixture(scope="function")
def alice():
    return make_tx("pay-alice")


@pytest.fixture(scope="function")
def bob():
    return make_tx("pay-bob")


@pytest.fixture(scope="function")
def scenario():
    return double_spend()
