from casanova_sim.app.v1.models.transaction import Transaction
from casanova_sim.app.v1.models.block import GENESIS, Block, Resolution, ResolutionSource, Vote
from casanova_sim.app.v1.models.dag import ActiveSet, Dag, InsertionResult, InsertStatus
