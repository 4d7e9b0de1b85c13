from casanova_sim.app.core.base.errors import UnknownBlockError

def check_block_existence(dag, block_hash: bytes):
    """Checks if a block is stored in a DAG by its hash

    Args:
        - dag: the DAG to look in
        - block_hash (bytes): the hash of the block to check

    Raises:
        UnknownBlockError: if the block is not stored (pending blocks do not count)

    Returns:
        Block: the stored block
    """

    block = dag.blocks.get(block_hash)

    if block is None:
        raise UnknownBlockError(f"Block {block_hash.hex()[:8]} does not exist")

    return block
