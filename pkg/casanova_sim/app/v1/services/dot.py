from casanova_sim.app.core.base.errors import TraceError
from casanova_sim.app.v1.responses.trace import Trace

GENESIS_LABEL = "genesis"


def _node_id(block_hash: str) -> str:
    return f"b{block_hash[:16]}"


def export_dot(trace: Trace, validator: int) -> str:
    """DOT source for one validator's final DAG

    One node per stored block labelled creator:seq, one edge per parent
    link pointing from child to parent. Blocks carrying a transaction the
    validator decided are filled. Nodes and edges are sorted, so the output
    only depends on the trace.

    Raises:
        TraceError: if the trace has no final DAG for `validator`
    """

    final = trace.final_dag(validator)
    if final is None:
        raise TraceError(f"Trace has no validator {validator}")

    records = {b.block_hash: b for b in trace.blocks}
    stored = set(final.blocks)
    decided = set(final.decided.values())

    def order(block_hash: str):
        record = records.get(block_hash)
        if record is None:
            return (-1, 0, block_hash)
        return (record.creator, record.seq, block_hash)

    lines = [f'digraph "validator-{validator}" {{', "    rankdir=BT;", "    node [shape=box];"]
    edges = []
    for block_hash in sorted(stored, key=order):
        record = records.get(block_hash)
        label = record.label if record is not None else GENESIS_LABEL
        attributes = [f'label="{label}"']
        if record is not None and any(tx["tx_hash"] in decided for tx in record.transactions):
            attributes.append('style=filled, fillcolor="lightgreen"')
        lines.append(f'    {_node_id(block_hash)} [{", ".join(attributes)}];')
        if record is not None:
            edges.extend((_node_id(block_hash), _node_id(p)) for p in record.parents if p in stored)

    lines.extend(f"    {child} -> {parent};" for child, parent in sorted(edges))
    lines.append("}")
    return "".join(f"{line}\n" for line in lines)


def export_dot_file(trace_path, validator: int) -> str:
    return export_dot(Trace.read(trace_path), validator)
