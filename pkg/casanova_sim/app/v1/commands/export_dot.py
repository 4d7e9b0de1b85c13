import sys
from argparse import Namespace
from pathlib import Path

from casanova_sim.app.core.base.errors import TraceError
from casanova_sim.app.utils.file import write_file
from casanova_sim.app.v1.services.dot import export_dot_file


def export_trace_dot(args: Namespace) -> int:
    """Writes one validator's final DAG as DOT, to `<out>/validator-<v>.dot` or stdout"""

    if not args.trace:
        raise TraceError("--trace is required for --mode export-dot")

    text = export_dot_file(args.trace, args.validator)
    if args.out:
        write_file(Path(args.out) / f"validator-{args.validator}.dot", text)
    else:
        sys.stdout.write(text)
    return 0
