import argparse
import sys
from typing import Optional

from pydantic import ValidationError

from casanova_sim.app.core.base.errors import CasanovaError
from casanova_sim.app.utils.logger import logger
from casanova_sim.app.utils.settings import settings
from casanova_sim.app.utils.types import ByzantineKind, ExploreSchedule, ProtocolVariant
from casanova_sim.app.v1.commands import commands


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="casanova",
        description="Deterministic simulator and checker for DAG-based BFT conflict resolution",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--mode", choices=sorted(commands), default="run", help="what to do")
    parser.add_argument("--scenario", help="scenario TOML file (run, bench)")
    parser.add_argument("--seed", type=int, default=None, help="seed; the scenario's own seed when omitted")
    parser.add_argument("--out", default=None, help=f"artifact directory (run defaults to {settings.OUTPUT_DIR})")
    parser.add_argument(
        "--strict-bounds", action=argparse.BooleanOptionalAction, default=None,
        help="refuse N < 3f + 1; the scenario decides when omitted",
    )

    explore = parser.add_argument_group("explore")
    explore.add_argument("--n", type=int, default=4, help="validators")
    explore.add_argument("--f", type=int, default=1, help="Byzantine validators")
    explore.add_argument(
        "--variant", choices=[v.value for v in ProtocolVariant], default=ProtocolVariant.CASANOVA.value,
    )
    explore.add_argument(
        "--behavior", choices=[b.value for b in ByzantineKind] + ["none"], default=ByzantineKind.EQUIVOCATOR.value,
    )
    explore.add_argument("--max-blocks", type=int, default=3, help="blocks per validator")
    explore.add_argument(
        "--max-states", type=int, default=None, help=f"state budget (default {settings.EXPLORE_MAX_STATES})",
    )
    explore.add_argument(
        "--schedule", choices=[s.value for s in ExploreSchedule], default=ExploreSchedule.LAYERED.value,
        help="layered block rounds, or every single delivery interleaving",
    )

    dot = parser.add_argument_group("export-dot")
    dot.add_argument("--trace", help="trace file written by --mode run")
    dot.add_argument("--validator", type=int, default=0, help="whose final DAG to draw")

    batch = parser.add_argument_group("bench")
    batch.add_argument("--runs", type=int, default=100, help="consecutive seeds to run")
    batch.add_argument(
        "--workers", type=int, default=None, help=f"worker processes (default {settings.BENCH_WORKERS})",
    )
    batch.add_argument(
        "--continue-for", type=int, default=0,
        help="block intervals to keep each run going after its horizon, under a reseeded network",
    )
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        return commands[args.mode](args)
    except CasanovaError as exc:
        logger.debug(f"{exc.__class__.__name__}: {exc.detail}")
        print(f"error: {exc.detail}", file=sys.stderr)
        return exc.exit_code
    except ValidationError as exc:
        errors = "; ".join(
            f"{'.'.join(str(part) for part in error['loc']) or '<input>'}: {error['msg']}" for error in exc.errors()
        )
        print(f"error: invalid input: {errors}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
