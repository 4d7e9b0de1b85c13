from argparse import Namespace
from pathlib import Path

from casanova_sim.app.core.base.errors import ScenarioError
from casanova_sim.app.utils.file import write_file, write_json_file
from casanova_sim.app.utils.logger import logger
from casanova_sim.app.utils.settings import settings
from casanova_sim.app.utils.success_response import success_response
from casanova_sim.app.v1.services import simulator
from casanova_sim.app.v1.services.checker import check_all
from casanova_sim.app.v1.services.dot import export_dot
from casanova_sim.app.v1.services.scenarios import load_scenario


def run_scenario(args: Namespace) -> int:
    """
    Run one scenario and check every property that applies to it.

    Loads the scenario file, runs the simulation with the requested seed and
    writes three artifacts under `<out>/<scenario>-seed<seed>/`: the
    line-delimited trace, the verdict summary and one DOT file per
    validator's final DAG.

    Args:
        args (Namespace): parsed flags; uses `scenario`, `seed`, `out` and
            `strict_bounds`.

    Returns:
        int: 0 when every counted verdict holds, 1 otherwise.

    Raises:
        ScenarioError: when no scenario is given or the file does not parse.
        FaultBoundError: when N < 3f + 1 and strict bounds are on.
    """

    if not args.scenario:
        raise ScenarioError("--scenario is required for --mode run")

    overrides = {} if args.strict_bounds is None else {"strict_bounds": args.strict_bounds}
    config = load_scenario(args.scenario, overrides)
    seed = config.seed if args.seed is None else args.seed

    trace = simulator.run(config, seed)
    summary = check_all(trace)

    out_dir = Path(args.out or settings.OUTPUT_DIR) / f"{Path(args.scenario).stem}-seed{seed}"
    trace.write(out_dir / "trace.jsonl")
    write_json_file(out_dir / "verdicts.json", {
        **summary.model_dump(mode="json"),
        "holds": summary.holds,
        "exit_code": summary.exit_code,
    })
    for final in trace.final_dags:
        write_file(out_dir / "dot" / f"validator-{final.validator}.dot", export_dot(trace, final.validator))
    logger.info(f"run: artifacts written to {out_dir}")

    failed = [v.property for v in summary.violations]
    message = "all properties hold" if summary.holds else f"violated: {', '.join(failed)}"
    return success_response(
        exit_code=summary.exit_code,
        message=message,
        data={
            "seed": seed,
            "artifacts": str(out_dir),
            "verdicts": {v.property: v.holds for v in summary.verdicts},
            "bounds_exceeded": summary.bounds_exceeded,
        },
    )
