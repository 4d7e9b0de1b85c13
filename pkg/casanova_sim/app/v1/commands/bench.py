from argparse import Namespace
from pathlib import Path

from casanova_sim.app.core.base.errors import ScenarioError
from casanova_sim.app.utils.file import write_json_file
from casanova_sim.app.utils.settings import settings
from casanova_sim.app.utils.success_response import success_response
from casanova_sim.app.v1.services.bench import bench
from casanova_sim.app.v1.services.scenarios import load_scenario


def bench_scenario(args: Namespace) -> int:
    """
    Run a scenario under many consecutive seeds and summarize the verdicts.

    Args:
        args (Namespace): parsed flags; uses `scenario`, `seed` (first seed),
            `runs`, `workers`, `continue_for`, `strict_bounds` and `out`.

    Returns:
        int: 0 when no run has a counted violation, 1 otherwise.
    """

    if not args.scenario:
        raise ScenarioError("--scenario is required for --mode bench")

    overrides = {} if args.strict_bounds is None else {"strict_bounds": args.strict_bounds}
    config = load_scenario(args.scenario, overrides)
    report = bench(
        config, runs=args.runs, workers=args.workers or settings.BENCH_WORKERS, first_seed=args.seed,
        continue_for=args.continue_for,
    )
    data = report.model_dump(mode="json")

    if args.out:
        write_json_file(Path(args.out) / f"{Path(args.scenario).stem}-bench.json", data)

    message = f"{report.runs} runs, {len(report.failing_seeds)} with violations, {report.dual_path_runs} dual-path"
    return success_response(exit_code=report.exit_code, message=message, data=data)
