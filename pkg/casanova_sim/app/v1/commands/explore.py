from argparse import Namespace
from pathlib import Path

from casanova_sim.app.utils.file import write_json_file
from casanova_sim.app.utils.settings import settings
from casanova_sim.app.utils.success_response import success_response
from casanova_sim.app.v1.schemas.explore import ExploreRequest
from casanova_sim.app.v1.services.explorer import explore


def explore_states(args: Namespace) -> int:
    """
    Search every execution of a small configuration under one schedule.

    Args:
        args (Namespace): parsed flags; uses `n`, `f`, `variant`, `behavior`,
            `max_blocks`, `max_states`, `strict_bounds`, `schedule` and `out`.

    Returns:
        int: 0 when the search finished without a safety violation, 1 when a
        violation was found, 2 when the state budget ran out first.
    """

    request = ExploreRequest(
        n=args.n,
        f=args.f,
        variant=args.variant,
        behavior=None if args.behavior == "none" else args.behavior,
        max_blocks=args.max_blocks,
        max_states=args.max_states or settings.EXPLORE_MAX_STATES,
        strict_bounds=bool(args.strict_bounds),
        schedule=args.schedule,
    )
    report = explore(request)
    data = report.model_dump(mode="json")

    if args.out:
        write_json_file(Path(args.out) / f"explore-n{request.n}-f{request.f}.json", data)

    if report.violation is not None:
        message = f"safety violated on {report.violation.conflict_index!r}"
    elif report.complete:
        message = f"no violation in {report.explored} states"
    else:
        message = f"state budget exhausted after {report.explored} states, no violation so far"
    return success_response(exit_code=report.exit_code, message=message, data=data)
