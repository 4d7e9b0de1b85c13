"""Batches of independent seeded runs

Each run owns its simulator, so runs can go to separate worker processes.
Outcomes are merged in seed order, which keeps the report independent of
the worker count.

A continuation batch runs every seed to the scenario horizon, reseeds the
network and keeps going for a number of block intervals; the stability
verdict then covers every Chosen value held at the horizon.
"""

import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from typing import Optional

from casanova_sim.app.utils.logger import logger
from casanova_sim.app.v1.responses.bench import BenchReport, LatencyStats, RunOutcome
from casanova_sim.app.v1.responses.trace import Trace
from casanova_sim.app.v1.responses.verdict import PropertyName
from casanova_sim.app.v1.schemas.scenario import ScenarioConfig
from casanova_sim.app.v1.services.checker import check_all, decision_latencies
from casanova_sim.app.v1.services.simulator import Simulator

RESEED_OFFSET = 1000


def simulate(config: ScenarioConfig, seed: int, continue_for: int = 0) -> Trace:
    """One run; with `continue_for` > 0 the network is reseeded at the horizon and the run goes on"""

    if continue_for < 1:
        return Simulator(config, seed).run()

    extended = config.model_copy(update={"horizon": config.horizon + continue_for * config.block_interval})
    sim = Simulator(extended, seed)
    sim.run_until(config.horizon)
    sim.reseed_network(seed + RESEED_OFFSET)
    return sim.run()


def run_once(config: ScenarioConfig, seed: int, continue_for: int = 0) -> RunOutcome:
    trace = simulate(config, seed, continue_for)
    summary = check_all(trace)
    rounds = [r.round for r in trace.decisions if r.round is not None]
    lemma1 = summary.verdict(PropertyName.LEMMA1)
    return RunOutcome(
        seed=seed,
        holds=summary.holds,
        violations=[v.property for v in summary.violations],
        bounds_exceeded=summary.bounds_exceeded,
        latencies=sorted(decision_latencies(trace).values()),
        max_decision_round=max(rounds, default=None),
        dual_path=lemma1 is not None and not lemma1.vacuous,
    )


def latency_stats(samples: list[int]) -> LatencyStats:
    """min, median, nearest-rank 95th percentile and max"""

    if not samples:
        return LatencyStats()
    ordered = sorted(samples)
    rank = max(math.ceil(0.95 * len(ordered)), 1)
    return LatencyStats(
        samples=len(ordered),
        min=ordered[0],
        median=statistics.median(ordered),
        p95=ordered[rank - 1],
        max=ordered[-1],
    )


def bench(
    config: ScenarioConfig,
    runs: int,
    workers: int = 1,
    first_seed: Optional[int] = None,
    continue_for: int = 0,
) -> BenchReport:
    """Runs `runs` seeds starting at `first_seed` (the scenario seed by default) and aggregates verdicts"""

    if runs < 1:
        raise ValueError(f"runs must be >= 1, got {runs}")
    if continue_for < 0:
        raise ValueError(f"continue_for must be >= 0, got {continue_for}")
    first_seed = config.seed if first_seed is None else first_seed
    seeds = list(range(first_seed, first_seed + runs))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            outcomes = list(executor.map(run_once, [config] * runs, seeds, [continue_for] * runs))
    else:
        outcomes = [run_once(config, seed, continue_for) for seed in seeds]

    violations: dict[str, int] = {}
    for outcome in outcomes:
        for name in outcome.violations:
            violations[name] = violations.get(name, 0) + 1

    decided_rounds = [o.max_decision_round for o in outcomes if o.max_decision_round is not None]
    report = BenchReport(
        variant=config.variant.value,
        runs=runs,
        first_seed=first_seed,
        continued_for=continue_for,
        violations=dict(sorted(violations.items())),
        failing_seeds=[o.seed for o in outcomes if not o.holds],
        bounds_exceeded_runs=sum(o.bounds_exceeded for o in outcomes),
        decided_by_round1=sum(r <= 1 for r in decided_rounds) / runs,
        dual_path_runs=sum(o.dual_path for o in outcomes),
        latency=latency_stats([latency for o in outcomes for latency in o.latencies]),
    )
    logger.info(f"bench: {runs} runs, {len(report.failing_seeds)} failing, {report.dual_path_runs} dual-path")
    return report
