from casanova_sim.app.v1.commands.run import run_scenario
from casanova_sim.app.v1.commands.explore import explore_states
from casanova_sim.app.v1.commands.export_dot import export_trace_dot
from casanova_sim.app.v1.commands.bench import bench_scenario

commands = {
    "run": run_scenario,
    "explore": explore_states,
    "export-dot": export_trace_dot,
    "bench": bench_scenario,
}
