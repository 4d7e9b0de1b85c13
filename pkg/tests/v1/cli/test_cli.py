"""
1. run writes the trace, the verdicts and one DOT file per validator, and reports on stdout
2. export-dot draws a validator's final DAG from a written trace
3. explore and bench report their outcome and exit code
4. Bad input exits with 2 and a message on stderr
5. Settings carry typed defaults and accept overrides
"""

import json

import pytest

from casanova_sim.app.utils.settings import Settings, settings
from casanova_sim.main import main

SPLIT = """
variant = "casanova"
n = 4
f = 0
seed = 7
horizon = 120

[network]
mode = "partial_sync"
delta = 2

[[transactions]]
payload = "pay-alice"
conflict_index = "coin-1"
recipients = [0, 1]

[[transactions]]
payload = "pay-bob"
conflict_index = "coin-1"
recipients = [2, 3]
"""

UNDERSIZED = """
n = 3
f = 1
horizon = 60

[byzantine]
2 = "silent"

[[transactions]]
payload = "pay-alice"
conflict_index = "coin-1"
"""


@pytest.fixture
def split(tmp_path):
    path = tmp_path / "split.toml"
    path.write_text(SPLIT)
    return path


def test_run_writes_artifacts(split, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["--mode", "run", "--scenario", str(split), "--out", str(out)]) == 0

    run_dir = out / "split-seed7"
    assert (run_dir / "trace.jsonl").is_file()
    for v in range(4):
        assert (run_dir / "dot" / f"validator-{v}.dot").is_file()
    verdicts = json.loads((run_dir / "verdicts.json").read_text())
    assert verdicts["holds"] is True
    assert {v["property"] for v in verdicts["verdicts"]} == {"safety", "stability", "eventual_choice", "liveness"}

    response = json.loads(capsys.readouterr().out)
    assert response["exit_code"] == 0
    assert response["data"]["seed"] == 7
    assert response["data"]["verdicts"]["safety"] is True


def test_seed_flag_names_the_run(split, tmp_path):
    out = tmp_path / "out"
    assert main(["--mode", "run", "--scenario", str(split), "--seed", "11", "--out", str(out)]) == 0
    assert (out / "split-seed11" / "trace.jsonl").is_file()


def test_export_dot(split, tmp_path, capsys):
    out = tmp_path / "out"
    main(["--mode", "run", "--scenario", str(split), "--out", str(out)])
    trace = out / "split-seed7" / "trace.jsonl"
    capsys.readouterr()

    assert main(["--mode", "export-dot", "--trace", str(trace), "--validator", "2"]) == 0
    text = capsys.readouterr().out
    assert text.startswith('digraph "validator-2" {')
    assert 'label="genesis"' in text
    assert "lightgreen" in text

    assert main(["--mode", "export-dot", "--trace", str(trace), "--validator", "2", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "validator-2.dot").read_text() == text

    assert main(["--mode", "export-dot", "--trace", str(trace), "--validator", "9"]) == 2
    assert "no validator 9" in capsys.readouterr().err


def test_explore(tmp_path, capsys):
    argv = ["--mode", "explore", "--n", "1", "--f", "0", "--behavior", "none", "--max-blocks", "1"]
    assert main(argv + ["--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "explore-n1-f0.json").read_text())
    assert report["complete"] is True
    assert report["violation"] is None
    assert json.loads(capsys.readouterr().out)["success"] is True

    assert main(["--mode", "explore", "--n", "4", "--f", "2", "--strict-bounds"]) == 2


def test_bench(split, tmp_path):
    assert main(["--mode", "bench", "--scenario", str(split), "--runs", "2", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "split-bench.json").read_text())
    assert report["runs"] == 2
    assert report["first_seed"] == 7
    assert report["failing_seeds"] == []
    assert report["latency"]["samples"] == 2
    assert report["continued_for"] == 0

    argv = ["--mode", "bench", "--scenario", str(split), "--runs", "2", "--continue-for", "10", "--out", str(tmp_path)]
    assert main(argv) == 0
    report = json.loads((tmp_path / "split-bench.json").read_text())
    assert report["continued_for"] == 10
    assert report["failing_seeds"] == []
    assert report["dual_path_runs"] == 0


def test_bad_input(tmp_path, capsys):
    broken = tmp_path / "broken.toml"
    broken.write_text("n = [\n")
    assert main(["--mode", "run", "--scenario", str(broken), "--out", str(tmp_path)]) == 2
    assert "error:" in capsys.readouterr().err

    assert main(["--mode", "run"]) == 2
    assert main(["--mode", "export-dot"]) == 2
    assert main(["--mode", "run", "--scenario", str(tmp_path / "missing.toml")]) == 2

    with pytest.raises(SystemExit):
        main(["--mode", "fly"])


def test_fault_bound_flag(tmp_path):
    path = tmp_path / "undersized.toml"
    path.write_text(UNDERSIZED)
    out = str(tmp_path / "out")
    assert main(["--mode", "run", "--scenario", str(path), "--out", out]) == 2
    assert main(["--mode", "run", "--scenario", str(path), "--out", out, "--no-strict-bounds"]) == 0
    verdicts = json.loads((tmp_path / "out" / "undersized-seed0" / "verdicts.json").read_text())
    assert verdicts["bounds_exceeded"] is True


def test_settings():
    assert isinstance(settings.DEFAULT_SEED, int)
    assert isinstance(settings.EXPLORE_MAX_STATES, int)
    assert settings.BENCH_WORKERS >= 1
    overridden = Settings(LOG_LEVEL="DEBUG", BENCH_WORKERS=3)
    assert overridden.LOG_LEVEL == "DEBUG"
    assert overridden.BENCH_WORKERS == 3
