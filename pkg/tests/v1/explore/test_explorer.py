"""
1. A single validator's executions are searched to the end without a violation
2. An exhausted state budget yields a partial report
3. Two equivocators among four validators break safety under either schedule and the report names the path
4. Equivocators are split into one actor per fork, one fork per transaction
5. Layered search offers one action per set of non-fork actors hearing the other group
6. Four validators with one equivocator and three blocks each are searched to the end without a violation
7. Copied states share blocks and transactions
8. Requests are validated
"""

import copy

import pytest
from pydantic import ValidationError

from casanova_sim.app.core.base.errors import FaultBoundError
from casanova_sim.app.utils.types import ByzantineKind, ExploreSchedule
from casanova_sim.app.v1.models import GENESIS
from casanova_sim.app.v1.schemas.explore import ExploreRequest
from casanova_sim.app.v1.services.explorer import Explorer, explore, tolerance
from tests.conftest import make_tx


@pytest.mark.parametrize("schedule", list(ExploreSchedule))
def test_single_validator_is_exhausted(schedule):
    report = explore(ExploreRequest(n=1, f=0, behavior=None, max_blocks=2, schedule=schedule))
    assert report.complete
    assert report.violation is None
    assert report.explored >= 3
    assert report.exit_code == 0
    assert report.behavior is None
    assert report.schedule == schedule.value


def test_budget_gives_partial_report():
    report = explore(ExploreRequest(n=4, f=1, max_blocks=1, max_states=50, schedule=ExploreSchedule.INTERLEAVED))
    assert not report.complete
    assert report.violation is None
    assert report.explored == 50
    assert report.exit_code == 2
    assert not report.bounds_exceeded


@pytest.mark.parametrize("schedule", list(ExploreSchedule))
def test_two_equivocators_break_safety(schedule):
    report = explore(ExploreRequest(n=4, f=2, max_blocks=2, max_states=5000, schedule=schedule))
    assert report.bounds_exceeded
    assert report.tolerance == 1
    assert report.exit_code == 1

    violation = report.violation
    assert violation.conflict_index == "double-spend"
    assert set(violation.chosen) <= {"0", "1"}
    assert len(set(violation.chosen.values())) == 2
    assert violation.path and all(":" in step for step in violation.path)


def test_forks_become_actors():
    explorer = Explorer(ExploreRequest(n=4, f=1, schedule=ExploreSchedule.INTERLEAVED))
    state = explorer.initial_state()
    assert sorted(state.actors) == ["0", "1", "2", "3/0", "3/1"]
    assert [state.actors[name].group for name in ("0", "1", "2", "3/0", "3/1")] == [0, 1, 0, 0, 1]
    assert not state.actors["3/0"].node.is_correct
    assert state.actors["3/0"].is_fork and not state.actors["2"].is_fork
    assert [action[0] for action in explorer.actions(state)] == ["block"] * 5

    child = explorer.apply(state, ("block", "3/0"))
    assert child.fingerprint() != state.fingerprint()
    assert state.actors["3/0"].produced == 0
    assert len([key for key in child.channels if key[0] == "3/0"]) == 3


def test_layer_actions():
    explorer = Explorer(ExploreRequest(n=4, f=1, max_blocks=2))
    state = explorer.initial_state()
    assert explorer.actions(state) == [("layer", "1", "-")]

    first = explorer.apply(state, ("layer", "1", "-"))
    assert first.layer == 1
    assert all(actor.produced == 1 for actor in first.actors.values())
    actions = explorer.actions(first)
    assert len(actions) == 8
    assert actions[0] == ("layer", "2", "-")
    assert ("layer", "2", "0+1+2") in actions
    assert not any("3/" in action[2] for action in actions)

    # same-group blocks always arrive, the other group's wait unless heard
    second = explorer.apply(first, ("layer", "2", "-"))
    assert len(second.channels[("2", "0")]) == 1
    assert len(second.channels[("1", "0")]) == 2
    heard = explorer.apply(first, ("layer", "2", "0"))
    assert len(heard.channels[("1", "0")]) == 1
    assert len(heard.channels[("0", "1")]) == 2

    final = explorer.apply(second, ("layer", "3", "0+1+2"))
    assert all(actor.produced == 2 for actor in final.actors.values())
    assert explorer.actions(final) == []


@pytest.mark.slow
def test_one_equivocator_among_four_is_safe():
    report = explore(ExploreRequest(n=4, f=1, max_blocks=3))
    assert report.complete
    assert report.violation is None
    assert report.exit_code == 0
    assert report.schedule == "layered"
    assert report.explored <= 1 + 1 + 8 + 8**2 + 8**3


def test_copies_share_blocks():
    tx = make_tx("pay-alice")
    assert copy.deepcopy(tx) is tx
    assert copy.deepcopy(GENESIS) is GENESIS

    explorer = Explorer(ExploreRequest(n=4, f=1, max_blocks=2))
    first = explorer.apply(explorer.initial_state(), ("layer", "1", "-"))
    twin = copy.deepcopy(first)
    assert twin.fingerprint() == first.fingerprint()
    for key, queue in first.channels.items():
        assert all(a is b for a, b in zip(queue, twin.channels[key]))


def test_tolerance_cap():
    assert tolerance(4, 1) == 1
    assert tolerance(4, 2) == 1
    assert tolerance(1, 0) == 0


def test_request_validation():
    with pytest.raises(ValidationError):
        ExploreRequest(n=2, f=3)
    with pytest.raises(ValidationError):
        ExploreRequest(n=5)
    with pytest.raises(ValidationError):
        ExploreRequest(schedule="random")
    with pytest.raises(FaultBoundError):
        ExploreRequest(n=4, f=2, strict_bounds=True)
    assert ExploreRequest().behavior == ByzantineKind.EQUIVOCATOR
    assert ExploreRequest().schedule == ExploreSchedule.LAYERED
