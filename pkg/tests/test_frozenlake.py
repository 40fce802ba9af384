import random

import pytest

from langrl.core import OutcomeKind, TerminalState
from langrl.envs import frozenlake as fl


def test_actions_always_the_four_directions():
    grid = fl.initial_grid()
    acts = fl.legal_actions(grid)
    assert [a.id for a in acts] == [1, 2, 3, 4]
    assert acts[1].display == "2 (Down)"


def test_deterministic_when_not_slippery():
    grid = fl.initial_grid()
    first = fl.apply_action(grid, fl.action(3))
    second = fl.apply_action(grid, fl.action(3))
    assert first.state_after == second.state_after
    assert first.state_after.player == (2, 1) or first.terminal


def test_moving_into_hole_fails():
    grid = fl.initial_grid()  # player at (2, 0), hole at (2, 1)
    record = fl.apply_action(grid, fl.action(3))
    assert record.terminal
    assert record.outcome.kind is OutcomeKind.FAIL
    assert record.reward == -1.0
    assert "X" in fl.grid_text(record.state_after)
    assert fl.game_over_sentence(record.state_after) == (
        "The game is over. Player fall into the hole and therefore fails."
    )


def test_reaching_goal_succeeds():
    layout = ("_G__", "____", "____", "____")
    grid = fl.initial_grid(layout, (0, 0))
    record = fl.apply_action(grid, fl.action(3))
    assert record.terminal
    assert record.outcome.kind is OutcomeKind.SUCCESS
    assert record.reward == 1.0
    assert fl.ON_GOAL in fl.grid_text(record.state_after)


def test_off_grid_moves_bounce():
    grid = fl.initial_grid()  # player at (2, 0)
    record = fl.apply_action(grid, fl.action(1))  # Left, off the grid
    assert record.state_after.player == (2, 0)
    assert record.state_after.step_count == 1


def test_step_cap_fails_with_sentence():
    grid = fl.initial_grid(step_cap=2)
    one = fl.apply_action(grid, fl.action(1))
    two = fl.apply_action(one.state_after, fl.action(1))
    assert two.terminal
    assert two.outcome.kind is OutcomeKind.FAIL
    assert fl.game_over_sentence(two.state_after) == (
        "The game is over. Player has reach maximum number of move and "
        "therefore fails."
    )
    with pytest.raises(TerminalState):
        fl.apply_action(two.state_after, fl.action(1))


def test_textualize_uses_symbol_rows():
    grid = fl.initial_grid()
    obs = fl.textualize(grid)
    assert obs.body == "_GO_\n___O\nPO__\n____"
    assert obs.mover == "P"


def test_grid_reparse_roundtrip(rng):
    layout = ("_GO_", "___O", "_O__", "____")
    for _ in range(50):
        cells = [
            (r, c)
            for r in range(4)
            for c in range(4)
            if layout[r][c] == "_"
        ]
        player = cells[rng.randrange(len(cells))]
        grid = fl.FrozenLakeGrid(layout, player, slippery=False)
        assert fl.parse_grid(fl.grid_text(grid)) == grid


def test_transition_description_format():
    grid = fl.initial_grid()
    record = fl.apply_action(grid, fl.action(2))
    text = fl.describe_transition(record)
    assert text.startswith("After taking action 2, the board position is \n")
    assert text.endswith(".")


def test_slippery_direction_frequencies():
    layout = ("____", "____", "____", "___G")
    grid = fl.initial_grid(layout, (1, 1), slippery=True, step_cap=10**9)
    rng = random.Random(11)
    counts = {(2, 1): 0, (1, 0): 0, (1, 2): 0}
    n = 30_000
    for _ in range(n):
        record = fl.apply_action(grid, fl.action(2), rng)  # Down
        counts[record.state_after.player] += 1
    for pos, hits in counts.items():
        assert abs(hits / n - 1 / 3) < 0.02, (pos, hits / n)


def test_slippery_requires_rng():
    grid = fl.initial_grid(slippery=True)
    with pytest.raises(ValueError):
        fl.apply_action(grid, fl.action(2))


def test_layout_validation():
    with pytest.raises(fl.InvalidGrid):
        fl.FrozenLakeGrid(("____",) * 4, (0, 0), False)  # no goal
    with pytest.raises(fl.InvalidGrid):
        fl.FrozenLakeGrid(("GG__", "____", "____", "____"), (2, 0), False)
