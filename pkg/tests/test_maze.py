import re
from collections import deque

import pytest

from langrl.core import OutcomeKind
from langrl.envs import maze as mz


def independent_bfs(layout: mz.MazeLayout) -> dict:
    """Distance-to-goal by plain queue search over the raw text rows."""
    dist = {layout.goal: 0}
    queue = deque([layout.goal])
    while queue:
        r, c = queue.popleft()
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            inside = 0 <= nr < len(layout.rows) and 0 <= nc < len(layout.rows[0])
            if inside and layout.rows[nr][nc] != "#" and (nr, nc) not in dist:
                dist[(nr, nc)] = dist[(r, c)] + 1
                queue.append((nr, nc))
    return dist


@pytest.mark.parametrize("name", ["double_t", "medium", "toy5"])
def test_shipped_layouts_are_connected(name):
    layout = mz.load_layout(name)
    dist = independent_bfs(layout)
    assert set(dist) == set(layout.floor_cells())
    assert mz.shortest_path_lengths(layout) == dist


def test_layout_validation():
    with pytest.raises(mz.InvalidLayout):
        mz.parse_layout("###\n#.#\n###", "no_goal")
    with pytest.raises(mz.InvalidLayout):
        mz.parse_layout("#G#\n#G#", "two_goals")
    with pytest.raises(mz.InvalidLayout):
        mz.load_layout("no_such_layout")


def test_blocked_move_keeps_position_but_records_history():
    layout = mz.load_layout("toy5")
    world = mz.initial_world(layout, (1, 1))
    record = mz.apply_action(world, mz.ACTIONS[0])  # move up into the border
    assert record.state_after.agent == world.agent
    assert record.state_after.move_history == (((1, 1), "move up"),)
    assert record.reward == -1.0


def test_goal_ends_episode_with_success():
    layout = mz.load_layout("toy5")
    goal = layout.goal
    start = (goal[0] - 1, goal[1])
    assert layout.is_floor(start)
    world = mz.initial_world(layout, start)
    record = mz.apply_action(world, mz.ACTIONS[1])  # move down
    assert record.terminal
    assert record.outcome.kind is OutcomeKind.SUCCESS
    assert record.reward == -1.0


def test_step_cap_fails():
    layout = mz.load_layout("toy5")
    world = mz.initial_world(layout, (1, 1), step_cap=1)
    record = mz.apply_action(world, mz.ACTIONS[0])
    assert record.terminal
    assert record.outcome.kind is OutcomeKind.FAIL


def test_position_sentence_orders_wall_phrases():
    layout = mz.parse_layout("#####\n#..G#\n#.###\n#####", "cramped")
    text = mz.position_sentence(layout, (2, 1))
    assert text == (
        "The goal is at position 1, 3. Your current position is at position 2, 1. "
        "There are walls below you, to your left, to your right."
    )


def test_history_text_runs_old_to_new():
    layout = mz.load_layout("toy5")
    world = mz.initial_world(layout, (1, 1))
    world = mz.apply_action(world, mz.ACTIONS[3]).state_after   # right
    world = mz.apply_action(world, mz.ACTIONS[0]).state_after   # up (blocked)
    text = mz.history_text(world)
    lines = text.splitlines()
    assert lines[1] == "move right"
    assert lines[3] == "move up"
    assert "position 1, 2" in lines[-1]


def test_observation_reparses_to_state_position():
    layout = mz.load_layout("medium")
    world = mz.initial_world(layout, (1, 1))
    world = mz.apply_action(world, mz.ACTIONS[1]).state_after
    obs = mz.textualize(world)
    positions = re.findall(
        r"Your current position is at position (\d+), (\d+)\.", obs.body
    )
    assert (int(positions[-1][0]), int(positions[-1][1])) == world.agent
    goals = re.findall(r"The goal is at position (\d+), (\d+)\.", obs.body)
    assert (int(goals[-1][0]), int(goals[-1][1])) == layout.goal


def test_transition_description_shows_action_then_observation():
    layout = mz.load_layout("toy5")
    world = mz.initial_world(layout, (1, 1))
    record = mz.apply_action(world, mz.ACTIONS[3])
    text = mz.describe_transition(record)
    assert text.splitlines()[0] == "move right"
    assert "Your current position is at position 1, 2." in text
