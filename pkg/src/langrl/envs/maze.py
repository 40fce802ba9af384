"""Grid mazes with natural-language observations.

A layout file is a text grid: '#' wall, '.' floor, 'G' goal. The agent
observes its position, the goal position, the walls around it, and its
full move history. A move into a wall (or off the grid) leaves the
position unchanged but is still recorded in the history. Every step
costs -1; an episode ends on the goal or at the step cap.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from importlib import resources
from typing import Optional

from langrl.core import (
    AgentAction,
    EnvKind,
    IllegalAction,
    Outcome,
    OutcomeKind,
    TerminalState,
    TextObservation,
    TransitionRecord,
    register_transition_renderer,
)

DEFAULT_STEP_CAP = 50

UP, DOWN, LEFT, RIGHT = 1, 2, 3, 4
DISPLAYS = {UP: "move up", DOWN: "move down", LEFT: "move left", RIGHT: "move right"}
DELTAS = {UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1)}

ACTIONS = tuple(AgentAction(id=a, display=DISPLAYS[a]) for a in (UP, DOWN, LEFT, RIGHT))


class InvalidLayout(ValueError):
    pass


@dataclass(frozen=True)
class MazeLayout:
    name: str
    rows: tuple[str, ...]
    goal: tuple[int, int]

    @property
    def height(self) -> int:
        return len(self.rows)

    @property
    def width(self) -> int:
        return len(self.rows[0])

    def is_floor(self, pos: tuple[int, int]) -> bool:
        r, c = pos
        return 0 <= r < self.height and 0 <= c < self.width and self.rows[r][c] != "#"

    def floor_cells(self) -> list[tuple[int, int]]:
        return [
            (r, c)
            for r in range(self.height)
            for c in range(self.width)
            if self.rows[r][c] != "#"
        ]


def parse_layout(text: str, name: str) -> MazeLayout:
    rows = [line.rstrip("\n") for line in text.splitlines() if line.strip()]
    if not rows:
        raise InvalidLayout("empty layout")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise InvalidLayout("ragged layout rows")
    if any(ch not in "#.G" for row in rows for ch in row):
        raise InvalidLayout("layout symbols must be '#', '.' or 'G'")
    goals = [
        (r, c) for r, row in enumerate(rows) for c, ch in enumerate(row) if ch == "G"
    ]
    if len(goals) != 1:
        raise InvalidLayout("layout must contain exactly one goal")
    return MazeLayout(name=name, rows=tuple(rows), goal=goals[0])


def load_layout(name: str) -> MazeLayout:
    """Load a named layout shipped with the package."""
    ref = resources.files("langrl.envs") / "layouts" / f"{name}.txt"
    try:
        text = ref.read_text()
    except FileNotFoundError:
        raise InvalidLayout(f"no layout named {name!r}")
    return parse_layout(text, name)


@dataclass(frozen=True)
class MazeWorld:
    layout: MazeLayout
    agent: tuple[int, int]
    # (position before the move, action display), oldest first
    move_history: tuple[tuple[tuple[int, int], str], ...] = ()
    step_cap: int = DEFAULT_STEP_CAP

    def __post_init__(self) -> None:
        if not self.layout.is_floor(self.agent):
            raise InvalidLayout(f"agent at {self.agent} is not on floor")

    @property
    def step_count(self) -> int:
        return len(self.move_history)


def initial_world(
    layout: MazeLayout, start: tuple[int, int], step_cap: int = DEFAULT_STEP_CAP
) -> MazeWorld:
    return MazeWorld(layout=layout, agent=start, step_cap=step_cap)


def is_terminal(world: MazeWorld) -> bool:
    return world.agent == world.layout.goal or world.step_count >= world.step_cap


def legal_actions(world: MazeWorld) -> tuple[AgentAction, ...]:
    if is_terminal(world):
        raise TerminalState("no legal actions in a terminal state")
    return ACTIONS


def apply_action(
    world: MazeWorld, act: AgentAction, rng: Optional[random.Random] = None
) -> TransitionRecord:
    if is_terminal(world):
        raise TerminalState("cannot move in a terminal state")
    aid = int(act.id)
    if aid not in DELTAS:
        raise IllegalAction(f"unknown action {act.id!r}")
    dr, dc = DELTAS[aid]
    target = (world.agent[0] + dr, world.agent[1] + dc)
    new_pos = target if world.layout.is_floor(target) else world.agent
    after = replace(
        world,
        agent=new_pos,
        move_history=world.move_history + ((world.agent, DISPLAYS[aid]),),
    )
    if after.agent == world.layout.goal:
        outcome: Optional[Outcome] = Outcome(OutcomeKind.SUCCESS)
    elif after.step_count >= after.step_cap:
        outcome = Outcome(OutcomeKind.FAIL)
    else:
        outcome = None
    return TransitionRecord(
        state_before=world,
        action=AgentAction(id=aid, display=DISPLAYS[aid]),
        reward=-1.0,
        state_after=after,
        terminal=outcome is not None,
        outcome=outcome,
    )


def _wall_phrases(layout: MazeLayout, pos: tuple[int, int]) -> list[str]:
    r, c = pos
    phrases = []
    if not layout.is_floor((r - 1, c)):
        phrases.append("above you")
    if not layout.is_floor((r + 1, c)):
        phrases.append("below you")
    if not layout.is_floor((r, c - 1)):
        phrases.append("to your left")
    if not layout.is_floor((r, c + 1)):
        phrases.append("to your right")
    return phrases


def position_sentence(layout: MazeLayout, pos: tuple[int, int]) -> str:
    gr, gc = layout.goal
    text = (
        f"The goal is at position {gr}, {gc}. "
        f"Your current position is at position {pos[0]}, {pos[1]}."
    )
    walls = _wall_phrases(layout, pos)
    if walls:
        text += f" There are walls {', '.join(walls)}."
    return text


def history_text(world: MazeWorld) -> str:
    """Move history from old to new, ending at the current observation."""
    lines = []
    for pos, act in world.move_history:
        lines.append(position_sentence(world.layout, pos))
        lines.append(act)
    lines.append(position_sentence(world.layout, world.agent))
    return "\n".join(lines)


def textualize(world: MazeWorld) -> TextObservation:
    legal = () if is_terminal(world) else legal_actions(world)
    return TextObservation(body=history_text(world), legal_actions=legal, mover="agent")


def describe_transition(t: TransitionRecord) -> str:
    return (
        f"{t.action.display}\n"
        f"{position_sentence(t.state_after.layout, t.state_after.agent)}"
    )


register_transition_renderer(EnvKind.MAZE, describe_transition)


def shortest_path_lengths(layout: MazeLayout) -> dict[tuple[int, int], int]:
    """BFS distance from every floor cell to the goal."""
    from collections import deque

    dist = {layout.goal: 0}
    queue = deque([layout.goal])
    while queue:
        r, c = queue.popleft()
        for dr, dc in DELTAS.values():
            nxt = (r + dr, c + dc)
            if layout.is_floor(nxt) and nxt not in dist:
                dist[nxt] = dist[(r, c)] + 1
                queue.append(nxt)
    return dist


class MazeEnv:
    kind = EnvKind.MAZE

    def __init__(
        self,
        layout: MazeLayout,
        start: Optional[tuple[int, int]] = None,
        step_cap: int = DEFAULT_STEP_CAP,
    ):
        self.layout = layout
        self.start = start
        self.step_cap = step_cap

    def initial_state(self, rng: Optional[random.Random] = None) -> MazeWorld:
        start = self.start
        if start is None:
            cells = [c for c in self.layout.floor_cells() if c != self.layout.goal]
            if rng is None:
                raise ValueError("random spawn requires an RNG")
            start = cells[rng.randrange(len(cells))]
        return initial_world(self.layout, start, self.step_cap)

    def legal_actions(self, state):
        return legal_actions(state)

    def apply_action(self, state, act, rng=None):
        return apply_action(state, act, rng)

    def textualize(self, state):
        return textualize(state)

    def is_terminal(self, state):
        return is_terminal(state)
