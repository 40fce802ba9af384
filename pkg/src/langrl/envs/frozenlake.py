"""4x4 FrozenLake: reach the goal, avoid holes, optionally slippery ice.

Renders as four symbol rows using P (player), _ (empty), O (hole),
G (goal), X (player in hole) and the check mark for player on goal.
Actions are 1:Left, 2:Down, 3:Right, 4:Up; moves off the grid leave the
player in place. On slippery ice the intended direction happens with
probability 1/3 and each perpendicular direction with probability 1/3.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
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

SIZE = 4
DEFAULT_STEP_CAP = 16

LEFT, DOWN, RIGHT, UP = 1, 2, 3, 4
ACTION_NAMES = {LEFT: "Left", DOWN: "Down", RIGHT: "Right", UP: "Up"}
# (row delta, col delta) per action id
DELTAS = {LEFT: (0, -1), DOWN: (1, 0), RIGHT: (0, 1), UP: (-1, 0)}
PERPENDICULAR = {LEFT: (DOWN, UP), RIGHT: (DOWN, UP), DOWN: (LEFT, RIGHT), UP: (LEFT, RIGHT)}

ON_GOAL = "√"  # check mark shown when the player stands on the goal

# The map used throughout the prompt examples: goal top row, three holes.
DEFAULT_LAYOUT = (
    "_GO_",
    "___O",
    "_O__",
    "____",
)
DEFAULT_START = (2, 0)


class InvalidGrid(ValueError):
    pass


@dataclass(frozen=True)
class FrozenLakeGrid:
    """Immutable snapshot: static layout plus player position and step budget."""

    layout: tuple[str, ...]          # SIZE rows of '_', 'O', 'G'
    player: tuple[int, int]
    slippery: bool
    step_count: int = 0
    step_cap: int = DEFAULT_STEP_CAP

    def __post_init__(self) -> None:
        if len(self.layout) != SIZE or any(len(r) != SIZE for r in self.layout):
            raise InvalidGrid("layout must be 4 rows of 4 symbols")
        if any(ch not in "_OG" for row in self.layout for ch in row):
            raise InvalidGrid("layout symbols must be _, O or G")
        if sum(row.count("G") for row in self.layout) != 1:
            raise InvalidGrid("layout must contain exactly one goal")
        r, c = self.player
        if not (0 <= r < SIZE and 0 <= c < SIZE):
            raise InvalidGrid("player outside the grid")

    def cell(self, pos: tuple[int, int]) -> str:
        return self.layout[pos[0]][pos[1]]


def initial_grid(
    layout: tuple[str, ...] = DEFAULT_LAYOUT,
    start: tuple[int, int] = DEFAULT_START,
    slippery: bool = False,
    step_cap: int = DEFAULT_STEP_CAP,
) -> FrozenLakeGrid:
    grid = FrozenLakeGrid(tuple(layout), start, slippery, 0, step_cap)
    if grid.cell(start) != "_":
        raise InvalidGrid("player must start on an empty cell")
    return grid


def action(aid: int) -> AgentAction:
    return AgentAction(id=aid, display=f"{aid} ({ACTION_NAMES[aid]})")


ACTIONS = tuple(action(a) for a in (LEFT, DOWN, RIGHT, UP))


def is_terminal(grid: FrozenLakeGrid) -> bool:
    return grid.cell(grid.player) in "OG" or grid.step_count >= grid.step_cap


def terminal_outcome(grid: FrozenLakeGrid) -> Optional[Outcome]:
    cell = grid.cell(grid.player)
    if cell == "G":
        return Outcome(OutcomeKind.SUCCESS)
    if cell == "O" or grid.step_count >= grid.step_cap:
        return Outcome(OutcomeKind.FAIL)
    return None


def legal_actions(grid: FrozenLakeGrid) -> tuple[AgentAction, ...]:
    if is_terminal(grid):
        raise TerminalState("no legal actions in a terminal state")
    return ACTIONS


def _slide(pos: tuple[int, int], direction: int) -> tuple[int, int]:
    dr, dc = DELTAS[direction]
    r, c = pos[0] + dr, pos[1] + dc
    if 0 <= r < SIZE and 0 <= c < SIZE:
        return (r, c)
    return pos


def apply_action(
    grid: FrozenLakeGrid, act: AgentAction, rng: Optional[random.Random] = None
) -> TransitionRecord:
    if is_terminal(grid):
        raise TerminalState("cannot move in a terminal state")
    aid = int(act.id)
    if aid not in ACTION_NAMES:
        raise IllegalAction(f"unknown action {act.id!r}")
    direction = aid
    if grid.slippery:
        if rng is None:
            raise ValueError("slippery dynamics require an RNG")
        side_a, side_b = PERPENDICULAR[aid]
        direction = rng.choice((aid, side_a, side_b))
    after = replace(grid, player=_slide(grid.player, direction),
                    step_count=grid.step_count + 1)
    outcome = terminal_outcome(after)
    cell = after.cell(after.player)
    reward = 1.0 if cell == "G" else -1.0 if cell == "O" else 0.0
    return TransitionRecord(
        state_before=grid,
        action=action(aid),
        reward=reward,
        state_after=after,
        terminal=outcome is not None,
        outcome=outcome,
    )


def grid_text(grid: FrozenLakeGrid) -> str:
    rows = []
    for r in range(SIZE):
        row = []
        for c in range(SIZE):
            cell = grid.layout[r][c]
            if (r, c) == grid.player:
                row.append("X" if cell == "O" else ON_GOAL if cell == "G" else "P")
            else:
                row.append(cell)
        rows.append("".join(row))
    return "\n".join(rows)


def textualize(grid: FrozenLakeGrid) -> TextObservation:
    legal = () if is_terminal(grid) else legal_actions(grid)
    return TextObservation(body=grid_text(grid), legal_actions=legal, mover="P")


def parse_grid(
    text: str, slippery: bool = False, step_count: int = 0, step_cap: int = DEFAULT_STEP_CAP
) -> FrozenLakeGrid:
    """Rebuild a grid from its rendered text (re-parse invariant)."""
    rows = [line.strip() for line in text.strip().splitlines() if line.strip()]
    if len(rows) != SIZE:
        raise InvalidGrid("grid text must have 4 rows")
    player = None
    layout = []
    for r, row in enumerate(rows):
        cells = []
        for c, ch in enumerate(row):
            if ch in ("P", "X", ON_GOAL):
                player = (r, c)
                cells.append({"P": "_", "X": "O", ON_GOAL: "G"}[ch])
            else:
                cells.append(ch)
        layout.append("".join(cells))
    if player is None:
        raise InvalidGrid("no player symbol in grid text")
    return FrozenLakeGrid(tuple(layout), player, slippery, step_count, step_cap)


def describe_transition(t: TransitionRecord) -> str:
    return (
        f"After taking action {t.action.id}, the board position is \n"
        f"{grid_text(t.state_after)}."
    )


def game_over_sentence(grid: FrozenLakeGrid) -> str:
    cell = grid.cell(grid.player)
    if cell == "G":
        return "The game is over. Player has reached the goal and therefore succeeds."
    if cell == "O":
        return "The game is over. Player fall into the hole and therefore fails."
    if grid.step_count >= grid.step_cap:
        return "The game is over. Player has reach maximum number of move and therefore fails."
    raise InvalidGrid("game is not over")


register_transition_renderer(EnvKind.FROZEN_LAKE, describe_transition)


class FrozenLakeEnv:
    kind = EnvKind.FROZEN_LAKE

    def __init__(
        self,
        layout: tuple[str, ...] = DEFAULT_LAYOUT,
        start: tuple[int, int] = DEFAULT_START,
        slippery: bool = False,
        step_cap: int = DEFAULT_STEP_CAP,
    ):
        self.layout = tuple(layout)
        self.start = start
        self.slippery = slippery
        self.step_cap = step_cap

    def initial_state(self, rng: Optional[random.Random] = None) -> FrozenLakeGrid:
        return initial_grid(self.layout, self.start, self.slippery, self.step_cap)

    def legal_actions(self, state):
        return legal_actions(state)

    def apply_action(self, state, act, rng=None):
        return apply_action(state, act, rng)

    def textualize(self, state):
        return textualize(state)

    def is_terminal(self, state):
        return is_terminal(state)
