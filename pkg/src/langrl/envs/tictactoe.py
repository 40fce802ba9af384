"""Tic-tac-toe as a text MDP: 3x3 board, cells numbered 1-9 row-major.

Board text follows the grid-number convention: an empty cell shows its
number, rows are separated by a 9-dash line, e.g.::

    O | X | 3
    ---------
    4 | 5 | 6
    ---------
    7 | 8 | 9
"""

from __future__ import annotations

import random
from dataclasses import dataclass
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

SIDES = ("O", "X")

WIN_LINES = (
    (0, 1, 2), (3, 4, 5), (6, 7, 8),   # rows
    (0, 3, 6), (1, 4, 7), (2, 5, 8),   # columns
    (0, 4, 8), (2, 4, 6),              # diagonals
)


class InvalidBoard(ValueError):
    pass


@dataclass(frozen=True)
class TicTacToeBoard:
    """Immutable board snapshot; ``cells`` holds 'O', 'X' or '' per slot."""

    cells: tuple[str, ...]
    to_move: str

    def __post_init__(self) -> None:
        if len(self.cells) != 9 or any(c not in ("O", "X", "") for c in self.cells):
            raise InvalidBoard("cells must be 9 slots of 'O', 'X' or ''")
        if self.to_move not in SIDES:
            raise InvalidBoard(f"bad side {self.to_move!r}")
        n_o = self.cells.count("O")
        n_x = self.cells.count("X")
        if abs(n_o - n_x) > 1:
            raise InvalidBoard("mark counts differ by more than one")
        # The side that is ahead cannot be the one to move again.
        if n_o > n_x and self.to_move == "O":
            raise InvalidBoard("O has extra marks but is to move")
        if n_x > n_o and self.to_move == "X":
            raise InvalidBoard("X has extra marks but is to move")
        if winning_line(self.cells, "O") and winning_line(self.cells, "X"):
            raise InvalidBoard("both sides have winning lines")


def winning_line(cells: tuple[str, ...], side: str) -> Optional[tuple[int, int, int]]:
    for line in WIN_LINES:
        if all(cells[i] == side for i in line):
            return line
    return None


def winner(cells: tuple[str, ...]) -> Optional[str]:
    for side in SIDES:
        if winning_line(cells, side):
            return side
    return None


def is_terminal(board: TicTacToeBoard) -> bool:
    return winner(board.cells) is not None or "" not in board.cells


def other(side: str) -> str:
    return "X" if side == "O" else "O"


def initial_board(first_to_move: str = "O") -> TicTacToeBoard:
    return TicTacToeBoard(("",) * 9, first_to_move)


def action(cell: int) -> AgentAction:
    return AgentAction(id=cell, display=str(cell))


def legal_actions(board: TicTacToeBoard) -> tuple[AgentAction, ...]:
    if is_terminal(board):
        raise TerminalState("no legal actions in a terminal position")
    return tuple(action(i + 1) for i, c in enumerate(board.cells) if c == "")


def apply_action(
    board: TicTacToeBoard, act: AgentAction, rng: Optional[random.Random] = None
) -> TransitionRecord:
    if is_terminal(board):
        raise TerminalState("cannot move in a terminal position")
    cell = int(act.id)
    if not (1 <= cell <= 9) or board.cells[cell - 1] != "":
        raise IllegalAction(f"cell {act.id} is not playable")
    mover = board.to_move
    cells = board.cells[:cell - 1] + (mover,) + board.cells[cell:]
    after = TicTacToeBoard(cells, other(mover))
    line = winning_line(cells, mover)
    if line is not None:
        outcome = Outcome(OutcomeKind.WIN, mover)
        reward = 1.0
    elif "" not in cells:
        outcome = Outcome(OutcomeKind.DRAW)
        reward = 0.0
    else:
        outcome = None
        reward = 0.0
    return TransitionRecord(
        state_before=board,
        action=act,
        reward=reward,
        state_after=after,
        terminal=outcome is not None,
        outcome=outcome,
    )


def board_text(board: TicTacToeBoard) -> str:
    rows = []
    for r in range(3):
        rows.append(" | ".join(
            board.cells[3 * r + c] or str(3 * r + c + 1) for c in range(3)
        ))
    return "\n---------\n".join(rows)


def textualize(board: TicTacToeBoard) -> TextObservation:
    legal = () if is_terminal(board) else legal_actions(board)
    return TextObservation(body=board_text(board), legal_actions=legal, mover=board.to_move)


def parse_board(text: str, to_move: str) -> TicTacToeBoard:
    """Rebuild a board from its rendered text (re-parse invariant)."""
    cells = []
    for line in text.strip().splitlines():
        if set(line.strip()) == {"-"}:
            continue
        parts = [p.strip() for p in line.split("|")]
        if len(parts) != 3:
            raise InvalidBoard(f"unparseable board row {line!r}")
        for p in parts:
            cells.append(p if p in SIDES else "")
    if len(cells) != 9:
        raise InvalidBoard("board text does not have 9 cells")
    return TicTacToeBoard(tuple(cells), to_move)


def win_positions(cells: tuple[str, ...], side: str) -> list[int]:
    line = winning_line(cells, side)
    if line is None:
        raise InvalidBoard(f"{side} has no winning line")
    return [i + 1 for i in line]


def game_over_sentence(board: TicTacToeBoard) -> str:
    side = winner(board.cells)
    if side is not None:
        positions = win_positions(board.cells, side)
        return (
            f"The game is over. {side} wins. "
            f"{side} wins by occupying the positions {positions}."
        )
    if "" not in board.cells:
        return "The game is over. The game is a draw."
    raise InvalidBoard("game is not over")


def describe_transition(t: TransitionRecord) -> str:
    mover = t.state_before.to_move
    return (
        f"After {mover} taking action {t.action.id}, the board position is:\n"
        f"{board_text(t.state_after)}."
    )


register_transition_renderer(EnvKind.TIC_TAC_TOE, describe_transition)


class TicTacToeEnv:
    kind = EnvKind.TIC_TAC_TOE

    def __init__(self, first_to_move: str = "O"):
        self.first_to_move = first_to_move

    def initial_state(self, rng: Optional[random.Random] = None) -> TicTacToeBoard:
        return initial_board(self.first_to_move)

    def legal_actions(self, state):
        return legal_actions(state)

    def apply_action(self, state, act, rng=None):
        return apply_action(state, act, rng)

    def textualize(self, state):
        return textualize(state)

    def is_terminal(self, state):
        return is_terminal(state)
