"""5x5 Breakthrough: two rows of pawns per side, black moves first.

Pieces move one square straight or diagonally forward onto empty squares
and capture only diagonally. A side wins by reaching the opponent's home
row or capturing every opposing pawn.

Squares are named like chess files a-e and rows 1-5 (white starts on rows
1-2, black on rows 4-5); a move code is the from/to pair, e.g. ``d3e4``.
The board is kept as a pair of 25-bit masks so random playouts stay cheap.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterator, Optional

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

N = 5
FILES = "abcde"
WHITE, BLACK = "white", "black"
FULL = (1 << N * N) - 1
WHITE_START = (1 << 2 * N) - 1                # rows 1-2
BLACK_START = ((1 << 2 * N) - 1) << (3 * N)   # rows 4-5
WHITE_GOAL = ((1 << N) - 1) << (4 * N)        # row 5
BLACK_GOAL = (1 << N) - 1                     # row 1


class InvalidBoard(ValueError):
    pass


def square_name(bit: int) -> str:
    return f"{FILES[bit % N]}{bit // N + 1}"


def square_bit(name: str) -> int:
    col = FILES.index(name[0])
    row = int(name[1])
    return (row - 1) * N + col


def other(side: str) -> str:
    return BLACK if side == WHITE else WHITE


@dataclass(frozen=True, slots=True)
class BreakthroughBoard:
    white: int
    black: int
    to_move: str

    def __post_init__(self) -> None:
        if self.white & self.black:
            raise InvalidBoard("overlapping pieces")
        if (self.white | self.black) & ~FULL:
            raise InvalidBoard("piece off the 5x5 board")
        if self.white.bit_count() > 10 or self.black.bit_count() > 10:
            raise InvalidBoard("a side has more than 10 pawns")
        if self.to_move not in (WHITE, BLACK):
            raise InvalidBoard(f"bad side {self.to_move!r}")

    def pieces(self, side: str) -> int:
        return self.white if side == WHITE else self.black


def initial_board() -> BreakthroughBoard:
    return BreakthroughBoard(WHITE_START, BLACK_START, BLACK)


def _move_targets(frm: int, side: str) -> Iterator[tuple[int, bool]]:
    """(target_bit, is_diagonal) for one pawn, ignoring occupancy."""
    row, col = frm // N, frm % N
    nrow = row + 1 if side == WHITE else row - 1
    if not (0 <= nrow < N):
        return
    for ncol in (col - 1, col, col + 1):
        if 0 <= ncol < N:
            yield nrow * N + ncol, ncol != col


def moves(board: BreakthroughBoard) -> list[tuple[int, int, bool]]:
    """Legal (from_bit, to_bit, captures) triples in canonical order."""
    own = board.pieces(board.to_move)
    enemy = board.pieces(other(board.to_move))
    occupied = own | enemy
    out = []
    remaining = own
    while remaining:
        frm = (remaining & -remaining).bit_length() - 1
        remaining &= remaining - 1
        for to, diagonal in _move_targets(frm, board.to_move):
            target = 1 << to
            if diagonal:
                if not (target & own):
                    out.append((frm, to, bool(target & enemy)))
            else:
                if not (target & occupied):
                    out.append((frm, to, False))
    return out


def is_terminal(board: BreakthroughBoard) -> bool:
    return (
        board.white == 0
        or board.black == 0
        or bool(board.white & WHITE_GOAL)
        or bool(board.black & BLACK_GOAL)
    )


def board_winner(board: BreakthroughBoard) -> Optional[str]:
    if board.black == 0 or board.white & WHITE_GOAL:
        return WHITE
    if board.white == 0 or board.black & BLACK_GOAL:
        return BLACK
    return None


def move_action(frm: int, to: int, captures: bool) -> AgentAction:
    code = square_name(frm) + square_name(to)
    return AgentAction(id=code, display=code + ("*" if captures else ""))


def parse_move_code(code: str) -> tuple[int, int]:
    code = code.strip().rstrip("*")
    if len(code) != 4:
        raise IllegalAction(f"bad move code {code!r}")
    return square_bit(code[:2]), square_bit(code[2:])


def legal_actions(board: BreakthroughBoard) -> tuple[AgentAction, ...]:
    if is_terminal(board):
        raise TerminalState("no legal actions in a terminal position")
    return tuple(move_action(f, t, c) for f, t, c in moves(board))


def apply_action(
    board: BreakthroughBoard, act: AgentAction, rng: Optional[random.Random] = None
) -> TransitionRecord:
    if is_terminal(board):
        raise TerminalState("cannot move in a terminal position")
    frm, to = parse_move_code(str(act.id))
    side = board.to_move
    own = board.pieces(side)
    enemy = board.pieces(other(side))
    frm_mask, to_mask = 1 << frm, 1 << to
    legal = {(f, t): c for f, t, c in moves(board)}
    if (frm, to) not in legal:
        raise IllegalAction(f"move {act.id} is not legal here")
    own = (own & ~frm_mask) | to_mask
    enemy &= ~to_mask
    if side == WHITE:
        after = BreakthroughBoard(own, enemy, BLACK)
    else:
        after = BreakthroughBoard(enemy, own, WHITE)
    won = board_winner(after)
    outcome = Outcome(OutcomeKind.WIN, won) if won else None
    return TransitionRecord(
        state_before=board,
        action=AgentAction(id=act.id if isinstance(act.id, str) else str(act.id),
                           display=move_action(frm, to, legal[(frm, to)]).display),
        reward=1.0 if won == side else 0.0,
        state_after=after,
        terminal=outcome is not None,
        outcome=outcome,
    )


def grid_text(board: BreakthroughBoard) -> str:
    rows = []
    for row in range(N, 0, -1):
        cells = []
        for col in range(N):
            bit = 1 << ((row - 1) * N + col)
            cells.append("w" if board.white & bit else "b" if board.black & bit else ".")
        rows.append(f"{row}" + "".join(cells))
    rows.append(" " + FILES)
    return "\n".join(rows)


def _piece_list(mask: int) -> str:
    names = []
    for row in range(N, 0, -1):
        for col in range(N):
            if mask & (1 << ((row - 1) * N + col)):
                names.append(f"{FILES[col]}{row}")
    return ", ".join(names)


def board_text(board: BreakthroughBoard) -> str:
    return (
        f"{grid_text(board)}\n\n"
        f" It is {board.to_move.capitalize()}'s turn.\n"
        f"White pieces are at: {_piece_list(board.white)}.\n"
        f"Black pieces are at: {_piece_list(board.black)}."
    )


def textualize(board: BreakthroughBoard) -> TextObservation:
    legal = () if is_terminal(board) else legal_actions(board)
    return TextObservation(body=board_text(board), legal_actions=legal, mover=board.to_move)


def parse_board(text: str) -> BreakthroughBoard:
    """Rebuild a board from its rendered text (grid rows plus turn line)."""
    white = black = 0
    to_move = None
    for line in text.splitlines():
        stripped = line.strip()
        if stripped[:1].isdigit() and len(stripped) == N + 1:
            row = int(stripped[0])
            for col, ch in enumerate(stripped[1:]):
                bit = 1 << ((row - 1) * N + col)
                if ch == "w":
                    white |= bit
                elif ch == "b":
                    black |= bit
        elif "turn" in stripped:
            to_move = WHITE if "White" in stripped else BLACK
    if to_move is None:
        raise InvalidBoard("no turn line in board text")
    return BreakthroughBoard(white, black, to_move)


def move_sentence(t: TransitionRecord, index: int) -> str:
    side = t.state_before.to_move
    frm, to = parse_move_code(str(t.action.id))
    head = (
        f"Move {index}:{side.capitalize()} moves piece from "
        f"{square_name(frm)} (Column {FILES[frm % N]}, Row {frm // N + 1}) to "
        f"{square_name(to)} (Column {FILES[to % N]}, Row {to // N + 1})"
    )
    if t.action.display.endswith("*"):
        return f"{head}, capturing {other(side).capitalize()} piece."
    return f"{head}."


def describe_transition(t: TransitionRecord) -> str:
    return move_sentence(t, 1)


def describe_move_sequence(transitions) -> str:
    """Action-sequence header plus one numbered sentence per move."""
    codes = ",".join(t.action.display for t in transitions)
    lines = [f"The action sequence is: {codes}."]
    for i, t in enumerate(transitions, start=1):
        lines.append(move_sentence(t, i))
    return "\n".join(lines)


def game_over_sentence(board: BreakthroughBoard) -> str:
    side = board_winner(board)
    if side is None:
        raise InvalidBoard("game is not over")
    return f"The game is over. {side.capitalize()} wins."


register_transition_renderer(EnvKind.BREAKTHROUGH, describe_transition)


class BreakthroughEnv:
    kind = EnvKind.BREAKTHROUGH

    def initial_state(self, rng: Optional[random.Random] = None) -> BreakthroughBoard:
        return initial_board()

    def legal_actions(self, state):
        return legal_actions(state)

    def apply_action(self, state, act, rng=None):
        return apply_action(state, act, rng)

    def textualize(self, state):
        return textualize(state)

    def is_terminal(self, state):
        return is_terminal(state)


def random_playout_winner(
    board: BreakthroughBoard, rng: random.Random, max_plies: int = 200
) -> Optional[str]:
    """Winner of a uniform-random playout, or None if the ply cap is hit.

    Runs on raw masks; used by the win-rate and MCTS oracles where the
    dataclass-per-step cost of apply_action would dominate.
    """
    white, black, side = board.white, board.black, board.to_move
    for _ in range(max_plies):
        if black == 0 or white & WHITE_GOAL:
            return WHITE
        if white == 0 or black & BLACK_GOAL:
            return BLACK
        own, enemy = (white, black) if side == WHITE else (black, white)
        occupied = own | enemy
        choices = []
        remaining = own
        while remaining:
            frm = (remaining & -remaining).bit_length() - 1
            remaining &= remaining - 1
            row, col = frm // N, frm % N
            nrow = row + 1 if side == WHITE else row - 1
            if not (0 <= nrow < N):
                continue
            base = nrow * N
            for ncol in (col - 1, col, col + 1):
                if 0 <= ncol < N:
                    target = 1 << (base + ncol)
                    if ncol != col:
                        if not (target & own):
                            choices.append((frm, base + ncol))
                    elif not (target & occupied):
                        choices.append((frm, base + ncol))
        if not choices:
            return None  # stalemate cannot occur with legal pawns, guard anyway
        frm, to = choices[rng.randrange(len(choices))]
        own = (own & ~(1 << frm)) | (1 << to)
        enemy &= ~(1 << to)
        if side == WHITE:
            white, black = own, enemy
        else:
            white, black = enemy, own
        side = other(side)
    return None
