import random

import pytest

from langrl.core import OutcomeKind, TerminalState, IllegalAction
from langrl.envs import tictactoe as ttt
from tests.conftest import random_tictactoe_board


def independent_reachable_count() -> int:
    """Count legal positions by validity rules over all 3^9 mark patterns.

    Completely separate from the game engine: a pattern is reachable in
    play (with O first) iff mark counts are consistent, at most one side
    has a line, and the winner's count matches having just moved.
    """
    import itertools

    count = 0
    lines = [
        (0, 1, 2), (3, 4, 5), (6, 7, 8),
        (0, 3, 6), (1, 4, 7), (2, 5, 8),
        (0, 4, 8), (2, 4, 6),
    ]
    for cells in itertools.product("OX.", repeat=9):
        n_o = cells.count("O")
        n_x = cells.count("X")
        if n_o - n_x not in (0, 1):
            continue
        o_wins = any(all(cells[i] == "O" for i in line) for line in lines)
        x_wins = any(all(cells[i] == "X" for i in line) for line in lines)
        if o_wins and x_wins:
            continue
        if o_wins and n_o != n_x + 1:
            continue
        if x_wins and n_o != n_x:
            continue
        count += 1
    return count


def bfs_reachable_count() -> int:
    """Count positions by forward search through the environment itself."""
    start = ttt.initial_board()
    seen = {start.cells}
    frontier = [start]
    while frontier:
        board = frontier.pop()
        if ttt.is_terminal(board):
            continue
        for act in ttt.legal_actions(board):
            child = ttt.apply_action(board, act).state_after
            if child.cells not in seen:
                seen.add(child.cells)
                frontier.append(child)
    return len(seen)


def test_empty_board_has_nine_actions():
    assert len(ttt.legal_actions(ttt.initial_board())) == 9


def test_board_text_matches_convention():
    board = ttt.apply_action(ttt.initial_board(), ttt.action(1)).state_after
    board = ttt.apply_action(board, ttt.action(2)).state_after
    assert ttt.board_text(board) == (
        "O | X | 3\n---------\n4 | 5 | 6\n---------\n7 | 8 | 9"
    )


def test_center_move():
    record = ttt.apply_action(ttt.initial_board(), ttt.action(5))
    assert record.state_after.cells[4] == "O"
    assert record.state_after.to_move == "X"
    assert record.reward == 0.0
    assert not record.terminal


def test_win_by_1_5_9():
    cells = ["", "X", "", "", "", "", "", "X", ""]
    cells[0] = "O"
    cells[4] = "O"
    board = ttt.TicTacToeBoard(tuple(cells), "O")
    record = ttt.apply_action(board, ttt.action(9))
    assert record.terminal
    assert record.outcome.kind is OutcomeKind.WIN
    assert record.outcome.side == "O"
    assert record.reward == 1.0
    sentence = ttt.game_over_sentence(record.state_after)
    assert sentence == (
        "The game is over. O wins. O wins by occupying the positions [1, 5, 9]."
    )


def test_transition_description_form():
    cells = ("O", "X", "", "", "O", "", "", "X", "")
    board = ttt.TicTacToeBoard(cells, "O")
    record = ttt.apply_action(board, ttt.action(9))
    text = ttt.describe_transition(record)
    assert text.startswith("After O taking action 9, the board position is:\n")
    assert text.endswith("7 | X | O.")


def test_reachable_state_count_matches_independent_enumerator():
    assert bfs_reachable_count() == independent_reachable_count()


def test_illegal_and_terminal_moves_rejected():
    board = ttt.apply_action(ttt.initial_board(), ttt.action(5)).state_after
    with pytest.raises(IllegalAction):
        ttt.apply_action(board, ttt.action(5))
    done = ttt.TicTacToeBoard(("O",) * 3 + ("X", "X", "") + ("",) * 3, "X")
    with pytest.raises(TerminalState):
        ttt.legal_actions(done)
    with pytest.raises(TerminalState):
        ttt.apply_action(done, ttt.action(9))


def test_board_invariants_enforced():
    with pytest.raises(ttt.InvalidBoard):
        ttt.TicTacToeBoard(("O", "O", "O", "", "", "", "", "", ""), "X")  # 3-0 counts
    with pytest.raises(ttt.InvalidBoard):
        ttt.TicTacToeBoard(("O", "", "", "", "", "", "", "", ""), "O")  # O again
    both = ("O", "O", "O", "X", "X", "X", "", "", "")
    with pytest.raises(ttt.InvalidBoard):
        ttt.TicTacToeBoard(both, "O")


def test_textualize_reparse_roundtrip(rng):
    for _ in range(100):
        board = random_tictactoe_board(rng)
        obs = ttt.textualize(board)
        again = ttt.parse_board(obs.body, obs.mover)
        assert again == board
        for act in obs.legal_actions:
            assert str(act.id) == act.display


def test_alternate_first_mover_supported():
    board = ttt.initial_board("X")
    record = ttt.apply_action(board, ttt.action(1))
    assert record.state_after.cells[0] == "X"
    assert record.state_after.to_move == "O"
