import math
import random
from functools import lru_cache

import pytest

from langrl.core import TerminalState
from langrl.envs import breakthrough as bt
from langrl.envs import tictactoe as ttt
from langrl.envs.breakthrough import BreakthroughEnv
from langrl.envs.opponents import OpponentKind, OpponentPolicy
from langrl.envs.tictactoe import TicTacToeEnv
from langrl.oracles import (
    AdvantageLabel,
    MctsConfig,
    mc_winrate,
    mcts_select,
    minimax,
    minimax_preferred_action,
)
from tests.conftest import random_tictactoe_board

LINES = [
    (0, 1, 2), (3, 4, 5), (6, 7, 8),
    (0, 3, 6), (1, 4, 7), (2, 5, 8),
    (0, 4, 8), (2, 4, 6),
]


def _won(cells, side):
    return any(all(cells[i] == side for i in line) for line in LINES)


@lru_cache(maxsize=None)
def reference_negamax(cells: tuple, to_move: str) -> int:
    """Second, separately written solver used only to cross-check values."""
    opponent = "X" if to_move == "O" else "O"
    if _won(cells, opponent):
        return -1
    if "" not in cells:
        return 0
    best = -2
    for i, mark in enumerate(cells):
        if mark:
            continue
        child = cells[:i] + (to_move,) + cells[i + 1:]
        best = max(best, -reference_negamax(child, opponent))
    return best


@lru_cache(maxsize=None)
def random_play_win_probability(cells: tuple, to_move: str, side: str) -> float:
    """Exact probability that ``side`` wins when both players move uniformly."""
    opponent = "X" if to_move == "O" else "O"
    if _won(cells, opponent):
        return 1.0 if opponent == side else 0.0
    if "" not in cells:
        return 0.0
    empties = [i for i, mark in enumerate(cells) if not mark]
    total = 0.0
    for i in empties:
        child = cells[:i] + (to_move,) + cells[i + 1:]
        total += random_play_win_probability(child, opponent, side)
    return total / len(empties)


def test_empty_board_is_a_draw():
    result = minimax(ttt.initial_board())
    assert result.value == 0
    assert result.optimal_actions == frozenset(range(1, 10))


def test_forced_win_with_double_threat():
    cells = ["", "X", "", "", "O", "", "", "X", ""]
    cells[0] = "O"
    board = ttt.TicTacToeBoard(tuple(cells), "O")
    result = minimax(board)
    assert result.value == 1
    assert 9 in result.optimal_actions


def test_terminal_boards_have_unit_value_and_no_actions():
    won = ttt.TicTacToeBoard(("O", "O", "O", "X", "X", "", "", "", ""), "X")
    result = minimax(won)
    assert abs(result.value) == 1
    assert result.optimal_actions == frozenset()


def test_minimax_agrees_with_reference_negamax(rng):
    for _ in range(1000):
        board = random_tictactoe_board(rng)
        assert minimax(board).value == reference_negamax(board.cells, board.to_move)


def test_minimax_antisymmetric_under_side_swap(rng):
    swap = {"O": "X", "X": "O", "": ""}
    for _ in range(300):
        board = random_tictactoe_board(rng)
        mirrored = ttt.TicTacToeBoard(
            tuple(swap[c] for c in board.cells), swap[board.to_move]
        )
        assert minimax(board).value == minimax(mirrored).value * 1  # same mover view
        # swapping marks and mover flips which *side* wins but not the value
        # sign seen by the player to move; check the sign flip explicitly:
        assert minimax(board).value == -(-minimax(mirrored).value)


def test_preferred_action_is_always_optimal(rng):
    for _ in range(200):
        board = random_tictactoe_board(rng)
        assert minimax_preferred_action(board) in minimax(board).optimal_actions


def test_mc_winrate_terminal_black_won():
    white = 1 << bt.square_bit("e4")
    black = 1 << bt.square_bit("a1")
    board = bt.BreakthroughBoard(white, black, bt.WHITE)
    policies = {
        bt.WHITE: OpponentPolicy(OpponentKind.UNIFORM_RANDOM),
        bt.BLACK: OpponentPolicy(OpponentKind.UNIFORM_RANDOM),
    }
    label = mc_winrate(BreakthroughEnv(), board, policies, 50, random.Random(0))
    assert label.winrate_white == 0.0
    assert label.side == bt.BLACK


def test_mc_winrate_one_ply_forced_win():
    # Black b2 can reach row 1 immediately whatever White does; verify the
    # forced win by enumeration first, then check the label.
    black = (1 << bt.square_bit("b2")) | (1 << bt.square_bit("e5"))
    white = 1 << bt.square_bit("e2")
    board = bt.BreakthroughBoard(white, black, bt.BLACK)
    winning = [a for a in bt.legal_actions(board)
               if bt.apply_action(board, a).terminal]
    assert winning, "position must have an immediate winning move"
    policies = {
        bt.WHITE: OpponentPolicy(OpponentKind.UNIFORM_RANDOM),
        bt.BLACK: OpponentPolicy(OpponentKind.UNIFORM_RANDOM),
    }
    label = mc_winrate(
        BreakthroughEnv(), board, policies, 1000, random.Random(1), threshold=0.55
    )
    # Not every random playout wins instantly, but black dominates.
    assert label.side == bt.BLACK


def test_mc_winrate_none_band_with_high_threshold():
    env = TicTacToeEnv()
    policies = {
        "O": OpponentPolicy(OpponentKind.UNIFORM_RANDOM),
        "X": OpponentPolicy(OpponentKind.UNIFORM_RANDOM),
    }
    label = mc_winrate(
        env, ttt.initial_board(), policies, 2000, random.Random(3),
        threshold=0.95, sides=("O", "X"),
    )
    assert label.side == "none"


def test_mc_winrate_close_to_exact_probability(rng):
    env = TicTacToeEnv()
    policies = {
        "O": OpponentPolicy(OpponentKind.UNIFORM_RANDOM),
        "X": OpponentPolicy(OpponentKind.UNIFORM_RANDOM),
    }
    for _ in range(5):
        board = random_tictactoe_board(rng, plies=2)
        p = random_play_win_probability(board.cells, board.to_move, "O")
        n = 1500
        label = mc_winrate(env, board, policies, n, rng, sides=("O", "X"))
        bound = 4 * math.sqrt(max(p * (1 - p), 1e-9) / n)
        assert abs(label.winrate_white - p) < max(bound, 0.01)


def test_mc_winrate_rejects_zero_rollouts(rng):
    env = TicTacToeEnv()
    with pytest.raises(ValueError):
        mc_winrate(env, ttt.initial_board(), {}, 0, rng)


def test_mcts_finds_immediate_win(rng):
    env = TicTacToeEnv()
    cells = ["O", "X", "", "", "O", "", "", "X", ""]
    board = ttt.TicTacToeBoard(tuple(cells), "O")
    cfg = MctsConfig(simulations=1000, rollouts_per_eval=1)
    act = mcts_select(env, board, cfg, rng)
    assert act.id in minimax(board).optimal_actions


def test_mcts_tiny_budget_returns_legal(rng):
    env = TicTacToeEnv()
    board = ttt.initial_board()
    cfg = MctsConfig(simulations=2, rollouts_per_eval=1)
    act = mcts_select(env, board, cfg, rng)
    assert act.id in {a.id for a in ttt.legal_actions(board)}


def test_mcts_breakthrough_takes_the_winning_move(rng):
    black = (1 << bt.square_bit("b2")) | (1 << bt.square_bit("e5"))
    white = (1 << bt.square_bit("e2")) | (1 << bt.square_bit("a1"))
    board = bt.BreakthroughBoard(white, black, bt.BLACK)
    winning = {
        str(a.id) for a in bt.legal_actions(board)
        if bt.apply_action(board, a).terminal
    }
    assert winning
    act = mcts_select(BreakthroughEnv(), board, MctsConfig(simulations=1000), rng)
    assert str(act.id) in winning


def test_mcts_visit_ties_break_to_lowest_id(rng):
    env = TicTacToeEnv()
    board = ttt.initial_board()
    # With exactly one simulation per child, every child has one visit.
    cfg = MctsConfig(simulations=9, rollouts_per_eval=1)
    act = mcts_select(env, board, cfg, rng)
    assert act.id == 1


def test_mcts_rejects_terminal(rng):
    env = TicTacToeEnv()
    done = ttt.TicTacToeBoard(("O",) * 3 + ("X", "X", "") + ("",) * 3, "X")
    with pytest.raises(TerminalState):
        mcts_select(env, done, MctsConfig(simulations=10), rng)


def test_mcts_config_validation():
    with pytest.raises(ValueError):
        MctsConfig(simulations=0)
    with pytest.raises(ValueError):
        MctsConfig(uct_c=-1)


def test_advantage_label_threshold_rule(rng):
    env = TicTacToeEnv()
    policies = {
        "O": OpponentPolicy(OpponentKind.UNIFORM_RANDOM),
        "X": OpponentPolicy(OpponentKind.UNIFORM_RANDOM),
    }
    label = mc_winrate(env, ttt.initial_board(), policies, 800, rng,
                       threshold=0.55, sides=("O", "X"))
    if label.side == "O":
        assert label.winrate_white > 0.55
    elif label.side == "none":
        assert label.winrate_white <= 0.55
