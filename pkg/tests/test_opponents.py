import random

import pytest

from langrl.core import TerminalState
from langrl.envs import tictactoe as ttt
from langrl.envs.opponents import OpponentKind, OpponentPolicy, opponent_move
from langrl.envs.tictactoe import TicTacToeEnv
from langrl.oracles import MctsConfig, minimax


def test_first_available_picks_lowest_index():
    env = TicTacToeEnv()
    policy = OpponentPolicy(OpponentKind.FIRST_AVAILABLE)
    board = ttt.initial_board()
    assert opponent_move(policy, env, board, random.Random(0)).id == 1
    # deterministic across calls and rngs
    assert opponent_move(policy, env, board, random.Random(99)).id == 1


def test_first_available_singleton():
    cells = ["O", "X", "O", "X", "O", "X", "X", "O", ""]
    board = ttt.TicTacToeBoard(tuple(cells), "X")
    env = TicTacToeEnv()
    policy = OpponentPolicy(OpponentKind.FIRST_AVAILABLE)
    assert opponent_move(policy, env, board, random.Random(0)).id == 9


def test_uniform_random_frequencies():
    # Two legal cells left; each should be chosen about half the time.
    cells = ["O", "X", "O", "X", "O", "X", "X", "", ""]
    board = ttt.TicTacToeBoard(tuple(cells), "O")
    env = TicTacToeEnv()
    policy = OpponentPolicy(OpponentKind.UNIFORM_RANDOM)
    rng = random.Random(5)
    n = 10_000
    picks = sum(
        1 for _ in range(n) if opponent_move(policy, env, board, rng).id == 8
    )
    assert abs(picks / n - 0.5) < 0.02


def test_mcts_opponent_delegates(rng):
    env = TicTacToeEnv()
    cells = ["O", "X", "", "", "O", "", "", "X", ""]
    board = ttt.TicTacToeBoard(tuple(cells), "O")
    policy = OpponentPolicy(
        OpponentKind.MCTS, mcts_config=MctsConfig(simulations=300, rollouts_per_eval=1)
    )
    act = opponent_move(policy, env, board, rng)
    assert act.id in minimax(board).optimal_actions


def test_mcts_opponent_requires_config(rng):
    env = TicTacToeEnv()
    with pytest.raises(ValueError):
        opponent_move(
            OpponentPolicy(OpponentKind.MCTS), env, ttt.initial_board(), rng
        )


def test_terminal_state_raises(rng):
    env = TicTacToeEnv()
    done = ttt.TicTacToeBoard(("O",) * 3 + ("X", "X", "") + ("",) * 3, "X")
    with pytest.raises(TerminalState):
        opponent_move(OpponentPolicy(OpponentKind.FIRST_AVAILABLE), env, done, rng)
