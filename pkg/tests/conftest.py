import random

import pytest


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)


def random_tictactoe_board(rng, plies=None):
    """A legal mid-game position reached by random play (never terminal)."""
    from langrl.envs import tictactoe as ttt

    while True:
        board = ttt.initial_board()
        target = rng.randrange(0, 7) if plies is None else plies
        ok = True
        for _ in range(target):
            if ttt.is_terminal(board):
                ok = False
                break
            legal = ttt.legal_actions(board)
            board = ttt.apply_action(board, legal[rng.randrange(len(legal))]).state_after
        if ok and not ttt.is_terminal(board):
            return board
