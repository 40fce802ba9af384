"""Concrete text-MDPs and scripted opponents."""

from langrl.envs.base import TextMdp, rollout
from langrl.envs.breakthrough import BreakthroughBoard, BreakthroughEnv
from langrl.envs.frozenlake import FrozenLakeEnv, FrozenLakeGrid
from langrl.envs.maze import MazeEnv, MazeLayout, MazeWorld, load_layout
from langrl.envs.opponents import OpponentKind, OpponentPolicy, opponent_move
from langrl.envs.tictactoe import TicTacToeBoard, TicTacToeEnv

__all__ = [
    "TextMdp",
    "rollout",
    "BreakthroughBoard",
    "BreakthroughEnv",
    "FrozenLakeEnv",
    "FrozenLakeGrid",
    "MazeEnv",
    "MazeLayout",
    "MazeWorld",
    "load_layout",
    "OpponentKind",
    "OpponentPolicy",
    "opponent_move",
    "TicTacToeBoard",
    "TicTacToeEnv",
]
