"""Mixed-strength Breakthrough state datasets from policy-pair self-play.

A grid of MCTS configurations (simulations x rollouts) defines the
policy pool; every ordered pair plays a fixed number of games and all
visited positions are recorded. Dedup is by rendered board text, and the
train/test split hashes that text so membership is stable across runs.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Sequence

from langrl.envs import breakthrough as bt
from langrl.envs.breakthrough import BreakthroughEnv
from langrl.envs.opponents import OpponentKind, OpponentPolicy, opponent_move
from langrl.oracles import MctsConfig


@dataclass(frozen=True)
class StateDataset:
    train: tuple[bt.BreakthroughBoard, ...]
    test: tuple[bt.BreakthroughBoard, ...]

    def __len__(self) -> int:
        return len(self.train) + len(self.test)


def _split_key(board: bt.BreakthroughBoard) -> float:
    digest = hashlib.sha256(bt.board_text(board).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def policy_grid(sim_grid: Sequence[int], rollout_grid: Sequence[int]) -> list[MctsConfig]:
    return [
        MctsConfig(uct_c=1.0, simulations=s, rollouts_per_eval=r)
        for s in sim_grid
        for r in rollout_grid
    ]


def build_state_dataset(
    sim_grid: Sequence[int],
    rollout_grid: Sequence[int],
    games_per_pair: int,
    seed: int = 0,
    train_fraction: float = 0.85,
    max_plies: int = 100,
) -> StateDataset:
    """All states visited by every ordered policy pair, split by state hash."""
    if not sim_grid or not rollout_grid:
        raise ValueError("policy grids must be non-empty")
    env = BreakthroughEnv()
    policies = policy_grid(sim_grid, rollout_grid)
    seen: dict[str, bt.BreakthroughBoard] = {}
    order: list[str] = []
    for i, black_cfg in enumerate(policies):
        for j, white_cfg in enumerate(policies):
            for g in range(games_per_pair):
                rng = random.Random(f"{seed}:{i}:{j}:{g}")
                sides = {
                    bt.BLACK: OpponentPolicy(OpponentKind.MCTS, mcts_config=black_cfg),
                    bt.WHITE: OpponentPolicy(OpponentKind.MCTS, mcts_config=white_cfg),
                }
                board = env.initial_state()
                for _ in range(max_plies):
                    if env.is_terminal(board):
                        break
                    key = bt.board_text(board)
                    if key not in seen:
                        seen[key] = board
                        order.append(key)
                    act = opponent_move(sides[board.to_move], env, board, rng)
                    board = env.apply_action(board, act, rng).state_after
    train, test = [], []
    for key in order:
        board = seen[key]
        (train if _split_key(board) < train_fraction else test).append(board)
    return StateDataset(train=tuple(train), test=tuple(test))
