"""Scripted opponents: deterministic first-available, uniform random, MCTS."""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from langrl.core import AgentAction, TerminalState
from langrl.envs.base import TextMdp


class OpponentKind(str, Enum):
    FIRST_AVAILABLE = "first_available"
    UNIFORM_RANDOM = "uniform_random"
    MCTS = "mcts"


@dataclass(frozen=True)
class OpponentPolicy:
    kind: OpponentKind = OpponentKind.UNIFORM_RANDOM
    seed: Optional[int] = None
    mcts_config: Optional[object] = None  # oracles.MctsConfig when kind is MCTS

    def make_rng(self) -> random.Random:
        return random.Random(self.seed)


def opponent_move(
    policy: OpponentPolicy, env: TextMdp, state, rng: random.Random
) -> AgentAction:
    """Pick the opponent's move. first_available is the lowest-indexed legal action."""
    if env.is_terminal(state):
        raise TerminalState("opponent cannot move in a terminal state")
    legal = env.legal_actions(state)
    if policy.kind is OpponentKind.FIRST_AVAILABLE:
        return legal[0]
    if policy.kind is OpponentKind.UNIFORM_RANDOM:
        return legal[rng.randrange(len(legal))]
    if policy.kind is OpponentKind.MCTS:
        from langrl.oracles import mcts_select

        if policy.mcts_config is None:
            raise ValueError("MCTS opponent requires mcts_config")
        return mcts_select(env, state, policy.mcts_config, rng)
    raise ValueError(f"unknown opponent kind {policy.kind!r}")
