"""Scalar ground truth for validating the language pipelines.

Three oracles: exhaustive memoized minimax for tic-tac-toe, Monte-Carlo
win-rate labeling for arbitrary two-player positions, and UCT-style MCTS
with random-playout leaf evaluation.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from typing import Optional

from langrl.core import (
    AgentAction,
    Outcome,
    OutcomeKind,
    TerminalState,
    action_sort_key,
)
from langrl.envs import breakthrough as bt
from langrl.envs import tictactoe as ttt
from langrl.envs.base import TextMdp
from langrl.envs.opponents import OpponentKind, OpponentPolicy, opponent_move


class NonterminatingGame(RuntimeError):
    pass


# --- tic-tac-toe minimax --------------------------------------------------------------

@dataclass(frozen=True)
class MinimaxResult:
    """Game value from the mover's perspective plus every optimal action."""

    value: int  # -1, 0, +1
    optimal_actions: frozenset[int]


_MEMO: dict[tuple[tuple[str, ...], str], tuple[int, int]] = {}


def _negamax(cells: tuple[str, ...], to_move: str) -> tuple[int, int]:
    """(value, plies) from the mover's perspective, fast wins / slow losses."""
    key = (cells, to_move)
    hit = _MEMO.get(key)
    if hit is not None:
        return hit
    win = ttt.winner(cells)
    if win is not None:
        result = (-1, 0)  # previous mover won
    elif "" not in cells:
        result = (0, 0)
    else:
        best: Optional[tuple[int, int]] = None
        nxt = ttt.other(to_move)
        for i, c in enumerate(cells):
            if c != "":
                continue
            child = cells[:i] + (to_move,) + cells[i + 1:]
            v, d = _negamax(child, nxt)
            cand = (-v, d + 1)
            if best is None or _pref_key(cand) > _pref_key(best):
                best = cand
        result = best  # type: ignore[assignment]
    _MEMO[key] = result
    return result


def _pref_key(vd: tuple[int, int]) -> tuple[int, int]:
    v, d = vd
    return (v, -d) if v > 0 else (v, d)


def minimax(board: ttt.TicTacToeBoard) -> MinimaxResult:
    """Exact value of a tic-tac-toe position, memoized over all reachable states."""
    if ttt.is_terminal(board):
        v, _ = _negamax(board.cells, board.to_move)
        return MinimaxResult(value=v, optimal_actions=frozenset())
    best_v = -2
    per_action: dict[int, tuple[int, int]] = {}
    for act in ttt.legal_actions(board):
        i = int(act.id) - 1
        child = board.cells[:i] + (board.to_move,) + board.cells[i + 1:]
        v, d = _negamax(child, ttt.other(board.to_move))
        per_action[int(act.id)] = (-v, d + 1)
        best_v = max(best_v, -v)
    optimal = frozenset(a for a, (v, _) in per_action.items() if v == best_v)
    return MinimaxResult(value=best_v, optimal_actions=optimal)


def minimax_preferred_action(board: ttt.TicTacToeBoard) -> int:
    """Deterministic optimal move: fastest win, else longest resistance, lowest id."""
    best: Optional[tuple[tuple[int, int], int]] = None
    for act in ttt.legal_actions(board):
        i = int(act.id) - 1
        child = board.cells[:i] + (board.to_move,) + board.cells[i + 1:]
        v, d = _negamax(child, ttt.other(board.to_move))
        key = (_pref_key((-v, d + 1)), -int(act.id))
        if best is None or key > best[0]:
            best = (key, int(act.id))
    assert best is not None
    return best[1]


# --- Monte-Carlo win-rate labeling ----------------------------------------------------

@dataclass(frozen=True)
class MctsConfig:
    uct_c: float = 1.0
    simulations: int = 1000
    rollouts_per_eval: int = 1
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if self.uct_c <= 0 or self.simulations <= 0 or self.rollouts_per_eval <= 0:
            raise ValueError("MCTS parameters must be positive")


@dataclass(frozen=True)
class AdvantageLabel:
    """Which side a position favors, by Monte-Carlo win rate against a threshold."""

    side: str  # first side's name, second side's name, or "none"
    winrate_white: float
    n_rollouts: int
    threshold: float


def _game_winner(env: TextMdp, state, policies: dict, rng: random.Random,
                 step_cap: int) -> Optional[str]:
    current = state
    for _ in range(step_cap):
        if env.is_terminal(current):
            break
        obs_mover = getattr(current, "to_move")
        act = opponent_move(policies[obs_mover], env, current, rng)
        record = env.apply_action(current, act, rng)
        current = record.state_after
        if record.terminal:
            out = record.outcome
            return out.side if out is not None and out.kind is OutcomeKind.WIN else None
    else:
        return None  # hit the cap: no win for either side
    # state was terminal on entry
    if isinstance(current, bt.BreakthroughBoard):
        return bt.board_winner(current)
    if isinstance(current, ttt.TicTacToeBoard):
        return ttt.winner(current.cells)
    return None


def mc_winrate(
    env: TextMdp,
    state,
    policy_pair: dict,
    n_rollouts: int,
    rng: random.Random,
    threshold: float = 0.55,
    step_cap: int = 200,
    sides: tuple[str, str] = (bt.WHITE, bt.BLACK),
) -> AdvantageLabel:
    """Label a position by playing it out ``n_rollouts`` times.

    ``policy_pair`` maps each side name to its OpponentPolicy. The first
    entry of ``sides`` is the one whose win rate the label reports.
    """
    if n_rollouts < 1:
        raise ValueError("n_rollouts must be >= 1")
    first, second = sides
    both_random = all(
        p.kind is OpponentKind.UNIFORM_RANDOM for p in policy_pair.values()
    )
    wins_first = 0
    wins_second = 0
    for _ in range(n_rollouts):
        if isinstance(state, bt.BreakthroughBoard) and both_random:
            win = bt.random_playout_winner(state, rng, max_plies=step_cap)
        else:
            win = _game_winner(env, state, policy_pair, rng, step_cap)
        if win == first:
            wins_first += 1
        elif win == second:
            wins_second += 1
    rate_first = wins_first / n_rollouts
    rate_second = wins_second / n_rollouts
    if rate_first > threshold:
        side = first
    elif rate_second > threshold:
        side = second
    else:
        side = "none"
    return AdvantageLabel(
        side=side, winrate_white=rate_first, n_rollouts=n_rollouts, threshold=threshold
    )


def label_to_record(label: AdvantageLabel, state_text: str) -> dict:
    return {
        "state_text": state_text,
        "winrate_white": label.winrate_white,
        "n_rollouts": label.n_rollouts,
        "threshold": label.threshold,
        "side": label.side,
    }


def write_labels_jsonl(path, rows: list[dict]) -> None:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def read_labels_jsonl(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


# --- UCT MCTS ------------------------------------------------------------------------

class _Node:
    __slots__ = ("state", "mover", "visits", "wins", "children", "untried")

    def __init__(self, state, env: TextMdp):
        self.state = state
        self.mover = getattr(state, "to_move", None)
        self.visits = 0
        self.wins = 0.0  # from the perspective of the player who moved into this node
        self.children: list[tuple[AgentAction, _Node]] = []
        self.untried = (
            [] if env.is_terminal(state)
            else sorted(env.legal_actions(state), key=action_sort_key)
        )


def _playout_value(env: TextMdp, state, side: str, rng: random.Random,
                   rollouts: int) -> float:
    """Mean playout reward for ``side``: win 1, draw/cap 0.5, loss 0."""
    total = 0.0
    for _ in range(rollouts):
        if isinstance(state, bt.BreakthroughBoard):
            win = bt.random_playout_winner(state, rng)
        else:
            win = _random_game_winner(env, state, rng)
        total += 1.0 if win == side else 0.5 if win is None else 0.0
    return total / rollouts


def _random_game_winner(env: TextMdp, state, rng: random.Random) -> Optional[str]:
    current = state
    for _ in range(200):
        if env.is_terminal(current):
            break
        legal = env.legal_actions(current)
        record = env.apply_action(current, legal[rng.randrange(len(legal))], rng)
        current = record.state_after
        if record.terminal:
            out = record.outcome
            return out.side if out is not None and out.kind is OutcomeKind.WIN else None
    if isinstance(current, ttt.TicTacToeBoard):
        return ttt.winner(current.cells)
    if isinstance(current, bt.BreakthroughBoard):
        return bt.board_winner(current)
    return None


def _terminal_value_for(state, side: str) -> float:
    if isinstance(state, ttt.TicTacToeBoard):
        win = ttt.winner(state.cells)
    elif isinstance(state, bt.BreakthroughBoard):
        win = bt.board_winner(state)
    else:
        win = None
    return 1.0 if win == side else 0.5 if win is None else 0.0


def mcts_select(
    env: TextMdp, state, cfg: MctsConfig, rng: random.Random
) -> AgentAction:
    """UCT search from ``state``; returns the most-visited root move.

    Leaf positions are scored by ``cfg.rollouts_per_eval`` uniform-random
    playouts. Visit-count ties break toward the lowest action id.
    """
    if env.is_terminal(state):
        raise TerminalState("cannot search from a terminal state")
    root = _Node(state, env)
    for _ in range(cfg.simulations):
        node = root
        path = [root]
        # selection
        while not node.untried and node.children:
            log_n = math.log(node.visits)
            best, best_score = None, -1.0
            for _, child in node.children:
                score = child.wins / child.visits + cfg.uct_c * math.sqrt(
                    log_n / child.visits
                )
                if score > best_score:
                    best, best_score = child, score
            node = best  # type: ignore[assignment]
            path.append(node)
        # expansion
        if node.untried:
            act = node.untried.pop(0)
            record = env.apply_action(node.state, act, rng)
            child = _Node(record.state_after, env)
            node.children.append((act, child))
            node = child
            path.append(node)
        # evaluation, from the perspective of the player who moved into `node`
        mover_into = path[-2].mover if len(path) >= 2 else root.mover
        if env.is_terminal(node.state):
            value = _terminal_value_for(node.state, mover_into)
        else:
            value = _playout_value(env, node.state, mover_into, rng,
                                   cfg.rollouts_per_eval)
        # backpropagation: flip the reward as perspective alternates up the path
        for depth, n in enumerate(reversed(path)):
            n.visits += 1
            n.wins += value if depth % 2 == 0 else 1.0 - value
    max_visits = max(child.visits for _, child in root.children)
    winners = [act for act, child in root.children if child.visits == max_visits]
    return min(winners, key=action_sort_key)
