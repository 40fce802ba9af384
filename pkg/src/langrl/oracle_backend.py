"""Deterministic scripted backend answering the engine's own prompts.

Exists purely to make pipeline logic assertable without a live model:
replies are minimal well-formed JSON (or tagged text for the advantage
format) derived from exact oracles - minimax for tic-tac-toe, BFS
distances for FrozenLake and mazes, Monte-Carlo win rates (or a provided
label table) for Breakthrough. Every reply is a pure function of the
prompt text, so record/replay and resumability tests can treat this
backend like a frozen model.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
from typing import Optional, Sequence

from langrl.backends import Backend, CompletionResult, MalformedResponse, request_digest
from langrl.core import EnvKind
from langrl.envs import breakthrough as bt
from langrl.envs import frozenlake as fl
from langrl.envs import maze as mz
from langrl.envs import tictactoe as ttt
from langrl.envs.opponents import OpponentKind, OpponentPolicy
from langrl.oracles import mc_winrate, minimax, minimax_preferred_action


def _verdict_for_o(board: ttt.TicTacToeBoard) -> float:
    """Game value of a position from O's perspective."""
    win = ttt.winner(board.cells)
    if win is not None:
        return 1.0 if win == "O" else -1.0
    if ttt.is_terminal(board):
        return 0.0
    value = minimax(board).value
    return float(value if board.to_move == "O" else -value)


_TTT_BOARD_INFERENCE = re.compile(
    r"next player is (O|X):\n(.*?)\. The available move positions", re.DOTALL
)
_TTT_BOARD_IMPROVE = re.compile(
    r"next player is (O|X):\n(.*?)\. The possible moves are \[(.*?)\]", re.DOTALL
)
_TTT_BOARD_EVAL = re.compile(
    r"evaluate is (O|X)'s turn:\nBoard:\n(.*?)\nAction: The (?:O|X)'s move is (\d+)",
    re.DOTALL,
)
_TTT_BOARD_TD = re.compile(
    r"evaluate is (O|X)'s turn:\nBoard:\n(.*?)\n\nHere are the look-ahead", re.DOTALL
)
_FL_GRID = re.compile(r"(?:Board:|board position:)\n((?:[_OGPX√]{4}\n?){4})")
_FL_ACTION = re.compile(r"The next move is (\d+)")
_MAZE_CONTENT = re.compile(r"```\n(.*?)\n```", re.DOTALL)
_POSITION = re.compile(r"Your current position is at position (\d+), (\d+)\.")
_EVAL_NUMBER = re.compile(r'"final_evaluation": (-?\d+(?:\.\d+)?)')
_TAG = re.compile(r"<(white|black)>")


class OracleBackend(Backend):
    """Scripted replies for one environment's template family."""

    backend_id = "oracle"

    def __init__(
        self,
        env_kind: EnvKind,
        maze_layout: Optional[mz.MazeLayout] = None,
        advantage_labels: Optional[dict[str, str]] = None,
        winrate_rollouts: int = 64,
        winrate_threshold: float = 0.55,
    ):
        self.env_kind = EnvKind(env_kind)
        self.maze_layout = maze_layout
        self.advantage_labels = advantage_labels or {}
        self.winrate_rollouts = winrate_rollouts
        self.winrate_threshold = winrate_threshold

    # -- entry point --------------------------------------------------------------

    def complete(self, turns, params) -> CompletionResult:
        user = next((t.content for t in reversed(turns) if t.role == "user"), "")
        handlers = {
            EnvKind.TIC_TAC_TOE: self._tictactoe,
            EnvKind.FROZEN_LAKE: self._frozenlake,
            EnvKind.BREAKTHROUGH: self._breakthrough,
            EnvKind.MAZE: self._maze,
        }
        text = handlers[self.env_kind](user)
        if text is None:
            raise MalformedResponse(
                f"oracle backend cannot answer this {self.env_kind.value} prompt"
            )
        return CompletionResult(
            text=text, backend_id=self.backend_id, cached=False, latency=0.0
        )

    # -- tic-tac-toe ---------------------------------------------------------------

    def _tictactoe(self, user: str) -> Optional[str]:
        match = _TTT_BOARD_IMPROVE.search(user)
        if match and "Evaluation for taking action" in user:
            side, board_txt, moves_txt = match.groups()
            board = ttt.parse_board(board_txt, side)
            moves = [int(m.strip()) for m in moves_txt.split(",") if m.strip()]
            best = self._best_candidate(board, moves)
            thought = (
                f"Comparing the evaluations of the possible moves {moves}, "
                f"move {best} has the most favorable evaluation for {side}."
            )
            return json.dumps({"thought": thought, "best_move": best})
        match = _TTT_BOARD_INFERENCE.search(user)
        if match:
            side, board_txt = match.groups()
            board = ttt.parse_board(board_txt, side)
            best = minimax_preferred_action(board)
            thought = f"The best move for {side} is position {best}."
            return json.dumps({"thought": thought, "best_move": best})
        match = _TTT_BOARD_TD.search(user)
        if match:
            side, board_txt = match.groups()
            signs = [float(v) for v in _EVAL_NUMBER.findall(user)]
            positive = sum(1 for v in signs if v > 0)
            negative = sum(1 for v in signs if v < 0)
            verdict = 1 if positive > len(signs) / 2 else -1 if negative > len(signs) / 2 else 0
            thought = {
                "Win probability": "Aggregated from the variation evaluations.",
                "Threat": "See the variations.",
                "Potential strategies": "Follow the favorable variations.",
            }
            return json.dumps({"thought": thought, "final_evaluation": verdict})
        match = _TTT_BOARD_EVAL.search(user)
        if match:
            side, board_txt, move_txt = match.groups()
            board = ttt.parse_board(board_txt, side)
            record = ttt.apply_action(board, ttt.action(int(move_txt)))
            verdict = _verdict_for_o(record.state_after)
            leader = "O" if verdict > 0 else "X" if verdict < 0 else "neither side"
            thought = {
                "Reflection": (
                    f"The board and {side}'s move {move_txt} lead to a position "
                    f"where {leader} takes advantage."
                ),
                "Win probability": f"The win probability favors {leader}.",
                "Threat": "Derived from exhaustive play.",
                "Potential strategies": "Play the principal variation.",
            }
            return json.dumps({"thought": thought, "final_evaluation": verdict})
        return None

    def _best_candidate(self, board: ttt.TicTacToeBoard, moves: list[int]) -> int:
        best, best_key = None, None
        for move in moves:
            record = ttt.apply_action(board, ttt.action(move))
            value = _verdict_for_o(record.state_after)
            if board.to_move == "X":
                value = -value
            key = (value, -move)
            if best_key is None or key > best_key:
                best, best_key = move, key
        assert best is not None
        return best

    # -- FrozenLake ----------------------------------------------------------------

    def _fl_distances(self, grid: fl.FrozenLakeGrid) -> dict[tuple[int, int], int]:
        from collections import deque

        goal = next(
            (r, c)
            for r in range(fl.SIZE)
            for c in range(fl.SIZE)
            if grid.layout[r][c] == "G"
        )
        dist = {goal: 0}
        queue = deque([goal])
        while queue:
            r, c = queue.popleft()
            for dr, dc in fl.DELTAS.values():
                nxt = (r + dr, c + dc)
                if (
                    0 <= nxt[0] < fl.SIZE
                    and 0 <= nxt[1] < fl.SIZE
                    and grid.layout[nxt[0]][nxt[1]] != "O"
                    and nxt not in dist
                ):
                    dist[nxt] = dist[(r, c)] + 1
                    queue.append(nxt)
        return dist

    def _fl_value(self, grid: fl.FrozenLakeGrid, action_id: int) -> float:
        post = fl._slide(grid.player, action_id)
        cell = grid.layout[post[0]][post[1]]
        if cell == "O":
            return -5.0
        if cell == "G":
            return 5.0
        dist = self._fl_distances(grid).get(post)
        return -5.0 if dist is None else round(-0.1 * dist, 10)

    def _frozenlake(self, user: str) -> Optional[str]:
        match = _FL_GRID.search(user)
        if not match:
            return None
        grid = fl.parse_grid(match.group(1))
        if "Evaluation for taking action" in user:
            moves = re.findall(r"### Evaluation for taking action (\d+):", user)
            scored = []
            for mv in moves:
                segment = user.split(f"### Evaluation for taking action {mv}:", 1)[1]
                nums = _EVAL_NUMBER.findall(segment.split("###")[0])
                scored.append((float(nums[0]) if nums else float("-inf"), -int(mv)))
            best = -max(scored)[1] if scored else int(moves[0])
            thought = f"Move {best} has the highest final evaluation."
            return json.dumps({"thought": thought, "best_move": best})
        if "The available moves are" in user:
            best, best_key = None, None
            for aid in (fl.LEFT, fl.DOWN, fl.RIGHT, fl.UP):
                value = self._fl_value(grid, aid)
                key = (value, -aid)
                if best_key is None or key > best_key:
                    best, best_key = aid, key
            thought = f"Action {best} moves the player toward the goal."
            return json.dumps({"thought": thought, "best_move": best})
        act = _FL_ACTION.search(user)
        if act:
            value = self._fl_value(grid, int(act.group(1)))
            thought = {
                "Reflection": f"Move {act.group(1)} changes the distance to the goal.",
                "Win probability": "Proportional to the remaining distance.",
                "Threat": "Holes adjacent to the path.",
                "Potential strategies": "Follow the shortest safe path.",
            }
            return json.dumps({"thought": thought, "final_evaluation": value})
        return None

    # -- Breakthrough ----------------------------------------------------------------

    def _advantage_side(self, board: bt.BreakthroughBoard, board_txt: str) -> str:
        label = self.advantage_labels.get(bt.grid_text(board))
        if label in (bt.WHITE, bt.BLACK):
            return label
        win = bt.board_winner(board)
        if win is not None:
            return win
        seed = int.from_bytes(
            hashlib.sha256(board_txt.encode("utf-8")).digest()[:8], "big"
        )
        rng = random.Random(seed)
        policies = {
            bt.WHITE: OpponentPolicy(OpponentKind.UNIFORM_RANDOM),
            bt.BLACK: OpponentPolicy(OpponentKind.UNIFORM_RANDOM),
        }
        from langrl.envs.breakthrough import BreakthroughEnv

        label = mc_winrate(
            BreakthroughEnv(), board, policies, self.winrate_rollouts, rng,
            threshold=self.winrate_threshold,
        )
        if label.side in (bt.WHITE, bt.BLACK):
            return label.side
        return bt.WHITE if label.winrate_white >= 0.5 else bt.BLACK

    def _breakthrough(self, user: str) -> Optional[str]:
        if "*The board you need to evaluate:*" not in user:
            return None
        board_txt = user.split("*The board you need to evaluate:*", 1)[1]
        board_txt = board_txt.split("Here are the look-ahead variations", 1)[0]
        board = bt.parse_board(board_txt)
        if "Here are the look-ahead variations" in user:
            variation_txt = user.split("Here are the look-ahead variations", 1)[1]
            tags = _TAG.findall(variation_txt)
            whites = sum(1 for t in tags if t == "white")
            blacks = len(tags) - whites
            if whites > blacks:
                side = bt.WHITE
            elif blacks > whites:
                side = bt.BLACK
            else:
                side = self._advantage_side(board, board_txt)
            basis = "the look-ahead variations"
        else:
            side = self._advantage_side(board, board_txt)
            basis = "playouts from this position"
        return (
            "**Current Board Analysis:**\n\n"
            "**Tactical Considerations:**\n"
            f"Derived from {basis}.\n\n"
            "**Positional Evaluation:**\n"
            f"The position favors {side}.\n\n"
            "**Suggested Moves:**\n"
            "Advance the strongest pawn.\n\n"
            "**Advantage:**\n"
            f"<{side}>"
        )

    # -- Maze -------------------------------------------------------------------------

    def _maze_distance(self, pos: tuple[int, int]) -> float:
        if self.maze_layout is None:
            raise MalformedResponse("maze oracle needs a layout")
        dist = mz.shortest_path_lengths(self.maze_layout)
        return float(dist.get(pos, len(dist) + 1))

    def _maze(self, user: str) -> Optional[str]:
        if "Return the best action" in user:
            order = ("move up", "move down", "move left", "move right")
            best, best_key = None, None
            for idx, name in enumerate(order):
                marker = f'For action "{name}", '
                if marker not in user:
                    continue
                segment = user.split(marker, 1)[1].split('For action "', 1)[0]
                nums = _EVAL_NUMBER.findall(segment)
                score = float(nums[-1]) if nums else float("-inf")
                key = (score, -idx)
                if best_key is None or key > best_key:
                    best, best_key = name, key
            if best is None:
                return None
            return json.dumps({
                "thought": f"The evaluations favor {best}.", "action": best,
            })
        content = _MAZE_CONTENT.search(user)
        if not content:
            return None
        positions = _POSITION.findall(content.group(1))
        if not positions:
            return None
        pos = (int(positions[-1][0]), int(positions[-1][1]))
        if "please give your evaluation given action" in user:
            nums = [float(v) for v in _EVAL_NUMBER.findall(
                user.split("and the look-ahead information", 1)[-1]
            )]
            value = max(nums) if nums else -self._maze_distance(pos)
            thoughts = ["Aggregated the lookahead variations for the chosen action."]
            return json.dumps({"thoughts": thoughts, "final_evaluation": value})
        distance = self._maze_distance(pos)
        thoughts = [
            f"The agent is {int(distance)} steps from the goal along the shortest path."
        ]
        return json.dumps({"thoughts": thoughts, "final_evaluation": -distance})
