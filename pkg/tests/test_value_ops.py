import json
import random

import pytest

from langrl import prompts as pk
from langrl import value_ops as vo
from langrl.backends import Backend, CompletionResult, MockBackend, ReplayBackend
from langrl.core import EnvKind, Trajectory
from langrl.envs import breakthrough as bt
from langrl.envs import maze as mz
from langrl.envs import tictactoe as ttt
from langrl.envs.maze import load_layout
from langrl.envs.tictactoe import TicTacToeEnv
from langrl.oracle_backend import OracleBackend
from langrl.oracles import minimax
from tests.conftest import random_tictactoe_board


class ScriptedBackend(Backend):
    """Returns queued replies in order; repeats the last one when exhausted."""

    backend_id = "scripted"

    def __init__(self, replies):
        self.replies = list(replies)
        self.calls = 0

    def complete(self, turns, params):
        text = self.replies[min(self.calls, len(self.replies) - 1)]
        self.calls += 1
        return CompletionResult(text=text, backend_id=self.backend_id)


EXAMPLE_BOARD = ttt.TicTacToeBoard(("O", "X", "", "", "O", "", "", "X", ""), "O")


def _win_rollout(seed):
    record = ttt.apply_action(EXAMPLE_BOARD, ttt.action(9))
    return Trajectory((record,), seed=seed)


def test_mc_estimate_unanimous_win_scores_one():
    oracle = OracleBackend(EnvKind.TIC_TAC_TOE)
    est = vo.language_mc_estimate(
        EnvKind.TIC_TAC_TOE, EXAMPLE_BOARD, ttt.action(9),
        [_win_rollout(s) for s in range(5)], oracle,
    )
    assert est.verdict == 1.0
    assert est.source == "mc"
    assert est.provenance


def test_mc_prompt_has_one_section_per_rollout():
    _template, turns = vo._mc_turns(
        EnvKind.TIC_TAC_TOE, EXAMPLE_BOARD, ttt.action(9), [_win_rollout(0)]
    )
    body = turns[-1].content
    assert "Below is the rollout sequence 1 after this (board, action):" in body
    assert "rollout sequence 2" not in body
    _template, turns5 = vo._mc_turns(
        EnvKind.TIC_TAC_TOE, EXAMPLE_BOARD, ttt.action(9),
        [_win_rollout(s) for s in range(5)],
    )
    assert "rollout sequence 5" in turns5[-1].content


def test_mc_estimate_requires_matching_rollouts():
    oracle = OracleBackend(EnvKind.TIC_TAC_TOE)
    other = ttt.apply_action(EXAMPLE_BOARD, ttt.action(3))
    with pytest.raises(ValueError):
        vo.language_mc_estimate(
            EnvKind.TIC_TAC_TOE, EXAMPLE_BOARD, ttt.action(9),
            [Trajectory((other,))], oracle,
        )
    with pytest.raises(ValueError):
        vo.language_mc_estimate(
            EnvKind.TIC_TAC_TOE, EXAMPLE_BOARD, ttt.action(9), [], oracle
        )


def test_mc_oracle_matches_minimax_of_post_state(rng):
    oracle = OracleBackend(EnvKind.TIC_TAC_TOE)
    for _ in range(25):
        board = random_tictactoe_board(rng)
        legal = ttt.legal_actions(board)
        action = legal[rng.randrange(len(legal))]
        record = ttt.apply_action(board, action)
        rollout = Trajectory((record,))
        est = vo.language_mc_estimate(
            EnvKind.TIC_TAC_TOE, board, action, [rollout], oracle
        )
        post = record.state_after
        if ttt.is_terminal(post):
            win = ttt.winner(post.cells)
            expected = 1.0 if win == "O" else -1.0 if win == "X" else 0.0
        else:
            value = minimax(post).value
            expected = float(value if post.to_move == "O" else -value)
        assert est.verdict == expected


def test_td_unanimous_white_variations():
    oracle = OracleBackend(EnvKind.BREAKTHROUGH)
    board = bt.initial_board()
    white_eval = vo.LanguageValueEstimate(
        narrative="**Advantage:**\n<white>", verdict="white",
        source="direct_query", provenance="x",
    )
    packets = [
        vo.VariationPacket(
            move_description=f"The action sequence is: seq{i}.",
            successor_evaluation=white_eval,
            successor_state_text="5bbbbb",
        )
        for i in range(2)
    ]
    est = vo.language_td_target(EnvKind.BREAKTHROUGH, board, packets, oracle)
    assert est.verdict == "white"
    assert est.source == "td"


def test_td_single_terminal_variation_keeps_side():
    oracle = OracleBackend(EnvKind.BREAKTHROUGH)
    board = bt.initial_board()
    black_eval = vo.LanguageValueEstimate(
        narrative="The game is over. <black>", verdict="black",
        source="direct_query", provenance="x",
    )
    packet = vo.VariationPacket(
        move_description="The action sequence is: a4a3.",
        successor_evaluation=black_eval,
    )
    est = vo.language_td_target(EnvKind.BREAKTHROUGH, board, [packet], oracle)
    assert est.verdict == "black"


def test_td_tictactoe_majority_sign(rng):
    oracle = OracleBackend(EnvKind.TIC_TAC_TOE)
    board = EXAMPLE_BOARD

    def fake_estimate(value):
        return vo.LanguageValueEstimate(
            narrative=json.dumps({"thought": "t", "final_evaluation": value}),
            verdict=value, source="direct_query", provenance="p",
        )

    packets = [
        vo.VariationPacket(move_description=f"variation {i}",
                           successor_evaluation=fake_estimate(v))
        for i, v in enumerate([1.0, 1.0, -1.0])
    ]
    est = vo.language_td_target(EnvKind.TIC_TAC_TOE, board, packets, oracle)
    assert est.verdict == 1.0
    mixed = [
        vo.VariationPacket(move_description=f"variation {i}",
                           successor_evaluation=fake_estimate(v))
        for i, v in enumerate([1.0, -1.0])
    ]
    assert vo.language_td_target(
        EnvKind.TIC_TAC_TOE, board, mixed, oracle
    ).verdict == 0.0


def test_td_requires_variations():
    oracle = OracleBackend(EnvKind.BREAKTHROUGH)
    with pytest.raises(ValueError):
        vo.language_td_target(EnvKind.BREAKTHROUGH, bt.initial_board(), [], oracle)


def test_variation_packet_invariants():
    est = vo.LanguageValueEstimate("n", 0.0, "mc", "p")
    with pytest.raises(ValueError):
        vo.VariationPacket(move_description="", successor_evaluation=est)


def test_query_value_sources_and_replay_determinism(tmp_path):
    oracle = OracleBackend(EnvKind.TIC_TAC_TOE)
    cache = ReplayBackend(tmp_path / "cache", strict=False, record_with=oracle)
    first = vo.query_value(
        EnvKind.TIC_TAC_TOE, EXAMPLE_BOARD, cache, action=ttt.action(9)
    )
    assert first.source == "direct_query"
    replay = ReplayBackend(tmp_path / "cache", strict=True)
    second = vo.query_value(
        EnvKind.TIC_TAC_TOE, EXAMPLE_BOARD, replay, action=ttt.action(9)
    )
    assert (first.narrative, first.verdict) == (second.narrative, second.verdict)


def test_query_value_saturates_on_terminal_win():
    oracle = OracleBackend(EnvKind.TIC_TAC_TOE)
    cells = ["", "X", "", "", "O", "", "", "X", ""]
    cells[0] = "O"
    board = ttt.TicTacToeBoard(tuple(cells), "O")
    est = vo.query_value(EnvKind.TIC_TAC_TOE, board, oracle, action=ttt.action(9))
    assert est.verdict == 1.0  # scale bound


def test_query_value_maze_has_expected_keys():
    layout = load_layout("toy5")
    oracle = OracleBackend(EnvKind.MAZE, maze_layout=layout)
    world = mz.initial_world(layout, (1, 1))
    est = vo.query_value(EnvKind.MAZE, world, oracle)
    data = json.loads(est.narrative)
    assert "thoughts" in data and "final_evaluation" in data


def test_improve_single_candidate_always_wins():
    backend = ScriptedBackend(['{"thought": "x", "best_move": 9}'])
    env = TicTacToeEnv()
    est = vo.LanguageValueEstimate("narrative", 0.5, "mc", "p")
    obs = env.textualize(EXAMPLE_BOARD)
    cands = vo.CandidateEvaluationSet(obs, ((ttt.action(9), est),))
    improved = vo.improve_policy(EnvKind.TIC_TAC_TOE, cands, backend)
    assert improved.action.id == 9
    assert not improved.fallback_used


def test_improve_candidate_closure_rejects_outside_reply():
    # Reply names a move that is legal on the board but outside the mask;
    # the retry burns out and the fallback picks the best verdict.
    backend = ScriptedBackend(['{"best_move": 3}'])
    env = TicTacToeEnv()
    obs = env.textualize(EXAMPLE_BOARD)
    cands = vo.CandidateEvaluationSet(obs, (
        (ttt.action(4), vo.LanguageValueEstimate("n", -0.4, "mc", "p")),
        (ttt.action(9), vo.LanguageValueEstimate("n", 0.9, "mc", "p")),
    ))
    improved = vo.improve_policy(EnvKind.TIC_TAC_TOE, cands, backend)
    assert improved.fallback_used
    assert improved.action.id == 9


def test_improve_fallback_max_verdict_lowest_id():
    backend = ScriptedBackend(["no json here"])
    env = TicTacToeEnv()
    obs = env.textualize(EXAMPLE_BOARD)
    cands = vo.CandidateEvaluationSet(obs, (
        (ttt.action(3), vo.LanguageValueEstimate("n", -0.4, "mc", "p")),
        (ttt.action(4), vo.LanguageValueEstimate("n", 0.1, "mc", "p")),
    ))
    improved = vo.improve_policy(EnvKind.TIC_TAC_TOE, cands, backend)
    assert improved.fallback_used
    assert improved.action.id == 4
    ties = vo.CandidateEvaluationSet(obs, (
        (ttt.action(9), vo.LanguageValueEstimate("n", 0.1, "mc", "p")),
        (ttt.action(4), vo.LanguageValueEstimate("n", 0.1, "mc", "p")),
    ))
    assert vo.improve_policy(EnvKind.TIC_TAC_TOE, ties, backend).action.id == 4


def test_improve_with_oracle_never_picks_strictly_worse(rng):
    oracle = OracleBackend(EnvKind.TIC_TAC_TOE)
    env = TicTacToeEnv()
    for _ in range(30):
        board = random_tictactoe_board(rng)
        legal = ttt.legal_actions(board)
        picks = rng.sample(legal, k=min(len(legal), 3))
        entries = []
        for act in picks:
            est = vo.query_value(EnvKind.TIC_TAC_TOE, board, oracle, action=act)
            entries.append((act, est))
        obs = env.textualize(board)
        improved = vo.improve_policy(
            EnvKind.TIC_TAC_TOE,
            vo.CandidateEvaluationSet(obs, tuple(entries)),
            oracle,
        )
        assert improved.action.id in {a.id for a in picks}

        def mover_value(action):
            record = ttt.apply_action(board, action)
            post = record.state_after
            if ttt.is_terminal(post):
                win = ttt.winner(post.cells)
                value_for_o = 1.0 if win == "O" else -1.0 if win == "X" else 0.0
            else:
                raw = minimax(post).value
                value_for_o = raw if post.to_move == "O" else -raw
            return value_for_o if board.to_move == "O" else -value_for_o

        best = max(mover_value(a) for a in picks)
        assert mover_value(improved.action) == best


def test_candidate_set_requires_distinct_legal_actions():
    env = TicTacToeEnv()
    obs = env.textualize(EXAMPLE_BOARD)
    est = vo.LanguageValueEstimate("n", 0.0, "mc", "p")
    with pytest.raises(ValueError):
        vo.CandidateEvaluationSet(obs, ((ttt.action(9), est), (ttt.action(9), est)))
    with pytest.raises(ValueError):
        vo.CandidateEvaluationSet(obs, ((ttt.action(1), est),))  # 1 is occupied


def test_improve_maze_uses_action_key_reply():
    layout = load_layout("toy5")
    env_oracle = OracleBackend(EnvKind.MAZE, maze_layout=layout)
    world = mz.initial_world(layout, (1, 1))
    entries = []
    for act in mz.ACTIONS:
        record = mz.apply_action(world, act)
        est = vo.query_value(EnvKind.MAZE, record.state_after, env_oracle)
        entries.append((act, est))
    obs = mz.textualize(world)
    improved = vo.improve_policy(
        EnvKind.MAZE,
        vo.CandidateEvaluationSet(obs, tuple(entries)),
        env_oracle,
    )
    assert improved.action.display == "move right"
