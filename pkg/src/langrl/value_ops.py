"""Language-space RL operators.

Four operations cover the estimation/improvement cycle: a Monte-Carlo
estimate that aggregates full rollout narrations, a TD target that fuses
short lookahead variations with successor evaluations, a direct value
query against a (prompted or tuned) value model, and the prompted policy
improvement step that turns per-candidate evaluations into one action.

All of them render a registered template, make backend calls, and parse
the reply; parse-failure retry budgets live here, and improvement always
resolves to a candidate action (falling back to the highest scalar
verdict rather than failing a pipeline on one bad generation).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from langrl import prompts
from langrl.backends import Backend, ChatTurn, SamplingParams, request_digest
from langrl.core import (
    AgentAction,
    EnvKind,
    TextObservation,
    Trajectory,
    action_sort_key,
    render_transition_description,
)
from langrl.envs import breakthrough as bt
from langrl.envs import frozenlake as fl
from langrl.envs import maze as mz
from langrl.envs import tictactoe as ttt

Verdict = Union[float, str]

DEFAULT_PARAMS = SamplingParams()


@dataclass(frozen=True)
class LanguageValueEstimate:
    """A structured evaluation: the full reply plus one extracted verdict."""

    narrative: str
    verdict: Verdict
    source: str  # mc | td | direct_query
    provenance: str  # digest of the producing request


@dataclass(frozen=True)
class VariationPacket:
    """One lookahead variation: rendered transition chain plus the
    evaluation of where it ended."""

    move_description: str
    successor_evaluation: LanguageValueEstimate
    successor_state_text: str = ""

    def __post_init__(self) -> None:
        if not self.move_description:
            raise ValueError("variation needs a move description")


@dataclass(frozen=True)
class CandidateEvaluationSet:
    state: TextObservation
    entries: tuple[tuple[AgentAction, LanguageValueEstimate], ...]

    def __post_init__(self) -> None:
        ids = [a.id for a, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("candidate actions must be distinct")
        legal_ids = {a.id for a in self.state.legal_actions}
        if legal_ids and not set(ids) <= legal_ids:
            raise ValueError("candidate actions must be legal at the state")

    @property
    def actions(self) -> tuple[AgentAction, ...]:
        return tuple(a for a, _ in self.entries)


@dataclass(frozen=True)
class ImprovedPolicy:
    action: AgentAction
    rationale: str
    fallback_used: bool = False


def _complete(backend: Backend, turns: Sequence[ChatTurn], params: SamplingParams):
    result = backend.complete(turns, params)
    return result.text, request_digest(turns, params)


# --- rollout narration ------------------------------------------------------------------

def rollout_section(env_kind: EnvKind, index: int, traj: Trajectory) -> str:
    """One numbered playing-history section for the MC evaluation prompt."""
    steps = [render_transition_description(t, env_kind) for t in traj]
    if env_kind is EnvKind.TIC_TAC_TOE:
        header = f"Below is the rollout sequence {index} after this (board, action):"
        body = "\n".join(steps)
        if traj.transitions[-1].terminal:
            body += "\n" + ttt.game_over_sentence(traj.final_state)
        return f"{header}\n{body}"
    if env_kind is EnvKind.FROZEN_LAKE:
        header = (
            f"For your reference, below is the rollout sequence {index} "
            f"after this (board, action):"
        )
        body = "\n\n".join(steps)
        if traj.transitions[-1].terminal:
            body += "\n" + fl.game_over_sentence(traj.final_state)
        return f"{header}\n{body}"
    raise prompts.UnknownTemplate(f"no MC rollout format for {env_kind}")


def _mc_turns(env_kind: EnvKind, state, action: AgentAction,
              rollouts: Sequence[Trajectory]):
    sections = "\n\n".join(
        rollout_section(env_kind, i + 1, traj) for i, traj in enumerate(rollouts)
    )
    if env_kind is EnvKind.TIC_TAC_TOE:
        template = prompts.get_template("tictactoe/policy_evaluation")
        turns = template.render({
            "player": state.to_move,
            "board": ttt.board_text(state),
            "action": action.id,
            "rollouts": sections,
        })
    elif env_kind is EnvKind.FROZEN_LAKE:
        template = prompts.get_template("frozenlake/policy_evaluation")
        turns = template.render({
            "board": fl.grid_text(state),
            "action": action.id,
            "rollouts": sections,
        })
    else:
        raise prompts.UnknownTemplate(f"no MC evaluation template for {env_kind}")
    return template, turns


def language_mc_estimate(
    env_kind: EnvKind,
    state,
    action: AgentAction,
    rollouts: Sequence[Trajectory],
    backend: Backend,
    params: SamplingParams = DEFAULT_PARAMS,
    retries: int = 1,
) -> LanguageValueEstimate:
    """Aggregate complete rollout narrations into one evaluation of (state, action)."""
    if not rollouts:
        raise ValueError("need at least one rollout")
    for traj in rollouts:
        first = traj.transitions[0]
        if first.state_before != state or first.action.id != action.id:
            raise ValueError("every rollout must start with (state, action)")
    template, turns = _mc_turns(env_kind, state, action, rollouts)
    last_err: Optional[prompts.ParseFailure] = None
    for _ in range(retries + 1):
        text, digest = _complete(backend, turns, params)
        try:
            parsed = prompts.parse_value_reply(text, template.scale)
        except prompts.ParseFailure as err:
            last_err = err
            continue
        return LanguageValueEstimate(
            narrative=text, verdict=parsed.final_evaluation,
            source="mc", provenance=digest,
        )
    assert last_err is not None
    raise last_err


# --- TD target ---------------------------------------------------------------------------

def _td_turns(env_kind: EnvKind, state, variations: Sequence[VariationPacket],
              action: Optional[AgentAction]):
    if env_kind is EnvKind.BREAKTHROUGH:
        blocks = "\n\n".join(
            prompts.build_variation_block(
                i + 1,
                v.move_description,
                prompts.build_subsequent_block(
                    v.successor_state_text, v.successor_evaluation.narrative
                ),
            )
            for i, v in enumerate(variations)
        )
        template = prompts.get_template("breakthrough/td_aggregate")
        return template, template.render({
            "board": bt.board_text(state), "variations": blocks,
        })
    if env_kind is EnvKind.TIC_TAC_TOE:
        blocks = "\n\n".join(
            prompts.build_variation_block(
                i + 1, v.move_description, v.successor_evaluation.narrative
            )
            for i, v in enumerate(variations)
        )
        template = prompts.get_template("tictactoe/td_aggregate")
        return template, template.render({
            "player": state.to_move,
            "board": ttt.board_text(state),
            "variations": blocks,
        })
    if env_kind is EnvKind.MAZE:
        if action is None:
            raise ValueError("maze TD aggregation is per action")
        blocks = "\n\n".join(
            prompts.build_variation_block(
                i + 1, v.move_description, v.successor_evaluation.narrative
            )
            for i, v in enumerate(variations)
        )
        template = prompts.get_template("maze/td_action_aggregate")
        return template, template.render({
            "chosen_action": action.display,
            "game_content": mz.history_text(state),
            "variations": blocks,
        })
    raise prompts.UnknownTemplate(f"no TD template for {env_kind}")


def _parse_estimate(env_kind: EnvKind, text: str, scale) -> Verdict:
    if env_kind is EnvKind.BREAKTHROUGH:
        return prompts.parse_advantage(text).side
    if env_kind is EnvKind.MAZE:
        # Maze verdicts are narrative-first; keep the text when non-numeric.
        try:
            return prompts.parse_value_reply(text, scale).final_evaluation
        except prompts.ParseFailure:
            return text
    return prompts.parse_value_reply(text, scale).final_evaluation


def language_td_target(
    env_kind: EnvKind,
    state,
    variations: Sequence[VariationPacket],
    backend: Backend,
    action: Optional[AgentAction] = None,
    params: SamplingParams = DEFAULT_PARAMS,
    retries: int = 1,
) -> LanguageValueEstimate:
    """Fuse lookahead variations and successor evaluations into a new target."""
    if not variations:
        raise ValueError("need at least one variation")
    template, turns = _td_turns(env_kind, state, variations, action)
    last_err: Optional[prompts.PromptError] = None
    for _ in range(retries + 1):
        text, digest = _complete(backend, turns, params)
        try:
            verdict = _parse_estimate(env_kind, text, template.scale)
        except (prompts.ParseFailure, prompts.NoTag) as err:
            last_err = err
            continue
        return LanguageValueEstimate(
            narrative=text, verdict=verdict, source="td", provenance=digest,
        )
    assert last_err is not None
    raise last_err


# --- direct value query -------------------------------------------------------------------

def _query_turns(env_kind: EnvKind, state, action: Optional[AgentAction]):
    if env_kind is EnvKind.TIC_TAC_TOE:
        if action is None:
            raise ValueError("tic-tac-toe value queries take (state, action)")
        template = prompts.get_template("tictactoe/value_query")
        return template, template.render({
            "player": state.to_move,
            "board": ttt.board_text(state),
            "action": action.id,
        })
    if env_kind is EnvKind.FROZEN_LAKE:
        if action is None:
            raise ValueError("FrozenLake value queries take (state, action)")
        template = prompts.get_template("frozenlake/value_query")
        return template, template.render({
            "board": fl.grid_text(state), "action": action.id,
        })
    if env_kind is EnvKind.BREAKTHROUGH:
        template = prompts.get_template("breakthrough/value_eval")
        return template, template.render({"board": bt.board_text(state)})
    if env_kind is EnvKind.MAZE:
        template = prompts.get_template("maze/value_query")
        return template, template.render({"game_content": mz.history_text(state)})
    raise prompts.UnknownTemplate(f"no value query template for {env_kind}")


def query_value(
    env_kind: EnvKind,
    state,
    backend: Backend,
    action: Optional[AgentAction] = None,
    params: SamplingParams = DEFAULT_PARAMS,
    retries: int = 1,
) -> LanguageValueEstimate:
    """Directly evaluate a state (or state-action pair) with the value model."""
    template, turns = _query_turns(env_kind, state, action)
    last_err: Optional[prompts.PromptError] = None
    for _ in range(retries + 1):
        text, digest = _complete(backend, turns, params)
        try:
            verdict = _parse_estimate(env_kind, text, template.scale)
        except (prompts.ParseFailure, prompts.NoTag) as err:
            last_err = err
            continue
        return LanguageValueEstimate(
            narrative=text, verdict=verdict, source="direct_query", provenance=digest,
        )
    assert last_err is not None
    raise last_err


def value_query_turns(
    env_kind: EnvKind, state, action: Optional[AgentAction] = None
) -> tuple[ChatTurn, ...]:
    """The prompt a value model is trained on and queried with; used to
    build SFT examples whose prompts match inference-time queries."""
    _, turns = _query_turns(env_kind, state, action)
    return turns


# --- policy improvement ---------------------------------------------------------------

_MAZE_SLOTS = {
    "move up": "evaluations_up",
    "move down": "evaluations_down",
    "move left": "evaluations_left",
    "move right": "evaluations_right",
}


def _improvement_turns(env_kind: EnvKind, cands: CandidateEvaluationSet):
    obs = cands.state
    ids = [a.id for a, _ in cands.entries]
    if env_kind is EnvKind.TIC_TAC_TOE:
        blocks = "\n".join(
            f"### Evaluation for taking action {a.id}:\n{est.narrative}"
            for a, est in cands.entries
        )
        template = prompts.get_template("tictactoe/policy_improvement")
        return template, template.render({
            "next_player": obs.mover,
            "state": obs.body,
            "available_positions": "[" + ", ".join(str(i) for i in ids) + "]",
            "next_states": blocks,
        })
    if env_kind is EnvKind.FROZEN_LAKE:
        blocks = "\n\n".join(
            f"### Evaluation for taking action {a.id}:\n{est.narrative}"
            for a, est in cands.entries
        )
        template = prompts.get_template("frozenlake/policy_improvement")
        return template, template.render({
            "board": obs.body,
            "available_positions": "[" + ", ".join(str(i) for i in ids) + "]",
            "next_states": blocks,
        })
    if env_kind is EnvKind.MAZE:
        values = {slot: "This action was not evaluated." for slot in _MAZE_SLOTS.values()}
        for a, est in cands.entries:
            values[_MAZE_SLOTS[a.display]] = est.narrative
        template = prompts.get_template("maze/policy_improvement")
        return template, template.render(values)
    raise prompts.UnknownTemplate(f"no policy improvement template for {env_kind}")


def _fallback_action(cands: CandidateEvaluationSet) -> AgentAction:
    """Highest scalar verdict wins; ties (and all-text verdicts) go to lowest id."""
    def key(entry):
        act, est = entry
        score = est.verdict if isinstance(est.verdict, (int, float)) else float("-inf")
        return (-score, action_sort_key(act))

    return sorted(cands.entries, key=key)[0][0]


def improve_policy(
    env_kind: EnvKind,
    cands: CandidateEvaluationSet,
    backend: Backend,
    params: SamplingParams = DEFAULT_PARAMS,
    retries: int = 1,
) -> ImprovedPolicy:
    """Prompted selection of the best candidate given the evaluations.

    The reply must name a candidate action; anything else consumes the
    retry budget and then falls back to the max-verdict candidate, so a
    pipeline never stalls on one bad generation.
    """
    if not cands.entries:
        raise ValueError("need at least one candidate")
    template, turns = _improvement_turns(env_kind, cands)
    for _ in range(retries + 1):
        text, _digest = _complete(backend, turns, params)
        try:
            parsed = prompts.parse_policy_reply(text, cands.actions)
        except (prompts.ParseFailure, prompts.IllegalMove):
            continue
        return ImprovedPolicy(action=parsed.best_move, rationale=text)
    return ImprovedPolicy(
        action=_fallback_action(cands), rationale="", fallback_used=True
    )
