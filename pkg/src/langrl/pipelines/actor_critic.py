"""Model-free actor-critic loop over a language policy and language critic.

One iteration: collect trajectories with the current policy against the
opponent, build Monte-Carlo value targets for every visited state-action
pair, merge with recent value buffers, then run masked policy improvement
over visited states to produce policy targets. The SFT stage that
actually tunes models is external; the loop just emits both training
sets plus metrics, and resumes with whichever backend configuration
names the tuned models.
"""

from __future__ import annotations

import json
import logging
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

from langrl import prompts
from langrl import value_ops as vo
from langrl.backends import Backend, BackendError, SamplingParams
from langrl.core import (
    AgentAction,
    EnvKind,
    Outcome,
    OutcomeKind,
    Trajectory,
    action_sort_key,
    outcome_reward,
)
from langrl.envs import frozenlake as fl
from langrl.envs import tictactoe as ttt
from langrl.envs.base import TextMdp
from langrl.envs.opponents import OpponentPolicy, opponent_move
from langrl.pipelines.records import (
    ActionMask,
    ActorCriticConfig,
    IterationMetrics,
    SftExample,
    TrainingSet,
    merge_value_buffers,
)
from langrl.pipelines.trace import TraceWriter

log = logging.getLogger(__name__)


@dataclass
class PipelineBackends:
    """The three model roles: acting policy, value model, aggregator/improver."""

    policy: Backend
    value: Backend
    aggregator: Backend


@dataclass
class _Counters:
    policy_calls: int = 0
    policy_failures: int = 0
    improvements: int = 0
    fallbacks: int = 0

    def merge(self, other: "_Counters") -> None:
        self.policy_calls += other.policy_calls
        self.policy_failures += other.policy_failures
        self.improvements += other.improvements
        self.fallbacks += other.fallbacks


def _is_two_player(env: TextMdp) -> bool:
    return env.kind in (EnvKind.TIC_TAC_TOE, EnvKind.BREAKTHROUGH)


def state_key(env: TextMdp, state) -> str:
    if env.kind is EnvKind.TIC_TAC_TOE:
        return f"{state.to_move}|{ttt.board_text(state)}"
    if env.kind is EnvKind.FROZEN_LAKE:
        return fl.grid_text(state)
    return env.textualize(state).body


def policy_inference_turns(env: TextMdp, state):
    obs = env.textualize(state)
    ids = ", ".join(str(a.id) for a in obs.legal_actions)
    if env.kind is EnvKind.TIC_TAC_TOE:
        template = prompts.get_template("tictactoe/policy_inference")
        return template.render({
            "next_player": obs.mover, "state": obs.body, "available_positions": ids,
        })
    if env.kind is EnvKind.FROZEN_LAKE:
        template = prompts.get_template("frozenlake/policy_inference")
        return template.render({"board": obs.body, "available_positions": ids})
    raise prompts.UnknownTemplate(f"no policy inference template for {env.kind}")


def policy_action(
    env: TextMdp,
    state,
    policy_backend: Backend,
    rng: random.Random,
    counters: _Counters,
    params: SamplingParams,
) -> AgentAction:
    """One language-policy decision; parse failures fall back to random legal."""
    legal = env.legal_actions(state)
    turns = policy_inference_turns(env, state)
    counters.policy_calls += 1
    try:
        reply = policy_backend.complete(turns, params)
        parsed = prompts.parse_policy_reply(reply.text, legal)
        return parsed.best_move
    except (prompts.ParseFailure, prompts.IllegalMove, BackendError):
        counters.policy_failures += 1
        return legal[rng.randrange(len(legal))]


def collect_trajectory(
    env: TextMdp,
    policy_backend: Backend,
    opponent: Optional[OpponentPolicy],
    agent_side: str,
    rng: random.Random,
    counters: _Counters,
    params: SamplingParams,
    cap: int = 100,
    start_state=None,
) -> Trajectory:
    state = env.initial_state(rng) if start_state is None else start_state
    steps = []
    for _ in range(cap):
        if env.is_terminal(state):
            break
        agent_turn = not _is_two_player(env) or state.to_move == agent_side
        if agent_turn:
            act = policy_action(env, state, policy_backend, rng, counters, params)
        else:
            assert opponent is not None, "two-player env needs an opponent"
            act = opponent_move(opponent, env, state, rng)
        record = env.apply_action(state, act, rng)
        steps.append(record)
        state = record.state_after
        if record.terminal:
            break
    return Trajectory(tuple(steps))


def _continuation(
    env: TextMdp,
    state,
    action: AgentAction,
    policy_backend: Backend,
    opponent: Optional[OpponentPolicy],
    agent_side: str,
    rng: random.Random,
    counters: _Counters,
    params: SamplingParams,
    cap: int,
) -> Trajectory:
    """A complete rollout that starts by playing ``action`` at ``state``."""
    first = env.apply_action(state, action, rng)
    steps = [first]
    current = first.state_after
    if not first.terminal:
        rest = collect_trajectory(
            env, policy_backend, opponent, agent_side, rng, counters, params,
            cap=cap, start_state=current,
        )
        steps.extend(rest.transitions)
    return Trajectory(tuple(steps))


def select_action_candidates(
    env: TextMdp,
    state,
    policy_backend: Backend,
    n_sample: int,
    m: int,
    rng: random.Random,
    params: SamplingParams = vo.DEFAULT_PARAMS,
    counters: Optional[_Counters] = None,
) -> ActionMask:
    """Frequency-ranked top-m mask from n_sample policy draws.

    Parse failures count as abstentions; if every draw fails the mask
    falls back to all legal actions.
    """
    if n_sample < 1:
        raise ValueError("n_sample must be >= 1")
    counters = counters if counters is not None else _Counters()
    legal = env.legal_actions(state)
    turns = policy_inference_turns(env, state)
    tally: dict = {}
    for _ in range(n_sample):
        counters.policy_calls += 1
        try:
            reply = policy_backend.complete(turns, params)
            parsed = prompts.parse_policy_reply(reply.text, legal)
        except (prompts.ParseFailure, prompts.IllegalMove, BackendError):
            counters.policy_failures += 1
            continue
        tally[parsed.best_move.id] = tally.get(parsed.best_move.id, 0) + 1
    by_id = {a.id: a for a in legal}
    if not tally:
        ordered = sorted(legal, key=action_sort_key)
        return ActionMask(candidates=tuple((a, 0) for a in ordered), m=m)
    ranked = sorted(
        tally.items(), key=lambda kv: (-kv[1], action_sort_key(by_id[kv[0]]))
    )
    kept = ranked[: min(m, len(ranked))]
    return ActionMask(candidates=tuple((by_id[i], f) for i, f in kept), m=m)


def _agent_pairs(env: TextMdp, trajectories: Sequence[Trajectory], agent_side: str):
    """Deduped (state, action) pairs the agent produced, in visit order."""
    seen = set()
    pairs = []
    for traj in trajectories:
        for t in traj.transitions:
            if _is_two_player(env) and t.state_before.to_move != agent_side:
                continue
            key = f"{state_key(env, t.state_before)}::{t.action.id}"
            if key not in seen:
                seen.add(key)
                pairs.append((t.state_before, t.action, key))
    return pairs


def _agent_states(env: TextMdp, trajectories: Sequence[Trajectory], agent_side: str):
    seen = set()
    states = []
    for traj in trajectories:
        for t in traj.transitions:
            if _is_two_player(env) and t.state_before.to_move != agent_side:
                continue
            key = state_key(env, t.state_before)
            if key not in seen:
                seen.add(key)
                states.append((t.state_before, key))
    return states


def run_actor_critic_iteration(
    env: TextMdp,
    opponent: Optional[OpponentPolicy],
    cfg: ActorCriticConfig,
    backends: PipelineBackends,
    buffer_history: list[TrainingSet],
    iteration: int = 0,
    seed: int = 0,
    params: SamplingParams = vo.DEFAULT_PARAMS,
    trace: Optional[TraceWriter] = None,
) -> tuple[TrainingSet, TrainingSet, IterationMetrics, list[Trajectory]]:
    """One full iteration; appends this iteration's raw value set to
    ``buffer_history`` and returns the merged value set, the policy set,
    metrics, and the collected trajectories."""
    counters = _Counters()

    # (a) collect trajectories with the current policy
    def one_traj(i: int) -> tuple[Trajectory, _Counters]:
        local = _Counters()
        rng = random.Random(f"{seed}:it{iteration}:traj:{i}")
        traj = collect_trajectory(
            env, backends.policy, opponent, cfg.agent_side, rng, local, params,
            cap=cfg.rollout_cap,
        )
        return traj, local

    with ThreadPoolExecutor(max_workers=cfg.parallel) as pool:
        results = list(pool.map(one_traj, range(cfg.trajectories)))
    trajectories = [t for t, _ in results]
    for _, local in results:
        counters.merge(local)
    if trace:
        trace.add(iteration, "collection", "rollout", count=len(trajectories))

    # (b) language MC value targets per visited (s, a)
    pairs = _agent_pairs(env, trajectories, cfg.agent_side)
    value_examples = []
    value_failures = 0

    def one_value(item) -> Optional[SftExample]:
        state, action, key = item
        local = _Counters()
        rng = random.Random(f"{seed}:it{iteration}:mc:{key}")
        rollouts = [
            _continuation(
                env, state, action, backends.policy, opponent, cfg.agent_side,
                rng, local, params, cfg.rollout_cap,
            )
            for _ in range(cfg.k_mc)
        ]
        est = vo.language_mc_estimate(
            env.kind, state, action, rollouts, backends.aggregator, params=params
        )
        return SftExample(
            prompt_turns=vo.value_query_turns(env.kind, state, action),
            target_text=est.narrative,
            tags={
                "iteration": iteration,
                "pipeline": "actor_critic",
                "env": env.kind.value,
                "key": f"{key}",
            },
        )

    with ThreadPoolExecutor(max_workers=cfg.parallel) as pool:
        futures = [pool.submit(one_value, item) for item in pairs]
        for fut in futures:
            try:
                example = fut.result()
                value_examples.append(example)
            except (prompts.PromptError, BackendError):
                value_failures += 1
    if pairs and value_failures > len(pairs) / 2:
        raise RuntimeError(
            f"iteration aborted: {value_failures}/{len(pairs)} value targets failed"
        )
    raw_value_set = TrainingSet(kind="value", examples=tuple(value_examples))
    if trace:
        trace.add(iteration, "collection", "evaluate", pairs=len(pairs))

    # (c) merge with recent buffers
    buffer_history.append(raw_value_set)
    merged = merge_value_buffers(buffer_history, cfg.k_buffer)
    if trace:
        trace.add(iteration, "collection", "aggregate", merged=len(merged))

    # (d) masked policy improvement over visited states
    states = _agent_states(env, trajectories, cfg.agent_side)
    policy_examples = []
    policy_failures = 0
    for state, key in states:
        srng = random.Random(f"{seed}:it{iteration}:mask:{key}")
        mask = select_action_candidates(
            env, state, backends.policy, cfg.n_sample, cfg.top_m, srng, params,
            counters,
        )
        try:
            entries = []
            for act in mask.actions:
                est = vo.query_value(
                    env.kind, state, backends.value, action=act, params=params
                )
                entries.append((act, est))
            cands = vo.CandidateEvaluationSet(env.textualize(state), tuple(entries))
            improved = vo.improve_policy(
                env.kind, cands, backends.aggregator, params=params
            )
        except (prompts.PromptError, BackendError):
            policy_failures += 1
            continue
        counters.improvements += 1
        if improved.fallback_used:
            counters.fallbacks += 1
            target = json.dumps({
                "thought": "Falling back to the candidate with the best evaluation.",
                "best_move": improved.action.id,
            })
        else:
            target = improved.rationale
        policy_examples.append(
            SftExample(
                prompt_turns=policy_inference_turns(env, state),
                target_text=target,
                tags={
                    "iteration": iteration,
                    "pipeline": "actor_critic",
                    "env": env.kind.value,
                    "key": key,
                    "action": improved.action.id,
                },
            )
        )
    if states and policy_failures > len(states) / 2:
        raise RuntimeError(
            f"iteration aborted: {policy_failures}/{len(states)} improvements failed"
        )
    policy_set = TrainingSet(kind="policy", examples=tuple(policy_examples))
    if trace:
        trace.add(iteration, "collection", "improve", states=len(states))

    # (e) metrics
    metrics = _metrics_from_trajectories(
        env, trajectories, cfg.agent_side, iteration, counters,
        {
            "value": len(raw_value_set),
            "merged_value": len(merged),
            "policy": len(policy_set),
        },
    )
    if trace:
        trace.add(iteration, "collection", "emit", **metrics.dataset_sizes)
    return merged, policy_set, metrics, trajectories


def _metrics_from_trajectories(
    env: TextMdp,
    trajectories: Sequence[Trajectory],
    agent_side: str,
    iteration: int,
    counters: _Counters,
    dataset_sizes: dict,
) -> IterationMetrics:
    wins = losses = ties = 0
    returns = []
    for traj in trajectories:
        outcome = traj.outcome
        if _is_two_player(env):
            reward = outcome_reward(outcome, agent_side)
        else:
            reward = outcome_reward(outcome, agent_side) if outcome else 0.0
        returns.append(reward)
        if reward > 0:
            wins += 1
        elif reward < 0:
            losses += 1
        else:
            ties += 1
    n = max(len(trajectories), 1)
    mean = sum(returns) / n if returns else 0.0
    var = sum((r - mean) ** 2 for r in returns) / n if returns else 0.0
    return IterationMetrics(
        iteration=iteration,
        win_rate=wins / n,
        loss_rate=losses / n,
        tie_rate=ties / n,
        avg_return=mean,
        return_std=var ** 0.5,
        parse_failure_rate=(
            counters.policy_failures / counters.policy_calls
            if counters.policy_calls else 0.0
        ),
        fallback_rate=(
            counters.fallbacks / counters.improvements if counters.improvements else 0.0
        ),
        dataset_sizes=dataset_sizes,
        episodes=len(trajectories),
    )


def evaluate_policy(
    env: TextMdp,
    policy_backend: Backend,
    opponent: Optional[OpponentPolicy],
    n_games: int,
    seed: int = 0,
    agent_side: str = "O",
    params: SamplingParams = vo.DEFAULT_PARAMS,
    cap: int = 100,
) -> IterationMetrics:
    """Play n_games; two-player games alternate which side opens."""
    if n_games < 1:
        raise ValueError("n_games must be >= 1")
    counters = _Counters()
    trajectories = []
    for i in range(n_games):
        rng = random.Random(f"{seed}:eval:{i}")
        start = None
        if env.kind is EnvKind.TIC_TAC_TOE:
            first = agent_side if i % 2 == 0 else ttt.other(agent_side)
            start = ttt.initial_board(first)
        trajectories.append(
            collect_trajectory(
                env, policy_backend, opponent, agent_side, rng, counters, params,
                cap=cap, start_state=start,
            )
        )
    return _metrics_from_trajectories(env, trajectories, agent_side, 0, counters, {})


def evaluate_value_accuracy(
    value_backend: Backend,
    env_kind: EnvKind,
    states: Sequence,
    labels: Sequence,
    params: SamplingParams = vo.DEFAULT_PARAMS,
) -> float:
    """Fraction of advantage judgments matching the Monte-Carlo labels.

    States labeled "none" are excluded; replies the rule-based parser
    cannot read count as wrong.
    """
    judged = 0
    correct = 0
    for state, label in zip(states, labels):
        side = label.side if hasattr(label, "side") else label["side"]
        if side not in ("white", "black"):
            continue
        judged += 1
        try:
            est = vo.query_value(env_kind, state, value_backend, params=params,
                                 retries=0)
            predicted = est.verdict
            if not isinstance(predicted, str):
                raise prompts.ParseFailure("scalar verdict for advantage task")
        except (prompts.PromptError, BackendError):
            continue
        if predicted == side:
            correct += 1
    if judged == 0:
        raise ValueError("no decisively labeled states to evaluate")
    return correct / judged
