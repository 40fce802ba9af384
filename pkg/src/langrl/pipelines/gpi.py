"""Prompting-only generalized policy iteration for single-agent text MDPs.

At every decision point, each legal action is explored with K independent
lookahead rollouts of N steps (the candidate action is the first step),
the value model scores each rollout terminus, the aggregator fuses the
variations into one per-action evaluation, and the improvement operator
picks the move actually played. No training happens; better behavior
comes purely from the lookahead-augmented evaluations.
"""

from __future__ import annotations

import random
from typing import Optional, Sequence

from langrl import prompts
from langrl import value_ops as vo
from langrl.backends import BackendError, SamplingParams
from langrl.core import EnvKind, Trajectory, render_transition_description
from langrl.envs import maze as mz
from langrl.envs.base import TextMdp
from langrl.pipelines.actor_critic import PipelineBackends
from langrl.pipelines.records import GpiConfig, IterationMetrics
from langrl.pipelines.trace import TraceWriter


def maze_start_states(
    layout: mz.MazeLayout, n_starts: int, seed: int = 0, step_cap: int = 50
) -> list[mz.MazeWorld]:
    """Deterministically sample distinct non-goal floor cells as episode starts."""
    cells = [c for c in sorted(layout.floor_cells()) if c != layout.goal]
    rng = random.Random(f"{seed}:starts")
    chosen = cells if n_starts >= len(cells) else rng.sample(cells, n_starts)
    return [mz.initial_world(layout, cell, step_cap) for cell in sorted(chosen)]


def _lookahead_variation(
    env: TextMdp, state, action, steps: int, rng: random.Random
) -> Trajectory:
    record = env.apply_action(state, action, rng)
    chain = [record]
    current = record.state_after
    for _ in range(steps - 1):
        if record.terminal or env.is_terminal(current):
            break
        legal = env.legal_actions(current)
        record = env.apply_action(current, legal[rng.randrange(len(legal))], rng)
        chain.append(record)
        current = record.state_after
    return Trajectory(tuple(chain))


def _chain_description(env_kind: EnvKind, traj: Trajectory) -> str:
    return "\n".join(
        render_transition_description(t, env_kind) for t in traj.transitions
    )


def gpi_step(
    env: TextMdp,
    state,
    cfg: GpiConfig,
    backends: PipelineBackends,
    rng: random.Random,
    params: SamplingParams,
    trace: Optional[TraceWriter] = None,
    iteration: int = 0,
    unit: str = "step",
):
    """One decision: lookahead-evaluate every legal action, then improve."""
    entries = []
    fallback = False
    for action in env.legal_actions(state):
        variations = [
            _lookahead_variation(env, state, action, cfg.lookahead_steps, rng)
            for _ in range(cfg.variations)
        ]
        if trace:
            trace.add(iteration, unit, "rollout", action=str(action.id),
                      variations=len(variations))
        packets = []
        for traj in variations:
            successor = vo.query_value(
                env.kind, traj.final_state, backends.value, params=params
            )
            packets.append(
                vo.VariationPacket(
                    move_description=_chain_description(env.kind, traj),
                    successor_evaluation=successor,
                )
            )
        if trace:
            trace.add(iteration, unit, "evaluate", action=str(action.id))
        est = vo.language_td_target(
            env.kind, state, packets, backends.aggregator, action=action,
            params=params,
        )
        if trace:
            trace.add(iteration, unit, "aggregate", action=str(action.id))
        entries.append((action, est))
    cands = vo.CandidateEvaluationSet(env.textualize(state), tuple(entries))
    improved = vo.improve_policy(env.kind, cands, backends.aggregator, params=params)
    if trace:
        trace.add(iteration, unit, "improve", chosen=str(improved.action.id),
                  fallback=improved.fallback_used)
    return improved


def run_episode(
    env: TextMdp,
    start_state,
    cfg: GpiConfig,
    backends: PipelineBackends,
    rng: random.Random,
    params: SamplingParams = vo.DEFAULT_PARAMS,
    trace: Optional[TraceWriter] = None,
    iteration: int = 0,
    episode_tag: str = "ep",
) -> tuple[float, int, int]:
    """Returns (undiscounted return, steps taken, improvement fallbacks)."""
    state = start_state
    total = 0.0
    steps = 0
    fallbacks = 0
    while not env.is_terminal(state):
        unit = f"{episode_tag}_t{steps}"
        improved = gpi_step(
            env, state, cfg, backends, rng, params, trace, iteration, unit
        )
        fallbacks += improved.fallback_used
        record = env.apply_action(state, improved.action, rng)
        if trace:
            trace.add(iteration, unit, "emit", reward=record.reward)
        total += record.reward
        steps += 1
        state = record.state_after
        if record.terminal:
            break
    return total, steps, fallbacks


def run_language_gpi(
    env: TextMdp,
    cfg: GpiConfig,
    backends: PipelineBackends,
    starts: Sequence,
    seed: int = 0,
    params: SamplingParams = vo.DEFAULT_PARAMS,
    trace: Optional[TraceWriter] = None,
) -> IterationMetrics:
    """Evaluate GPI behavior over starts x seeds; reports mean/std return."""
    returns = []
    successes = 0
    failures = 0
    fallbacks = 0
    decisions = 0
    episode = 0
    for s_idx, start in enumerate(starts):
        for rep in range(cfg.seeds_per_start):
            rng = random.Random(f"{seed}:ep:{s_idx}:{rep}")
            total, steps, fb = run_episode(
                env, start, cfg, backends, rng, params, trace,
                episode_tag=f"ep{episode}",
            )
            returns.append(total)
            fallbacks += fb
            decisions += steps
            episode += 1
    n = len(returns)
    mean = sum(returns) / n
    std = (sum((r - mean) ** 2 for r in returns) / n) ** 0.5
    return IterationMetrics(
        iteration=0,
        avg_return=mean,
        return_std=std,
        fallback_rate=fallbacks / decisions if decisions else 0.0,
        episodes=n,
    )


def format_mean_std(mean: float, std: float) -> str:
    return f"{mean:.2f}±{std:.2f}"


def run_gpi_grid(
    env: TextMdp,
    base_cfg: GpiConfig,
    backends: PipelineBackends,
    starts: Sequence,
    k_values: Sequence[int] = (1, 4, 6, 8),
    n_values: Sequence[int] = (1, 3),
    seed: int = 0,
    params: SamplingParams = vo.DEFAULT_PARAMS,
) -> list[dict]:
    """The lookahead ablation grid; one row per (variations K, steps N)."""
    rows = []
    for k in k_values:
        for n in n_values:
            cfg = GpiConfig(
                variations=k,
                lookahead_steps=n,
                rollout_policy=base_cfg.rollout_policy,
                eval_starts=base_cfg.eval_starts,
                seeds_per_start=base_cfg.seeds_per_start,
                step_cap=base_cfg.step_cap,
            )
            metrics = run_language_gpi(
                env, cfg, backends, starts, seed=seed, params=params
            )
            rows.append({
                "variations": k,
                "lookahead_steps": n,
                "mean_return": metrics.avg_return,
                "std_return": metrics.return_std,
                "formatted": format_mean_std(metrics.avg_return, metrics.return_std),
            })
    return rows
