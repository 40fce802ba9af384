"""Iterative TD training-set generation for a fixed rollout policy.

The buffer holds, per anchor state, up to K distinct l-step lookahead
variations collected with the rollout policy. One pass over the buffer
evaluates each variation's final state with the current value model,
fuses variations into an aggregated target, and emits SFT examples whose
prompts are the plain value query for the anchor state. The outer
iteration loop (retrain, swap in tuned model, regenerate) is driven by
the harness so the external SFT stage can interleave.
"""

from __future__ import annotations

import logging
import random
import warnings
from typing import Optional, Sequence

from langrl import value_ops as vo
from langrl.backends import Backend, SamplingParams
from langrl.core import EnvKind, Trajectory
from langrl.envs import breakthrough as bt
from langrl.envs.base import TextMdp
from langrl.envs.opponents import OpponentPolicy, opponent_move
from langrl.pipelines.records import SftExample, TDBuffer, TDEntry, TrainingSet
from langrl.pipelines.trace import TraceWriter
from langrl.prompts import PromptError

log = logging.getLogger(__name__)


class UnderfilledEntry(Warning):
    """Fewer distinct variations exist than requested for an anchor state."""


def _variation_signature(traj: Trajectory, mode: str) -> tuple:
    ids = tuple(t.action.id for t in traj.transitions)
    return ids[:1] if mode == "first_action" else ids


def build_td_buffer(
    env: TextMdp,
    states: Sequence,
    rollout_policy: OpponentPolicy,
    l: int,
    k: int,
    rng: random.Random,
    distinct_mode: str = "full_sequence",
    attempt_factor: int = 8,
) -> TDBuffer:
    """Per state, roll the policy l steps until k distinct variations exist.

    Terminal anchors are skipped; an anchor that cannot produce k distinct
    variations within ``attempt_factor * k`` attempts raises the
    UnderfilledEntry warning and keeps what it has.
    """
    if l < 1 or k < 1:
        raise ValueError("l and k must be >= 1")
    entries = []
    for state in states:
        if env.is_terminal(state):
            log.info("skipping terminal anchor state")
            continue
        variations: list[Trajectory] = []
        signatures = set()
        for _ in range(attempt_factor * k):
            if len(variations) >= k:
                break
            steps = []
            current = state
            for _ in range(l):
                if env.is_terminal(current):
                    break
                act = opponent_move(rollout_policy, env, current, rng)
                record = env.apply_action(current, act, rng)
                steps.append(record)
                current = record.state_after
                if record.terminal:
                    break
            if not steps:
                continue
            traj = Trajectory(tuple(steps))
            sig = _variation_signature(traj, distinct_mode)
            if sig not in signatures:
                signatures.add(sig)
                variations.append(traj)
        if len(variations) < k:
            warnings.warn(
                f"anchor produced {len(variations)} of {k} distinct variations",
                UnderfilledEntry,
            )
        if variations:
            entries.append(TDEntry(anchor_state=state, variations=tuple(variations)))
    return TDBuffer(entries=tuple(entries))


def _variation_packet(
    env_kind: EnvKind, traj: Trajectory, value_backend: Backend,
    params: SamplingParams,
) -> vo.VariationPacket:
    final_state = traj.final_state
    successor = vo.query_value(env_kind, final_state, value_backend, params=params)
    if env_kind is EnvKind.BREAKTHROUGH:
        move_desc = bt.describe_move_sequence(traj.transitions)
        state_text = bt.board_text(final_state)
    else:
        from langrl.core import render_transition_description

        move_desc = "\n".join(
            render_transition_description(t, env_kind) for t in traj.transitions
        )
        state_text = ""
    return vo.VariationPacket(
        move_description=move_desc,
        successor_evaluation=successor,
        successor_state_text=state_text,
    )


def generate_td_training_set(
    env_kind: EnvKind,
    buffer: TDBuffer,
    value_backend: Backend,
    agg_backend: Backend,
    iteration: int = 0,
    params: SamplingParams = vo.DEFAULT_PARAMS,
    trace: Optional[TraceWriter] = None,
) -> tuple[TrainingSet, int]:
    """One training-set pass over the buffer; returns (set, dropped count)."""
    if len(buffer) == 0:
        raise ValueError("TD buffer is empty")
    examples = []
    dropped = 0
    for idx, entry in enumerate(buffer.entries):
        unit = f"state_{idx}"
        try:
            if trace:
                trace.add(iteration, unit, "rollout", variations=len(entry.variations))
            packets = [
                _variation_packet(env_kind, traj, value_backend, params)
                for traj in entry.variations
            ]
            if trace:
                trace.add(iteration, unit, "evaluate", count=len(packets))
            target = vo.language_td_target(
                env_kind, entry.anchor_state, packets, agg_backend, params=params
            )
            if trace:
                trace.add(iteration, unit, "aggregate", verdict=str(target.verdict))
        except PromptError:
            dropped += 1
            continue
        prompt_turns = vo.value_query_turns(env_kind, entry.anchor_state)
        key = (
            bt.board_text(entry.anchor_state)
            if env_kind is EnvKind.BREAKTHROUGH
            else str(entry.anchor_state)
        )
        examples.append(
            SftExample(
                prompt_turns=prompt_turns,
                target_text=target.narrative,
                tags={
                    "iteration": iteration,
                    "pipeline": "td_train",
                    "env": env_kind.value,
                    "key": key,
                },
            )
        )
        if trace:
            trace.add(iteration, unit, "emit")
    return TrainingSet(kind="value", examples=tuple(examples)), dropped
