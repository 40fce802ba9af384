"""Checkpointed, resumable pipeline drivers.

A run directory holds one subdirectory per iteration:

    iteration_<k>/
        trajectories.jsonl   # one record per transition
        value_sft.jsonl      # merged value training set
        policy_sft.jsonl     # policy training set (actor-critic only)
        metrics.json         # written last: marks the iteration complete
        trace.jsonl

Artifacts are written atomically and iterations are deterministic given
(seed, backends), so re-running after a kill reproduces identical bytes,
and a recorded run replayed from its cache matches hash-for-hash.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
from pathlib import Path
from typing import Optional, Sequence

from langrl import value_ops as vo
from langrl.backends import SamplingParams
from langrl.core import Trajectory, transition_to_record
from langrl.envs.base import TextMdp
from langrl.envs.opponents import OpponentPolicy
from langrl.pipelines.actor_critic import (
    PipelineBackends,
    run_actor_critic_iteration,
)
from langrl.pipelines.records import ActorCriticConfig, IterationMetrics, TrainingSet
from langrl.pipelines.td_training import build_td_buffer, generate_td_training_set
from langrl.pipelines.trace import TraceWriter


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def trajectories_to_jsonl(env: TextMdp, trajectories: Sequence[Trajectory]) -> str:
    lines = []
    for i, traj in enumerate(trajectories):
        for record in traj.transitions:
            row = transition_to_record(
                record, env.textualize(record.state_before).body, traj.seed
            )
            row["traj"] = i
            lines.append(json.dumps(row, sort_keys=True))
    return "\n".join(lines) + "\n" if lines else ""


def hash_tree(root) -> dict[str, str]:
    """sha256 per file (relative path keys), for byte-identity comparisons."""
    root = Path(root)
    out = {}
    for path in sorted(root.rglob("*")):
        if path.is_file():
            out[str(path.relative_to(root))] = hashlib.sha256(
                path.read_bytes()
            ).hexdigest()
    return out


def iteration_dir(run_dir, k: int) -> Path:
    return Path(run_dir) / f"iteration_{k}"


def _iteration_complete(run_dir, k: int) -> bool:
    return (iteration_dir(run_dir, k) / "metrics.json").exists()


def run_actor_critic(
    env: TextMdp,
    opponent: Optional[OpponentPolicy],
    cfg: ActorCriticConfig,
    backends: PipelineBackends,
    iterations: int,
    run_dir,
    seed: int = 0,
    params: SamplingParams = vo.DEFAULT_PARAMS,
) -> list[IterationMetrics]:
    """Drive ``iterations`` actor-critic iterations with checkpointing.

    Completed iterations (metrics.json present) are loaded, not re-run, so
    a killed run resumes where it stopped; an interrupted iteration is
    recomputed from scratch, which yields identical bytes under a replay
    or scripted backend.
    """
    run_dir = Path(run_dir)
    buffer_history: list[TrainingSet] = []
    all_metrics: list[IterationMetrics] = []
    for k in range(iterations):
        it_dir = iteration_dir(run_dir, k)
        if _iteration_complete(run_dir, k):
            raw = TrainingSet.from_jsonl(
                "value", (it_dir / "raw_value_sft.jsonl").read_text()
            )
            buffer_history.append(raw)
            all_metrics.append(
                IterationMetrics.from_dict(
                    json.loads((it_dir / "metrics.json").read_text())
                )
            )
            continue
        trace = TraceWriter()
        merged, policy_set, metrics, trajectories = run_actor_critic_iteration(
            env, opponent, cfg, backends, buffer_history,
            iteration=k, seed=seed, params=params, trace=trace,
        )
        atomic_write(
            it_dir / "trajectories.jsonl", trajectories_to_jsonl(env, trajectories)
        )
        atomic_write(it_dir / "raw_value_sft.jsonl", buffer_history[-1].to_jsonl())
        atomic_write(it_dir / "value_sft.jsonl", merged.to_jsonl())
        atomic_write(it_dir / "policy_sft.jsonl", policy_set.to_jsonl())
        atomic_write(it_dir / "trace.jsonl", trace.to_jsonl())
        atomic_write(
            it_dir / "metrics.json",
            json.dumps(metrics.to_dict(), sort_keys=True, indent=1),
        )
        all_metrics.append(metrics)
    return all_metrics


def run_td_training(
    env: TextMdp,
    states: Sequence,
    rollout_policy: OpponentPolicy,
    lookahead_steps: int,
    variations: int,
    backends: PipelineBackends,
    iterations: int,
    run_dir,
    seed: int = 0,
    params: SamplingParams = vo.DEFAULT_PARAMS,
    distinct_mode: str = "full_sequence",
) -> list[IterationMetrics]:
    """Alg-2-style loop: fixed lookahead buffer, one training set per iteration."""
    run_dir = Path(run_dir)
    rng = random.Random(f"{seed}:td_buffer")
    buffer = build_td_buffer(
        env, states, rollout_policy, lookahead_steps, variations, rng,
        distinct_mode=distinct_mode,
    )
    all_metrics = []
    for k in range(iterations):
        it_dir = iteration_dir(run_dir, k)
        if _iteration_complete(run_dir, k):
            all_metrics.append(
                IterationMetrics.from_dict(
                    json.loads((it_dir / "metrics.json").read_text())
                )
            )
            continue
        trace = TraceWriter()
        training_set, dropped = generate_td_training_set(
            env.kind, buffer, backends.value, backends.aggregator,
            iteration=k, params=params, trace=trace,
        )
        metrics = IterationMetrics(
            iteration=k,
            dataset_sizes={
                "value": len(training_set),
                "buffer": len(buffer),
                "dropped": dropped,
            },
        )
        atomic_write(it_dir / "value_sft.jsonl", training_set.to_jsonl())
        atomic_write(it_dir / "trace.jsonl", trace.to_jsonl())
        atomic_write(
            it_dir / "metrics.json",
            json.dumps(metrics.to_dict(), sort_keys=True, indent=1),
        )
        all_metrics.append(metrics)
    return all_metrics
