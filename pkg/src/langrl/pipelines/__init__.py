"""The three runnable pipelines plus dataset builders and evaluators."""

from langrl.pipelines.actor_critic import (
    PipelineBackends,
    collect_trajectory,
    evaluate_policy,
    evaluate_value_accuracy,
    run_actor_critic_iteration,
    select_action_candidates,
)
from langrl.pipelines.checkpoints import (
    hash_tree,
    run_actor_critic,
    run_td_training,
    trajectories_to_jsonl,
)
from langrl.pipelines.datasets import StateDataset, build_state_dataset, policy_grid
from langrl.pipelines.gpi import (
    format_mean_std,
    maze_start_states,
    run_gpi_grid,
    run_language_gpi,
)
from langrl.pipelines.records import (
    ActionMask,
    ActorCriticConfig,
    GpiConfig,
    IterationMetrics,
    SftExample,
    TDBuffer,
    TDEntry,
    TrainingSet,
    merge_value_buffers,
)
from langrl.pipelines.td_training import (
    UnderfilledEntry,
    build_td_buffer,
    generate_td_training_set,
)
from langrl.pipelines.trace import PHASES, TraceWriter, read_trace, validate_trace

__all__ = [
    "PipelineBackends",
    "collect_trajectory",
    "evaluate_policy",
    "evaluate_value_accuracy",
    "run_actor_critic_iteration",
    "select_action_candidates",
    "hash_tree",
    "run_actor_critic",
    "run_td_training",
    "trajectories_to_jsonl",
    "StateDataset",
    "build_state_dataset",
    "policy_grid",
    "format_mean_std",
    "maze_start_states",
    "run_gpi_grid",
    "run_language_gpi",
    "ActionMask",
    "ActorCriticConfig",
    "GpiConfig",
    "IterationMetrics",
    "SftExample",
    "TDBuffer",
    "TDEntry",
    "TrainingSet",
    "merge_value_buffers",
    "UnderfilledEntry",
    "build_td_buffer",
    "generate_td_training_set",
    "PHASES",
    "TraceWriter",
    "read_trace",
    "validate_trace",
]
