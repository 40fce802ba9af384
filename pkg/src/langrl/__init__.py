"""Language-space RL engine: text MDPs, language value estimation, and pipelines.

The package splits into environment layers (envs, core), exact scalar
oracles, the chat-backend abstraction (backends, oracle_backend), prompt
templates and parsers (prompts), the language-space operators (value_ops),
and the runnable pipelines plus the experiment harness.
"""

__version__ = "0.1.0"

from langrl.core import (
    AgentAction,
    EnvKind,
    Outcome,
    OutcomeKind,
    TextObservation,
    Trajectory,
    TransitionRecord,
    render_transition_description,
    trajectory_return,
)

__all__ = [
    "AgentAction",
    "EnvKind",
    "Outcome",
    "OutcomeKind",
    "TextObservation",
    "Trajectory",
    "TransitionRecord",
    "render_transition_description",
    "trajectory_return",
    "__version__",
]
