"""Contract every concrete text-MDP satisfies.

Environments are value-based: a state is an immutable snapshot, and
``apply_action`` returns a fresh :class:`TransitionRecord` instead of
mutating anything. Many instances can therefore run concurrently, each
drawing from its own RNG stream.
"""

from __future__ import annotations

import random
from typing import Any, Optional, Protocol, runtime_checkable

from langrl.core import AgentAction, EnvKind, TextObservation, TransitionRecord


@runtime_checkable
class TextMdp(Protocol):
    kind: EnvKind

    def initial_state(self, rng: Optional[random.Random] = None) -> Any: ...

    def legal_actions(self, state: Any) -> tuple[AgentAction, ...]: ...

    def apply_action(
        self, state: Any, action: AgentAction, rng: Optional[random.Random] = None
    ) -> TransitionRecord: ...

    def textualize(self, state: Any) -> TextObservation: ...

    def is_terminal(self, state: Any) -> bool: ...


def rollout(
    env: TextMdp,
    state: Any,
    pick_action,
    rng: random.Random,
    max_steps: int = 10_000,
    seed: Optional[int] = None,
):
    """Play ``pick_action(env, state, rng)`` until terminal or ``max_steps``.

    Returns the list of transitions; the caller wraps them in a Trajectory.
    """
    from langrl.core import Trajectory

    steps = []
    current = state
    for _ in range(max_steps):
        if env.is_terminal(current):
            break
        action = pick_action(env, current, rng)
        record = env.apply_action(current, action, rng)
        steps.append(record)
        current = record.state_after
        if record.terminal:
            break
    return Trajectory(tuple(steps), seed=seed)
