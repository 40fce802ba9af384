"""Environment-independent types shared by every estimator and pipeline.

States are immutable snapshots; a trajectory is a chained list of
transition records whose text renderings feed the language-side
operators, while the numeric rewards feed the scalar oracles.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Iterator, Optional, Sequence, Union

ActionId = Union[int, str]


class EnvKind(str, Enum):
    TIC_TAC_TOE = "tic_tac_toe"
    BREAKTHROUGH = "breakthrough"
    FROZEN_LAKE = "frozen_lake"
    MAZE = "maze"


class UnknownEnvKind(ValueError):
    pass


class IllegalAction(ValueError):
    pass


class TerminalState(ValueError):
    pass


@dataclass(frozen=True)
class AgentAction:
    """A legal move: a small integer (grid games) or a move code like 'd3e4'."""

    id: ActionId
    display: str

    def __post_init__(self) -> None:
        if self.display == "":
            raise ValueError("action display must be non-empty")


class OutcomeKind(str, Enum):
    WIN = "win"
    DRAW = "draw"
    FAIL = "fail"
    SUCCESS = "success"


@dataclass(frozen=True)
class Outcome:
    kind: OutcomeKind
    side: Optional[str] = None  # winning side for WIN, else None

    def __post_init__(self) -> None:
        if self.kind is OutcomeKind.WIN and not self.side:
            raise ValueError("win outcome requires a side")
        if self.kind is not OutcomeKind.WIN and self.side is not None:
            raise ValueError("only win outcomes carry a side")


@dataclass(frozen=True)
class TransitionRecord:
    """One (s, a, r, s') step. ``outcome`` is present iff ``terminal``."""

    state_before: Any
    action: AgentAction
    reward: float
    state_after: Any
    terminal: bool
    outcome: Optional[Outcome] = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.reward):
            raise ValueError("reward must be finite")
        if not self.terminal and self.outcome is not None:
            raise ValueError("non-terminal transition must not carry an outcome")


@dataclass(frozen=True)
class Trajectory:
    """An ordered, chained sequence of transitions plus the RNG seed used."""

    transitions: tuple[TransitionRecord, ...]
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        steps = self.transitions
        if not isinstance(steps, tuple):
            object.__setattr__(self, "transitions", tuple(steps))
            steps = self.transitions
        for i in range(len(steps) - 1):
            if steps[i].state_after != steps[i + 1].state_before:
                raise ValueError(f"broken state chain between steps {i} and {i + 1}")
            if steps[i].terminal:
                raise ValueError("terminal transition must be last")

    def __len__(self) -> int:
        return len(self.transitions)

    def __iter__(self) -> Iterator[TransitionRecord]:
        return iter(self.transitions)

    @property
    def final_state(self) -> Any:
        return self.transitions[-1].state_after

    @property
    def outcome(self) -> Optional[Outcome]:
        return self.transitions[-1].outcome if self.transitions else None


@dataclass(frozen=True)
class TextObservation:
    """A rendered state: board/maze text, the legal actions, and who moves."""

    body: str
    legal_actions: tuple[AgentAction, ...]
    mover: str

    def __post_init__(self) -> None:
        if not isinstance(self.legal_actions, tuple):
            object.__setattr__(self, "legal_actions", tuple(self.legal_actions))


def action_sort_key(action: AgentAction) -> tuple:
    """Canonical ordering for deterministic tie-breaks (lowest id first)."""
    if isinstance(action.id, int):
        return (0, action.id, "")
    return (1, 0, str(action.id))


def trajectory_return(traj: Trajectory, gamma: float) -> float:
    """Discounted return sum(gamma**i * r_i) over the trajectory's rewards."""
    if len(traj) == 0:
        raise ValueError("trajectory is empty")
    total = 0.0
    weight = 1.0
    for step in traj:
        total += weight * step.reward
        weight *= gamma
    return total


def outcome_reward(outcome: Optional[Outcome], side: str) -> float:
    """+1/-1/0 view of a game outcome from ``side``'s perspective."""
    if outcome is None:
        return 0.0
    if outcome.kind is OutcomeKind.WIN:
        return 1.0 if outcome.side == side else -1.0
    if outcome.kind is OutcomeKind.SUCCESS:
        return 1.0
    if outcome.kind is OutcomeKind.FAIL:
        return -1.0
    return 0.0


# --- canonical transition sentences -------------------------------------------------
#
# Each environment registers its renderer; the registry keeps this module free
# of environment imports while render_transition_description stays a single
# dispatch point for d(.) that pipelines can call generically.

_RENDERERS: dict[EnvKind, Any] = {}


def register_transition_renderer(kind: EnvKind, fn) -> None:
    _RENDERERS[kind] = fn


def render_transition_description(t: TransitionRecord, env_kind: EnvKind) -> str:
    """Canonical one-step transition sentence for the given environment.

    Pure function of its inputs: identical transitions render byte-identically.
    """
    try:
        renderer = _RENDERERS[EnvKind(env_kind)]
    except (KeyError, ValueError):
        raise UnknownEnvKind(f"no transition renderer for {env_kind!r}")
    return renderer(t)


# --- serialization -------------------------------------------------------------------

def transition_to_record(t: TransitionRecord, state_text: str, seed: Optional[int]) -> dict:
    return {
        "state_text": state_text,
        "action_id": t.action.id,
        "action_display": t.action.display,
        "reward": t.reward,
        "terminal": t.terminal,
        "outcome": None
        if t.outcome is None
        else {"kind": t.outcome.kind.value, "side": t.outcome.side},
        "seed": seed,
    }


def trajectory_to_jsonl(traj: Trajectory, state_text_fn) -> str:
    """One JSON line per transition; ``state_text_fn`` renders state_before."""
    lines = [
        json.dumps(
            transition_to_record(t, state_text_fn(t.state_before), traj.seed),
            sort_keys=True,
        )
        for t in traj.transitions
    ]
    return "\n".join(lines) + "\n" if lines else ""
