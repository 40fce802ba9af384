"""Shared pipeline data: SFT examples, training sets, masks, metrics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

from langrl.backends import ChatTurn
from langrl.core import AgentAction, Trajectory


@dataclass(frozen=True)
class SftExample:
    """One supervised example: rendered prompt turns plus the target completion."""

    prompt_turns: tuple[ChatTurn, ...]
    target_text: str
    tags: dict

    def __post_init__(self) -> None:
        if not self.target_text:
            raise ValueError("target_text must be non-empty")

    def key(self) -> str:
        """Dedup key: the state/action identity recorded by the pipeline."""
        return str(self.tags.get("key", ""))

    def to_record(self) -> dict:
        return {
            "messages": [
                {"role": t.role, "content": t.content} for t in self.prompt_turns
            ],
            "target": self.target_text,
            "tags": self.tags,
        }

    @classmethod
    def from_record(cls, record: dict) -> "SftExample":
        return cls(
            prompt_turns=tuple(
                ChatTurn(m["role"], m["content"]) for m in record["messages"]
            ),
            target_text=record["target"],
            tags=record.get("tags", {}),
        )


@dataclass(frozen=True)
class TrainingSet:
    """An ordered SFT example collection (value or policy flavored)."""

    kind: str  # "value" | "policy"
    examples: tuple[SftExample, ...]

    def __len__(self) -> int:
        return len(self.examples)

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps(ex.to_record(), sort_keys=True) + "\n" for ex in self.examples
        )

    @classmethod
    def from_jsonl(cls, kind: str, text: str) -> "TrainingSet":
        examples = tuple(
            SftExample.from_record(json.loads(line))
            for line in text.splitlines()
            if line.strip()
        )
        return cls(kind=kind, examples=examples)


def merge_value_buffers(history: list[TrainingSet], k_buffer: int) -> TrainingSet:
    """Concatenate the last ``k_buffer`` sets; newest estimate wins per key."""
    if not history:
        raise ValueError("history must be non-empty")
    window = history[-min(k_buffer, len(history)):]
    newest: dict[str, SftExample] = {}
    order: list[str] = []
    for ts in window:
        for ex in ts.examples:
            key = ex.key() or f"__anon_{len(order)}"
            if key not in newest:
                order.append(key)
            newest[key] = ex
    return TrainingSet(kind="value", examples=tuple(newest[k] for k in order))


@dataclass(frozen=True)
class ActionMask:
    """Top-m candidate actions ranked by sampling frequency."""

    candidates: tuple[tuple[AgentAction, int], ...]
    m: int

    def __post_init__(self) -> None:
        freqs = [(-f, _aid_key(a)) for a, f in self.candidates]
        if freqs != sorted(freqs):
            raise ValueError("candidates must be ordered by frequency desc, id asc")

    @property
    def actions(self) -> tuple[AgentAction, ...]:
        return tuple(a for a, _ in self.candidates)


def _aid_key(action: AgentAction):
    from langrl.core import action_sort_key

    return action_sort_key(action)


@dataclass(frozen=True)
class TDEntry:
    anchor_state: object
    variations: tuple[Trajectory, ...]


@dataclass(frozen=True)
class TDBuffer:
    entries: tuple[TDEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class IterationMetrics:
    iteration: int
    win_rate: float = 0.0
    loss_rate: float = 0.0
    tie_rate: float = 0.0
    avg_return: float = 0.0
    return_std: float = 0.0
    accuracy: Optional[float] = None
    parse_failure_rate: float = 0.0
    fallback_rate: float = 0.0
    dataset_sizes: dict = field(default_factory=dict)
    episodes: int = 0

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "win_rate": self.win_rate,
            "loss_rate": self.loss_rate,
            "tie_rate": self.tie_rate,
            "avg_return": self.avg_return,
            "return_std": self.return_std,
            "accuracy": self.accuracy,
            "parse_failure_rate": self.parse_failure_rate,
            "fallback_rate": self.fallback_rate,
            "dataset_sizes": self.dataset_sizes,
            "episodes": self.episodes,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "IterationMetrics":
        return cls(**data)


@dataclass(frozen=True)
class GpiConfig:
    variations: int = 4          # K independent lookahead rollouts per action
    lookahead_steps: int = 3     # N steps simulated per rollout (first is the action)
    rollout_policy: str = "uniform_random"
    eval_starts: int = 30
    seeds_per_start: int = 3
    step_cap: int = 50

    def __post_init__(self) -> None:
        if self.variations < 1 or self.lookahead_steps < 1:
            raise ValueError("variations and lookahead steps must be >= 1")


@dataclass(frozen=True)
class ActorCriticConfig:
    trajectories: int = 512
    k_mc: int = 5
    n_sample: int = 10
    top_m: int = 10
    k_buffer: int = 3
    parallel: int = 8
    rollout_cap: int = 100
    agent_side: str = "O"
