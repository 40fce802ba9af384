"""Prompt templates as a slot-filling registry, plus reply parsers.

Templates live as plain-text files under ``templates/<env>/<id>.txt``. A
file starts with a ``slots:`` header (and an optional ``scale:`` header
giving the numeric range replies are clamped to), followed by role
sections introduced by ``--- role: system|user|assistant ---`` lines.
Slots use single-brace ``{name}`` markers and only declared names are
substituted, so JSON braces in template bodies are inert.
"""

from __future__ import annotations

import ast
import hashlib
import json
import math
import re
from dataclasses import dataclass
from importlib import resources
from typing import Mapping, Optional, Sequence

from langrl.backends import ChatTurn
from langrl.core import AgentAction


class PromptError(ValueError):
    pass


class UnknownTemplate(PromptError):
    pass


class MissingSlot(PromptError):
    pass


class ParseFailure(PromptError):
    pass


class IllegalMove(PromptError):
    pass


class NoTag(PromptError):
    pass


_ROLE_LINE = re.compile(r"^--- role: (system|user|assistant) ---$")


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    role_sections: tuple[tuple[str, str], ...]
    slots: tuple[str, ...]
    scale: Optional[tuple[float, float]] = None

    def render(self, slot_values: Mapping[str, object]) -> tuple[ChatTurn, ...]:
        missing = [s for s in self.slots if s not in slot_values]
        if missing:
            raise MissingSlot(f"template {self.id}: missing slots {missing}")
        turns = []
        for role, body in self.role_sections:
            text = body
            for slot in self.slots:
                text = text.replace("{" + slot + "}", str(slot_values[slot]))
            for slot in self.slots:
                if "{" + slot + "}" in text:
                    raise MissingSlot(f"template {self.id}: {slot} left unfilled")
            turns.append(ChatTurn(role=role, content=text))
        return tuple(turns)


def _parse_template(text: str, template_id: str) -> PromptTemplate:
    lines = text.split("\n")
    slots: tuple[str, ...] = ()
    scale = None
    i = 0
    while i < len(lines) and not _ROLE_LINE.match(lines[i]):
        line = lines[i].strip()
        if line.startswith("slots:"):
            slots = tuple(
                s.strip() for s in line[len("slots:"):].split(",") if s.strip()
            )
        elif line.startswith("scale:"):
            lo, hi = line[len("scale:"):].split()
            scale = (float(lo), float(hi))
        i += 1
    sections: list[tuple[str, str]] = []
    role = None
    buf: list[str] = []
    for line in lines[i:]:
        match = _ROLE_LINE.match(line)
        if match:
            if role is not None:
                sections.append((role, "\n".join(buf).rstrip("\n")))
            role = match.group(1)
            buf = []
        else:
            buf.append(line)
    if role is not None:
        sections.append((role, "\n".join(buf).rstrip("\n")))
    if not sections:
        raise PromptError(f"template {template_id} has no role sections")
    return PromptTemplate(
        id=template_id, role_sections=tuple(sections), slots=slots, scale=scale
    )


_REGISTRY: Optional[dict[str, PromptTemplate]] = None


def _load_registry() -> dict[str, PromptTemplate]:
    global _REGISTRY
    if _REGISTRY is None:
        registry = {}
        root = resources.files(__name__) / "templates"
        for env_dir in sorted(root.iterdir(), key=lambda p: p.name):
            if not env_dir.is_dir():
                continue
            for path in sorted(env_dir.iterdir(), key=lambda p: p.name):
                if path.name.endswith(".txt"):
                    template_id = f"{env_dir.name}/{path.name[:-4]}"
                    registry[template_id] = _parse_template(path.read_text(), template_id)
        _REGISTRY = registry
    return _REGISTRY


def get_template(template_id: str) -> PromptTemplate:
    registry = _load_registry()
    try:
        return registry[template_id]
    except KeyError:
        raise UnknownTemplate(f"no template {template_id!r}")


def template_ids() -> list[str]:
    return sorted(_load_registry())


def render(template_id: str, slot_values: Mapping[str, object]) -> tuple[ChatTurn, ...]:
    return get_template(template_id).render(slot_values)


def template_checksums() -> dict[str, str]:
    """sha256 of each shipped template file, for drift pinning."""
    sums = {}
    root = resources.files(__name__) / "templates"
    for env_dir in sorted(root.iterdir(), key=lambda p: p.name):
        if not env_dir.is_dir():
            continue
        for path in sorted(env_dir.iterdir(), key=lambda p: p.name):
            if path.name.endswith(".txt"):
                digest = hashlib.sha256(path.read_bytes()).hexdigest()
                sums[f"{env_dir.name}/{path.name[:-4]}"] = digest
    return sums


# --- section builders ------------------------------------------------------------------

VARIATION_BLOCK = """*Variation {i}:* 
Description of variation's move sequence:
{move_desc}

Subsequent position evaluation:
{subsequent_eval}"""

SUBSEQUENT_BLOCK = """The subsequent board is: 

{sub_board}

The evaluation of this subsequent board is: 

{sub_eval}"""


def build_variation_block(i: int, move_desc: str, subsequent_eval: str) -> str:
    return VARIATION_BLOCK.format(i=i, move_desc=move_desc, subsequent_eval=subsequent_eval)


def build_subsequent_block(sub_board: str, sub_eval: str) -> str:
    return SUBSEQUENT_BLOCK.format(sub_board=sub_board, sub_eval=sub_eval)


# --- reply parsers ---------------------------------------------------------------------

@dataclass(frozen=True)
class ParsedPolicyReply:
    thought: str
    best_move: AgentAction


@dataclass(frozen=True)
class ParsedValueReply:
    thought_fields: dict[str, str]
    final_evaluation: float


@dataclass(frozen=True)
class AdvantageReply:
    narrative: str
    side: str


_FENCE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


def _candidate_blocks(text: str):
    decoder = json.JSONDecoder()
    spans = [text] + _FENCE.findall(text)
    for span in spans:
        start = 0
        for _ in range(64):  # cap scan attempts on garbage input
            idx = span.find("{", start)
            if idx < 0:
                break
            try:
                obj, _end = decoder.raw_decode(span[idx:])
                if isinstance(obj, dict):
                    yield obj
            except ValueError:
                # Not strict JSON from here; also try Python-literal syntax,
                # which covers single-quoted pseudo-JSON replies.
                try:
                    obj = ast.literal_eval(span[idx:].strip())
                    if isinstance(obj, dict):
                        yield obj
                except (ValueError, SyntaxError, MemoryError, RecursionError, TypeError):
                    pass
            start = idx + 1


def extract_json_object(text: str) -> dict:
    """First parseable JSON object in the text, tolerating prose and fences."""
    for obj in _candidate_blocks(text):
        return obj
    raise ParseFailure("no JSON object found in reply")


def _thought_map(raw) -> dict[str, str]:
    if isinstance(raw, dict):
        return {str(k): v if isinstance(v, str) else json.dumps(v) for k, v in raw.items()}
    if isinstance(raw, list):
        return {"thoughts": " ".join(str(x) for x in raw)}
    if raw is None:
        return {}
    return {"thought": str(raw)}


def _match_action(value, legal: Sequence[AgentAction]) -> AgentAction:
    if isinstance(value, bool):
        raise ParseFailure("best_move is not a move")
    if isinstance(value, (int, float)) and float(value).is_integer():
        wanted = int(value)
        for act in legal:
            if act.id == wanted:
                return act
        raise IllegalMove(f"move {wanted} is not in the legal set")
    if isinstance(value, str):
        text = value.strip().strip('"')
        if text.lstrip("-").isdigit():
            return _match_action(int(text), legal)
        for act in legal:
            if text == str(act.id) or text == act.display:
                return act
        raise IllegalMove(f"move {value!r} is not in the legal set")
    raise ParseFailure(f"unusable best_move value {value!r}")


def parse_policy_reply(text: str, legal: Sequence[AgentAction]) -> ParsedPolicyReply:
    """Extract the chosen move; distinguishes unparseable from illegal replies."""
    last_illegal: Optional[IllegalMove] = None
    for obj in _candidate_blocks(text):
        for key in ("best_move", "action", "best_action"):
            if key in obj:
                try:
                    act = _match_action(obj[key], legal)
                except IllegalMove as err:
                    last_illegal = err
                    continue
                except ParseFailure:
                    continue
                raw_thought = obj.get("thought", obj.get("thoughts"))
                thought = (
                    raw_thought if isinstance(raw_thought, str)
                    else json.dumps(raw_thought) if raw_thought is not None
                    else ""
                )
                return ParsedPolicyReply(thought=thought, best_move=act)
    if last_illegal is not None:
        raise last_illegal
    raise ParseFailure("no JSON object with a move key found")


def parse_value_reply(
    text: str, scale: Optional[tuple[float, float]] = None
) -> ParsedValueReply:
    """Extract thought fields and the scalar verdict, clamped to ``scale``."""
    for obj in _candidate_blocks(text):
        if "final_evaluation" not in obj and "final evaluation" not in obj:
            continue
        raw = obj.get("final_evaluation", obj.get("final evaluation"))
        if isinstance(raw, bool):
            continue
        if isinstance(raw, str):
            try:
                value = float(raw)
            except ValueError:
                raise ParseFailure(f"final_evaluation {raw!r} is not numeric")
        elif isinstance(raw, (int, float)):
            value = float(raw)
        else:
            raise ParseFailure(f"final_evaluation {raw!r} is not numeric")
        if not math.isfinite(value):
            raise ParseFailure("final_evaluation is not finite")
        if scale is not None:
            value = min(max(value, scale[0]), scale[1])
        return ParsedValueReply(
            thought_fields=_thought_map(obj.get("thought", obj.get("thoughts"))),
            final_evaluation=value,
        )
    raise ParseFailure("no JSON object with a final_evaluation key found")


_TAG = re.compile(r"<(white|black)>", re.IGNORECASE)


def parse_advantage(text: str) -> AdvantageReply:
    """Last <white>/<black> tag wins; models restate the verdict at the end."""
    tags = _TAG.findall(text)
    if not tags:
        raise NoTag("no <white> or <black> tag in reply")
    return AdvantageReply(narrative=text, side=tags[-1].lower())
