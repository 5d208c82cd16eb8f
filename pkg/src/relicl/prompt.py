"""Prompt rendering, reasoning augmentation, and token-budget assembly.

A prompt is instructions + demonstrations + the test block, in that order.
Demonstrations appear in ascending similarity so the most relevant one sits
next to the test input; when the estimate exceeds the budget, whole
demonstrations are dropped least-similar-first (never the instructions or
the test block, and never a partial demonstration).

The instruction wording lives in a versioned template file; the fixed
demonstration/query frames below are contract constants that downstream
parsing relies on.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Optional, Protocol

from .corpus import REInstance, RelationLabel, RelationSchema
from .errors import BudgetError, DataError, EmptyCompletionError
from .retrieve import Demonstration, DemonstrationSet

logger = logging.getLogger(__name__)

SECTION_SEP = "\n\n"
CONTEXT_PREFIX = "Context:"
LABEL_LINE_PREFIX = "Given the context, the relation between"
REASONING_PREFIX = "It is because:"

REASONING_QUERY_TEMPLATE = (
    'What are the clues that lead to the relation between "{subj}" and '
    '"{obj}" to be "{label}" in the sentence "{sentence}"?\n'
    "It is because:"
)

# Substrings that would let generated reasoning forge prompt structure.
_DELIMITER_STRINGS = (CONTEXT_PREFIX, LABEL_LINE_PREFIX)


def _load_template(name: str = "default") -> tuple[str, dict[str, str]]:
    text = resources.files("relicl.templates").joinpath(f"{name}.txt").read_text(
        encoding="utf-8"
    )
    lines = text.splitlines()
    if not lines or not lines[0].startswith("version:"):
        raise DataError(f"template {name!r} must start with a version line")
    version = lines[0].split(":", 1)[1].strip()
    sections: dict[str, str] = {}
    current: Optional[str] = None
    body: list[str] = []
    for line in lines[1:]:
        if line.startswith("[") and line.endswith("]"):
            if current is not None:
                sections[current] = "\n".join(body).strip()
            current = line[1:-1]
            body = []
        else:
            body.append(line)
    if current is not None:
        sections[current] = "\n".join(body).strip()
    return version, sections


TEMPLATE_VERSION, _TEMPLATE_SECTIONS = _load_template()


class TokenEstimator(Protocol):
    name: str

    def estimate(self, text: str) -> int: ...


class CharRatioEstimator:
    """Tokenizer-free estimate: ceil(chars / 4) plus a 10% safety margin."""

    name = "char-ratio"

    def estimate(self, text: str) -> int:
        return math.ceil(math.ceil(len(text) / 4) * 1.10)


class CharCountEstimator:
    """Exact character count; useful when budgets are set in characters."""

    name = "char-count"

    def estimate(self, text: str) -> int:
        return len(text)


ESTIMATORS = {
    CharRatioEstimator.name: CharRatioEstimator,
    CharCountEstimator.name: CharCountEstimator,
}


@dataclass(frozen=True)
class PromptParts:
    instructions: str
    demonstrations: DemonstrationSet
    test_text: str
    budget_tokens: int

    def __post_init__(self) -> None:
        if self.budget_tokens < 1:
            raise DataError(f"budget must be positive, got {self.budget_tokens}")


def render_instructions(schema: RelationSchema) -> str:
    """Task description, the full ordered label list, and the NULL rule."""
    labels = ", ".join(schema.verbalize(lab)
                       for lab in schema.all_labels(include_null=False))
    return _TEMPLATE_SECTIONS["instructions"].format(
        labels=labels, null=schema.null_name
    )


def render_test_block(instance: REInstance) -> str:
    """The test input, ending with the completion cue after "is"."""
    return (
        f"{CONTEXT_PREFIX} {instance.sentence}\n"
        f"{LABEL_LINE_PREFIX} '{instance.subject.text}' and "
        f"'{instance.object.text}' is"
    )


def render_demonstration(demo: Demonstration, schema: RelationSchema,
                         reasoning_position: str = "after_label") -> str:
    """A labeled example block, with the reasoning line when present.

    Reasoning follows the label line by default (continuing the
    "It is because:" phrasing); "before_label" places it between the context
    and the label instead.
    """
    if reasoning_position not in ("after_label", "before_label"):
        raise DataError(f"bad reasoning position {reasoning_position!r}")
    context = f"{CONTEXT_PREFIX} {demo.instance.sentence}"
    label_line = (
        f"{LABEL_LINE_PREFIX} '{demo.instance.subject.text}' and "
        f"'{demo.instance.object.text}' is {schema.verbalize(demo.label)}."
    )
    lines = [context, label_line]
    if demo.reasoning is not None:
        reasoning_line = f"{REASONING_PREFIX} {demo.reasoning}"
        if reasoning_position == "after_label":
            lines.append(reasoning_line)
        else:
            lines.insert(1, reasoning_line)
    return "\n".join(lines)


def reasoning_query(instance: REInstance, label: RelationLabel,
                    schema: RelationSchema) -> str:
    """The gold-label-conditioned clue query for one demonstration."""
    if label != instance.gold_label:
        raise DataError(
            f"reasoning is induced from the gold label; got {label} for "
            f"instance {instance.id} with gold {instance.gold_label}"
        )
    return REASONING_QUERY_TEMPLATE.format(
        subj=instance.subject.text,
        obj=instance.object.text,
        label=schema.verbalize(label),
        sentence=instance.sentence,
    )


def sanitize_reasoning(text: str) -> str:
    """Collapse whitespace and strip prompt-structure delimiters."""
    out = " ".join(text.split())
    for delim in _DELIMITER_STRINGS:
        out = out.replace(delim, " ")
    return " ".join(out.split())


class ReasoningCache:
    """Content-addressed reasoning completions, one JSON file per key."""

    def __init__(self, directory: str | Path):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(template_version: str, instance_id: str, label_verbalization: str,
            provider_name: str) -> str:
        payload = "\x1f".join(
            (template_version, instance_id, label_verbalization, provider_name)
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def _path(self, key: str) -> Path:
        return self.dir / f"{key}.json"

    def get(self, key: str) -> Optional[str]:
        path = self._path(key)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))["completion"]

    def put(self, key: str, query: str, completion: str, provider: str) -> None:
        doc = {
            "key": key,
            "query": query,
            "completion": completion,
            "provider": provider,
            "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        }
        tmp = self._path(key).with_suffix(".tmp")
        tmp.write_text(json.dumps(doc, sort_keys=True, ensure_ascii=False),
                       encoding="utf-8")
        tmp.replace(self._path(key))


def induce_reasoning(demos: DemonstrationSet, schema: RelationSchema,
                     complete: Callable[[str], str], cache: ReasoningCache,
                     provider_name: str) -> DemonstrationSet:
    """Attach gold-label-induced reasoning to every demonstration.

    Cache hits skip the provider entirely. An empty completion leaves that
    demonstration unenriched with a warning; provider failures propagate.
    """
    enriched: list[Demonstration] = []
    for demo in demos.items:
        verbalized = schema.verbalize(demo.label)
        key = ReasoningCache.key(TEMPLATE_VERSION, demo.instance.id, verbalized,
                                 provider_name)
        cached = cache.get(key)
        if cached is not None:
            enriched.append(Demonstration(demo.instance, demo.label,
                                          reasoning=cached))
            continue
        query = reasoning_query(demo.instance, demo.label, schema)
        try:
            completion = complete(query)
        except EmptyCompletionError:
            warnings.warn(
                f"empty reasoning completion for {demo.instance.id}; "
                "demonstration left unenriched"
            )
            enriched.append(demo)
            continue
        reasoning = sanitize_reasoning(completion.strip())
        if not reasoning:
            warnings.warn(
                f"reasoning for {demo.instance.id} empty after sanitation; "
                "demonstration left unenriched"
            )
            enriched.append(demo)
            continue
        cache.put(key, query, reasoning, provider_name)
        enriched.append(Demonstration(demo.instance, demo.label,
                                      reasoning=reasoning))
    return demos.with_items(enriched)


def assemble_prompt(parts: PromptParts, estimator: TokenEstimator,
                    schema: RelationSchema, demo_order: str = "ascending",
                    reasoning_position: str = "after_label") -> tuple[str, int]:
    """Render the full prompt under the budget.

    Returns (prompt, effective_k). Demonstrations render in ascending
    similarity by default, putting the most similar one next to the test
    block ("descending" reverses that); either way, when over budget the
    least similar remaining demonstration is dropped and the prompt
    re-rendered. Raises BudgetError when the instructions plus the test
    block alone do not fit.
    """
    if demo_order not in ("ascending", "descending"):
        raise DataError(f"bad demonstration order {demo_order!r}")
    ranked = list(parts.demonstrations.items)  # most similar first

    def render(kept: list[Demonstration]) -> str:
        ordered = list(reversed(kept)) if demo_order == "ascending" else kept
        blocks = [parts.instructions]
        blocks.extend(
            render_demonstration(d, schema, reasoning_position)
            for d in ordered
        )
        blocks.append(parts.test_text)
        return SECTION_SEP.join(blocks)

    kept = ranked
    while True:
        prompt = render(kept)
        if estimator.estimate(prompt) <= parts.budget_tokens:
            return prompt, len(kept)
        if not kept:
            raise BudgetError(
                f"instructions and test block alone estimate above the "
                f"budget of {parts.budget_tokens} tokens"
            )
        kept = kept[:-1]
