"""Reading the toolkit's corpus JSONL and schema files.

This package talks to the retrieval toolkit exclusively through its file
formats, so the data model here is deliberately minimal: just what marking,
training and export need.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional


@dataclass(frozen=True)
class Example:
    id: str
    tokens: tuple[str, ...]
    subj_start: int
    subj_end: int
    subj_type: Optional[str]
    obj_start: int
    obj_end: int
    obj_type: Optional[str]
    label: str
    direction: Optional[str]


@dataclass(frozen=True)
class Schema:
    labels: tuple[str, ...]
    null_name: str
    directional: bool

    def class_names(self) -> list[str]:
        """Classifier target names: direction-expanded labels plus NULL."""
        out: list[str] = []
        for name in self.labels:
            if self.directional:
                out.append(f"{name}(e1,e2)")
                out.append(f"{name}(e2,e1)")
            else:
                out.append(name)
        out.append(self.null_name)
        return out

    def class_of(self, example: Example) -> str:
        if example.label == self.null_name:
            return self.null_name
        if self.directional:
            suffix = "(e1,e2)" if example.direction == "sub_obj" else "(e2,e1)"
            return f"{example.label}{suffix}"
        return example.label


def load_schema(path: str | Path) -> Schema:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return Schema(
        labels=tuple(raw["labels"]),
        null_name=raw.get("null_name", "NULL"),
        directional=bool(raw.get("directional", False)),
    )


def load_examples(path: str | Path) -> list[Example]:
    examples = []
    seen = set()
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if raw["id"] in seen:
                raise ValueError(f"{path}:{lineno}: duplicate id {raw['id']!r}")
            seen.add(raw["id"])
            examples.append(Example(
                id=raw["id"],
                tokens=tuple(raw["tokens"]),
                subj_start=int(raw["subj"]["start"]),
                subj_end=int(raw["subj"]["end"]),
                subj_type=raw["subj"].get("type"),
                obj_start=int(raw["obj"]["start"]),
                obj_end=int(raw["obj"]["end"]),
                obj_type=raw["obj"].get("type"),
                label=raw["label"],
                direction=raw.get("direction"),
            ))
    return examples
