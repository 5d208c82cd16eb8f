"""Data model for relation extraction corpora.

A dataset is a JSONL file of labeled instances: a tokenized sentence, a
subject and an object entity span, and a gold relation label (or the NULL
sentinel when no pre-defined relation holds). Relation schemas live in a
small JSON sidecar file. This module owns ingestion, per-label statistics
and stratified subset sampling; everything downstream (embedding,
retrieval, prompting, scoring) consumes these types read-only.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)

SUB_OBJ = "sub_obj"
OBJ_SUB = "obj_sub"

DEFAULT_NULL_NAME = "NULL"


@dataclass(frozen=True)
class RelationLabel:
    """A relation name, optionally direction-bearing, or the NULL sentinel."""

    name: str
    is_null: bool = False
    direction: Optional[str] = None  # SUB_OBJ | OBJ_SUB | None

    def __post_init__(self) -> None:
        if not self.name or self.name != self.name.strip():
            raise DataError(f"bad relation label name: {self.name!r}")
        if "\n" in self.name:
            raise DataError(f"relation label contains newline: {self.name!r}")
        if self.direction not in (None, SUB_OBJ, OBJ_SUB):
            raise DataError(f"bad label direction: {self.direction!r}")
        if self.is_null and self.direction is not None:
            raise DataError("NULL label cannot carry a direction")


@dataclass(frozen=True)
class EntityMention:
    """An entity span over the owning instance's token sequence.

    Spans are half-open [start, end), 0-based over whitespace tokens.
    """

    text: str
    start: int
    end: int
    entity_type: Optional[str] = None
    role: str = "subject"  # "subject" | "object"

    def __post_init__(self) -> None:
        if self.role not in ("subject", "object"):
            raise DataError(f"bad entity role: {self.role!r}")
        if not (0 <= self.start < self.end):
            raise DataError(
                f"bad span [{self.start}, {self.end}) for {self.role} {self.text!r}"
            )


@dataclass(frozen=True)
class REInstance:
    """One labeled example: context tokens, entity pair, gold relation."""

    id: str
    tokens: tuple[str, ...]
    subject: EntityMention
    object: EntityMention
    gold_label: RelationLabel

    def __post_init__(self) -> None:
        if not self.id:
            raise DataError("instance id must be non-empty")
        if not self.tokens:
            raise DataError(f"instance {self.id}: empty token sequence")
        for tok in self.tokens:
            if not tok or any(ch.isspace() for ch in tok):
                raise DataError(
                    f"instance {self.id}: token {tok!r} is empty or contains whitespace"
                )
        for mention in (self.subject, self.object):
            if mention.end > len(self.tokens):
                raise DataError(
                    f"instance {self.id}: {mention.role} span "
                    f"[{mention.start}, {mention.end}) out of bounds for "
                    f"{len(self.tokens)} tokens"
                )
            joined = " ".join(self.tokens[mention.start : mention.end])
            if mention.text != joined:
                raise DataError(
                    f"instance {self.id}: {mention.role} text {mention.text!r} "
                    f"does not match tokens {joined!r}"
                )
        if self.subject.start < self.object.end and self.object.start < self.subject.end:
            raise DataError(f"instance {self.id}: subject and object spans overlap")

    @property
    def sentence(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class RelationSchema:
    """The pre-defined label set plus the NULL sentinel and verbalization rules."""

    labels: tuple[RelationLabel, ...]
    null_name: str = DEFAULT_NULL_NAME
    directional: bool = False

    def __post_init__(self) -> None:
        if not self.labels:
            raise DataError("schema must define at least one non-NULL label")
        names = [lab.name for lab in self.labels]
        if len(set(names)) != len(names):
            raise DataError("schema labels contain duplicates")
        if self.null_name in names:
            raise DataError(f"schema labels must not contain the NULL sentinel "
                            f"{self.null_name!r}")
        for lab in self.labels:
            if lab.is_null or lab.direction is not None:
                raise DataError(f"schema label {lab.name!r} must be plain non-NULL")

    @property
    def null_label(self) -> RelationLabel:
        return RelationLabel(self.null_name, is_null=True)

    def verbalize(self, label: RelationLabel) -> str:
        """Render a label as it appears in prompts and reports.

        Directional labels get an (e1,e2)/(e2,e1) suffix; NULL renders as
        the sentinel string.
        """
        if label.is_null:
            return self.null_name
        if label.direction == SUB_OBJ:
            return f"{label.name}(e1,e2)"
        if label.direction == OBJ_SUB:
            return f"{label.name}(e2,e1)"
        return label.name

    def all_labels(self, include_null: bool = True) -> list[RelationLabel]:
        """Every assignable label, direction-expanded, schema order, NULL last."""
        out: list[RelationLabel] = []
        for lab in self.labels:
            if self.directional:
                out.append(RelationLabel(lab.name, direction=SUB_OBJ))
                out.append(RelationLabel(lab.name, direction=OBJ_SUB))
            else:
                out.append(lab)
        if include_null:
            out.append(self.null_label)
        return out

    def resolve(self, name: str, direction: Optional[str]) -> RelationLabel:
        """Map a record's (label, direction) pair onto a schema label."""
        if name == self.null_name:
            if direction is not None:
                raise DataError(f"NULL label must not carry direction {direction!r}")
            return self.null_label
        if name not in {lab.name for lab in self.labels}:
            raise DataError(f"unknown label {name!r}")
        if self.directional:
            if direction is None:
                raise DataError(f"label {name!r} requires a direction in a "
                                "directional schema")
            return RelationLabel(name, direction=direction)
        if direction is not None:
            raise DataError(f"label {name!r} carries direction {direction!r} in a "
                            "non-directional schema")
        return RelationLabel(name)


def load_schema(path: str | Path) -> RelationSchema:
    """Read a schema file: {"labels": [str], "null_name": str, "directional": bool}."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read schema {path}: {exc}") from exc
    try:
        labels = tuple(RelationLabel(name) for name in raw["labels"])
        return RelationSchema(
            labels=labels,
            null_name=raw.get("null_name", DEFAULT_NULL_NAME),
            directional=bool(raw.get("directional", False)),
        )
    except (KeyError, TypeError) as exc:
        raise DataError(f"bad schema file {path}: {exc}") from exc


def write_schema(schema: RelationSchema, path: str | Path) -> None:
    doc = {
        "labels": [lab.name for lab in schema.labels],
        "null_name": schema.null_name,
        "directional": schema.directional,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class DatasetSplit:
    """An immutable, order-stable sequence of instances under one schema."""

    name: str
    instances: tuple[REInstance, ...]
    schema: RelationSchema

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self):
        return iter(self.instances)

    def by_id(self) -> dict[str, REInstance]:
        return {inst.id: inst for inst in self.instances}


def _mention_from_record(raw: Mapping, key: str, role: str) -> EntityMention:
    ent = raw[key]
    return EntityMention(
        text=ent["text"],
        start=int(ent["start"]),
        end=int(ent["end"]),
        entity_type=ent.get("type"),
        role=role,
    )


def instance_from_record(raw: Mapping, schema: RelationSchema) -> REInstance:
    """Build one REInstance from a parsed JSONL record."""
    try:
        label = schema.resolve(raw["label"], raw.get("direction"))
        return REInstance(
            id=str(raw["id"]),
            tokens=tuple(raw["tokens"]),
            subject=_mention_from_record(raw, "subj", "subject"),
            object=_mention_from_record(raw, "obj", "object"),
            gold_label=label,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed record: {exc}") from exc


def instance_to_record(inst: REInstance) -> dict:
    """Inverse of instance_from_record, with normalized field order."""
    def mention(ent: EntityMention) -> dict:
        return {"start": ent.start, "end": ent.end, "type": ent.entity_type,
                "text": ent.text}

    return {
        "id": inst.id,
        "tokens": list(inst.tokens),
        "subj": mention(inst.subject),
        "obj": mention(inst.object),
        "label": inst.gold_label.name,
        "direction": inst.gold_label.direction,
    }


def load_dataset(path: str | Path, schema: RelationSchema,
                 name: str = "train") -> DatasetSplit:
    """Ingest a JSONL dataset file, preserving input order.

    Raises DataError naming the offending line for malformed records,
    unknown labels, bad spans and duplicate ids. Logs the per-label
    histogram on success.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    instances: list[REInstance] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            try:
                inst = instance_from_record(raw, schema)
            except DataError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            if inst.id in seen:
                raise DataError(f"{path}:{lineno}: duplicate id {inst.id!r}")
            seen.add(inst.id)
            instances.append(inst)
    split = DatasetSplit(name=name, instances=tuple(instances), schema=schema)
    hist = label_histogram(split)
    total = len(split)
    null_count = hist.get(schema.null_label, 0)
    null_pct = 100.0 * null_count / total if total else 0.0
    logger.info(
        "loaded %s: %d instances, %d labels, NULL %.2f%%",
        path, total, len(hist), null_pct,
    )
    return split


def write_dataset(split: DatasetSplit, path: str | Path) -> None:
    """Serialize a split back to JSONL, one normalized record per line."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for inst in split.instances:
            fh.write(json.dumps(instance_to_record(inst), ensure_ascii=False) + "\n")


def label_histogram(split: DatasetSplit) -> dict[RelationLabel, int]:
    """Per-label instance counts; keys are full (direction-bearing) labels."""
    return dict(Counter(inst.gold_label for inst in split.instances))


def null_fraction(split: DatasetSplit) -> float:
    if not split.instances:
        return 0.0
    hist = label_histogram(split)
    return hist.get(split.schema.null_label, 0) / len(split)


def apportion(counts: Mapping[str, int], n: int) -> dict[str, int]:
    """Largest-remainder apportionment of n over labels, proportional to counts.

    After the floor+remainder pass, any label with at least one example and a
    quota of 0.5 or more is guaranteed one slot, funded by the largest
    allocations. Deterministic: ties break on label key.
    """
    total = sum(counts.values())
    if total == 0 or n < 0:
        raise DataError("apportionment needs a non-empty distribution and n >= 0")
    keys = sorted(counts)
    quotas = {k: n * counts[k] / total for k in keys}
    alloc = {k: int(quotas[k]) for k in keys}
    remainders = sorted(
        keys, key=lambda k: (-(quotas[k] - alloc[k]), k)
    )
    extras = n - sum(alloc.values())
    for k in remainders[:extras]:
        alloc[k] += 1
    # Guarantee representation for labels that rounded to zero despite a
    # quota >= 0.5; take the slot from the currently largest allocation.
    for k in keys:
        if alloc[k] == 0 and counts[k] >= 1 and quotas[k] >= 0.5:
            donor = max((j for j in keys if alloc[j] >= 2),
                        key=lambda j: (alloc[j], j), default=None)
            if donor is None:
                break
            alloc[donor] -= 1
            alloc[k] = 1
    return alloc


def sample_stratified_subset(split: DatasetSplit, n: int, seed: int) -> DatasetSplit:
    """Sample n instances keeping per-label proportions of the original split.

    Largest-remainder apportionment fixes the per-label quota; within each
    label, examples are drawn uniformly without replacement. Deterministic
    under a fixed seed; the result preserves the split's instance order.
    """
    if n <= 0:
        raise DataError(f"subset size must be positive, got {n}")
    if n > len(split):
        raise DataError(f"subset size {n} exceeds split size {len(split)}")
    verbalize = split.schema.verbalize
    pools: dict[str, list[REInstance]] = {}
    for inst in split.instances:
        pools.setdefault(verbalize(inst.gold_label), []).append(inst)
    counts = {k: len(v) for k, v in pools.items()}
    alloc = apportion(counts, n)
    rng = np.random.default_rng(seed)
    chosen_ids: set[str] = set()
    for key in sorted(pools):
        pool = pools[key]
        take = alloc[key]
        idx = rng.choice(len(pool), size=take, replace=False)
        chosen_ids.update(pool[i].id for i in idx)
    subset = tuple(inst for inst in split.instances if inst.id in chosen_ids)
    return DatasetSplit(name=split.name, instances=subset, schema=split.schema)
