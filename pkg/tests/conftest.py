"""Shared builders for synthetic corpora and instances."""

from __future__ import annotations

import numpy as np
import pytest

from relicl.corpus import (
    DatasetSplit,
    EntityMention,
    REInstance,
    RelationLabel,
    RelationSchema,
)


def make_schema(names, null_name="NULL", directional=False) -> RelationSchema:
    return RelationSchema(
        labels=tuple(RelationLabel(n) for n in names),
        null_name=null_name,
        directional=directional,
    )


def make_instance(instance_id, tokens, subj_span, obj_span, label,
                  subj_type=None, obj_type=None) -> REInstance:
    tokens = tuple(tokens)
    s0, s1 = subj_span
    o0, o1 = obj_span
    return REInstance(
        id=instance_id,
        tokens=tokens,
        subject=EntityMention(" ".join(tokens[s0:s1]), s0, s1,
                              entity_type=subj_type, role="subject"),
        object=EntityMention(" ".join(tokens[o0:o1]), o0, o1,
                             entity_type=obj_type, role="object"),
        gold_label=label,
    )


def simple_instance(instance_id: str, label: RelationLabel,
                    filler: str = "about") -> REInstance:
    tokens = (f"subj{instance_id}", "is", filler, f"obj{instance_id}")
    return make_instance(instance_id, tokens, (0, 1), (3, 4), label)


def synth_split(label_counts: dict[str, int], schema: RelationSchema,
                name: str = "train", prefix: str = "") -> DatasetSplit:
    """One instance per count, labels resolved through the schema."""
    instances = []
    i = 0
    for label_name, count in label_counts.items():
        if label_name == schema.null_name:
            label = schema.null_label
        else:
            label = RelationLabel(label_name)
        for _ in range(count):
            instances.append(simple_instance(f"{prefix}{name}-{i:05d}", label))
            i += 1
    return DatasetSplit(name=name, instances=tuple(instances), schema=schema)


@pytest.fixture
def sibling_schema() -> RelationSchema:
    return make_schema(["sibling", "employer"])


@pytest.fixture
def lisa_instance(sibling_schema) -> REInstance:
    return make_instance(
        "sem-0001",
        ("He", "has", "a", "sister", "Lisa"),
        (0, 1),
        (4, 5),
        RelationLabel("sibling"),
    )


def rng_unit_vectors(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    mat = rng.standard_normal((n, dim)).astype(np.float32)
    return mat / np.linalg.norm(mat, axis=1, keepdims=True)
