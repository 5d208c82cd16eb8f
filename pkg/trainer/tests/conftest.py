"""Synthetic corpora where a trigger token determines the relation."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from relrep_trainer.data import Example


def example_record(ex_id, tokens, subj_span, obj_span, label,
                   direction=None, subj_type=None, obj_type=None) -> dict:
    s0, s1 = subj_span
    o0, o1 = obj_span
    return {
        "id": ex_id,
        "tokens": list(tokens),
        "subj": {"start": s0, "end": s1, "type": subj_type,
                 "text": " ".join(tokens[s0:s1])},
        "obj": {"start": o0, "end": o1, "type": obj_type,
                "text": " ".join(tokens[o0:o1])},
        "label": label,
        "direction": direction,
    }


def separable_records(labels, per_label, seed, null_count=0, prefix="ex",
                      null_name="NULL") -> list[dict]:
    """The token between the entities names the relation, so the task is
    learnable from surface form alone."""
    rng = np.random.default_rng(seed)
    records = []
    counter = 0

    def build(label, trigger):
        nonlocal counter
        subj = f"ent{int(rng.integers(0, 40))}"
        obj = f"ent{int(rng.integers(40, 80))}"
        filler = f"pad{int(rng.integers(0, 25))}"
        tokens = [subj, trigger, obj, "in", filler]
        rec = example_record(f"{prefix}-{counter:05d}", tokens, (0, 1), (2, 3),
                             label)
        counter += 1
        return rec

    for li, label in enumerate(labels):
        for _ in range(per_label):
            records.append(build(label, f"link{li}"))
    for _ in range(null_count):
        records.append(build(null_name, "near"))
    order = rng.permutation(len(records))
    return [records[i] for i in order]


def write_records(records, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n",
                    encoding="utf-8")
    return path


def write_schema(labels, path: Path, null_name="NULL",
                 directional=False) -> Path:
    path.write_text(json.dumps({
        "labels": list(labels),
        "null_name": null_name,
        "directional": directional,
    }), encoding="utf-8")
    return path


def examples_from_records(records) -> list[Example]:
    out = []
    for raw in records:
        out.append(Example(
            id=raw["id"],
            tokens=tuple(raw["tokens"]),
            subj_start=raw["subj"]["start"],
            subj_end=raw["subj"]["end"],
            subj_type=raw["subj"].get("type"),
            obj_start=raw["obj"]["start"],
            obj_end=raw["obj"]["end"],
            obj_type=raw["obj"].get("type"),
            label=raw["label"],
            direction=raw.get("direction"),
        ))
    return out


def random_example(rng: np.random.Generator, ex_id: str) -> Example:
    """Random tokens and random non-overlapping subject/object spans."""
    n = int(rng.integers(2, 14))
    tokens = tuple(f"w{int(rng.integers(0, 50))}" for _ in range(n))
    # choose two disjoint half-open spans
    while True:
        bounds = sorted(int(b) for b in rng.integers(0, n + 1, size=4))
        a0, a1, b0, b1 = bounds
        if a0 < a1 and b0 < b1 and a1 <= b0:
            break
    if rng.random() < 0.5:
        subj, obj = (a0, a1), (b0, b1)
    else:
        subj, obj = (b0, b1), (a0, a1)
    types = [None, "PER", "ORG", "[SUB]"]  # adversarial type on purpose
    return Example(
        id=ex_id,
        tokens=tokens,
        subj_start=subj[0], subj_end=subj[1],
        subj_type=types[int(rng.integers(0, 3))],
        obj_start=obj[0], obj_end=obj[1],
        obj_type=types[int(rng.integers(0, 3))],
        label="r",
        direction=None,
    )
